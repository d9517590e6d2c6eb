"""Backend selection for the string kernels.

The compiled extension ``twolocal._kernels`` is used when it imports; set
``TWOLOCAL_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("TWOLOCAL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def materialize(xs, zs, ph, coeffs, n_qubits, real):
    return _impl.materialize(_i64(xs), _i64(zs), _i64(ph), _f64(coeffs), int(n_qubits), bool(real))


def project(H, xs, zs, ph):
    H = np.asarray(H)
    H = np.ascontiguousarray(H, dtype=complex if np.iscomplexobj(H) else float)
    return _impl.project(H, _i64(xs), _i64(zs), _i64(ph))


def diag_expectations(V, xs, zs, ph):
    V = np.asarray(V)
    if BACKEND == "python":
        return _impl.diag_expectations(V, xs, zs, ph)
    if np.iscomplexobj(V):
        V = np.ascontiguousarray(V, dtype=complex).view(np.float64)
        return _impl.diag_expectations(V, _i64(xs), _i64(zs), _i64(ph), True)
    return _impl.diag_expectations(_f64(V), _i64(xs), _i64(zs), _i64(ph), False)


def diag_energies(zs, h, n_qubits):
    return _impl.diag_energies(_i64(zs), _f64(h), int(n_qubits))


def diag_contract(zs, r, n_qubits):
    return _impl.diag_contract(_i64(zs), _f64(r), int(n_qubits))


def use_backend(name: str):
    """Switch backend at runtime (``"cython"`` or ``"python"``); returns the previous name."""
    global _impl, BACKEND
    prev = BACKEND
    if name == "python":
        _impl, BACKEND = _kernels_py, "python"
    elif name == "cython":
        from . import _kernels as _compiled

        _impl, BACKEND = _compiled, "cython"
    else:
        raise ValueError(f"unknown backend {name!r}")
    return prev
