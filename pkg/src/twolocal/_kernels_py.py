"""Pure numpy implementations of the string kernels.

Every kernel uses the element convention of a string with masks ``(x, z)``
and matrix phase ``p``: the only nonzero entries are
``tau[j ^ x, j] = i**p * (-1)**popcount(j & z)``.
"""
import numpy as np

_PHASES = np.array([1, 1j, -1, -1j])
_CHUNK = 1 << 15


def _parity_sign(idx: np.ndarray, zmask: int) -> np.ndarray:
    return 1.0 - 2.0 * (np.bitwise_count(idx & zmask) & 1)


def materialize(xs, zs, ph, coeffs, n_qubits, real):
    d = 1 << n_qubits
    cols = np.arange(d, dtype=np.int64)
    H = np.zeros((d, d), dtype=float if real else complex)
    for x, z, p, c in zip(xs, zs, ph, coeffs):
        if c == 0.0:
            continue
        vals = c * _parity_sign(cols, z)
        if real:
            H[cols ^ x, cols] += vals * _PHASES[p].real
        else:
            H[cols ^ x, cols] += vals * _PHASES[p]
    return H


def project(H, xs, zs, ph):
    d = H.shape[0]
    cols = np.arange(d, dtype=np.int64)
    out = np.empty(len(xs))
    for k, (x, z, p) in enumerate(zip(xs, zs, ph)):
        tr = np.sum(_parity_sign(cols, z) * H[cols, cols ^ x])
        out[k] = (_PHASES[p] * tr).real / d
    return out


def diag_expectations(V, xs, zs, ph):
    """``Q[n, k] = <n| tau_k |n>`` for the columns ``|n>`` of ``V``."""
    d = V.shape[0]
    rows = np.arange(d, dtype=np.int64)
    Q = np.empty((V.shape[1], len(xs)))
    cplx = np.iscomplexobj(V)
    for k, (x, z, p) in enumerate(zip(xs, zs, ph)):
        sign = _parity_sign(rows, z)[:, None]
        if cplx:
            acc = np.einsum("jn,jn->n", V[rows ^ x].conj(), sign * V)
            Q[:, k] = (_PHASES[p] * acc).real
        else:
            acc = np.einsum("jn,jn->n", V[rows ^ x], sign * V)
            Q[:, k] = _PHASES[p].real * acc
    return Q


def _sign_block(start, stop, zs):
    c = np.arange(start, stop, dtype=np.int64)[:, None]
    return 1.0 - 2.0 * (np.bitwise_count(c & zs[None, :]) & 1)


def diag_energies(zs, h, n_qubits):
    """Diagonal of ``sum_k h_k Z^{z_k}`` over all ``2^n`` basis states."""
    d = 1 << n_qubits
    out = np.empty(d)
    zs = np.asarray(zs, dtype=np.int64)
    for start in range(0, d, _CHUNK):
        stop = min(d, start + _CHUNK)
        out[start:stop] = _sign_block(start, stop, zs) @ h
    return out


def diag_contract(zs, r, n_qubits):
    """``out[k] = sum_c r[c] * sign_k(c)``; the transpose of :func:`diag_energies`."""
    d = 1 << n_qubits
    zs = np.asarray(zs, dtype=np.int64)
    out = np.zeros(len(zs))
    for start in range(0, d, _CHUNK):
        stop = min(d, start + _CHUNK)
        out += r[start:stop] @ _sign_block(start, stop, zs)
    return out
