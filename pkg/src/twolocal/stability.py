"""Stability of a localization minimum.

The Hessian of the spectral cost at an exact minimum is the metric
``g = Q^T Q / 2^N`` with ``Q[n, tau] = <n|tau|n>`` in the eigenbasis of the
fitted Hamiltonian.  This module builds ``g`` (and the full Hessian away from
the minimum, used as a finite-difference oracle), its eigenoperators,
polynomial estimates of its eigenvalues, the diagonal-model closed form for
the second eigenvalue, and the rank bound for localizable projectors.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial import Polynomial

from . import kernels
from .localizer import CouplingMatrixJ
from .pauli import LocalHamiltonian, StringBasis, basis_size, enumerate_basis, materialize
from .spectra import Spectrum

__all__ = [
    "EigenOperator",
    "Lambda2",
    "MetricMatrix",
    "RankBound",
    "diagonal_expectations",
    "eigen_operators",
    "estimate_lambda_k",
    "full_hessian",
    "gram_schmidt_polynomials",
    "lambda2_bruteforce",
    "lambda2_closed_form",
    "metric_at_minimum",
    "polynomial_fit_residual",
    "rank_lower_bound",
    "save_eigenoperator_csv",
    "save_metric_csv",
]


@dataclass(frozen=True)
class MetricMatrix:
    """Metric at a minimum with eigenpairs sorted by descending eigenvalue."""

    basis: StringBasis
    g: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @classmethod
    def from_matrix(cls, basis: StringBasis, g: np.ndarray) -> "MetricMatrix":
        g = (g + g.T) / 2
        w, V = np.linalg.eigh(g)
        order = np.argsort(w)[::-1]
        return cls(basis, g, w[order], V[:, order])

    @property
    def is_identity(self) -> bool:
        return bool(np.abs(self.g - np.eye(len(self.g))).max() <= 1e-12)

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.basis.n_qubits,
            "flavor": self.basis.flavor,
            "eigenvalues": self.eigenvalues.tolist(),
            "is_identity": self.is_identity,
        }


@dataclass(frozen=True)
class EigenOperator:
    """``O_k = sum_tau v_tau tau`` and its diagonal expectation curve."""

    k: int
    coefficients: np.ndarray
    energies: np.ndarray
    expectations: np.ndarray

    @property
    def curve(self) -> list[tuple[float, float]]:
        return list(zip(self.energies.tolist(), self.expectations.tolist()))


def _hamiltonian(h0) -> LocalHamiltonian:
    if not isinstance(h0, LocalHamiltonian):
        raise TypeError("expected a LocalHamiltonian")
    return h0


def diagonal_expectations(h0: LocalHamiltonian) -> tuple[np.ndarray, np.ndarray]:
    """Ascending energies of ``h0`` and ``Q[n, tau] = <n|tau|n>``.

    Diagonal bases skip diagonalization: eigenvectors are computational
    basis states, so ``Q`` holds exact signs.
    """
    basis = h0.basis
    xs, zs, ph = basis.masks()
    n = basis.n_qubits
    if basis.is_diagonal:
        e = kernels.diag_energies(zs, h0.couplings, n)
        order = np.argsort(e, kind="stable")
        configs = np.arange(1 << n, dtype=np.int64)[order]
        parity = np.bitwise_count(configs[:, None] & zs[None, :]) & 1
        return e[order], 1.0 - 2.0 * parity
    e, V = np.linalg.eigh(materialize(h0))
    return e, kernels.diag_expectations(V, xs, zs, ph)


def metric_at_minimum(h0: LocalHamiltonian, target: Spectrum | None = None,
                      gradient_tolerance: float = 1e-6) -> MetricMatrix:
    """Metric ``g = Q^T Q / 2^N`` at ``h0``.

    With a ``target`` the gradient at ``h0`` is checked and a warning is
    issued above ``gradient_tolerance``; ``g`` is the Hessian only at a
    stationary point of an exact fit.
    """
    h0 = _hamiltonian(h0)
    e, Q = diagonal_expectations(h0)
    d = e.size
    if target is not None:
        E = np.asarray(target.values) - np.mean(target.values)
        grad = Q.T @ (e - E) / d
        if np.max(np.abs(grad), initial=0.0) > gradient_tolerance:
            warnings.warn("h0 is not a stationary point; the metric is not the Hessian there",
                          RuntimeWarning, stacklevel=2)
    return MetricMatrix.from_matrix(h0.basis, Q.T @ Q / d)


def full_hessian(h: np.ndarray, basis: StringBasis, target: Spectrum) -> np.ndarray:
    """Exact Hessian of the spectral cost at any point with a nondegenerate spectrum.

    ``d^2C/dh_t dh_s = [sum_n Q_nt Q_ns + r_n dQ_nt/dh_s] / 2^N`` where
    ``r_n = e_n - E_n`` and first-order perturbation theory gives
    ``dQ_nt/dh_s = 2 Re sum_{m != n} <n|t|m><m|s|n> / (e_n - e_m)``.
    Uses dense string matrices, so keep ``N`` small.
    """
    h = np.asarray(h, dtype=float)
    H = materialize(LocalHamiltonian(basis, h))
    e, V = np.linalg.eigh(H)
    d = e.size
    E = np.asarray(target.values) - np.mean(target.values)
    r = e - E
    gap = e[:, None] - e[None, :]
    np.fill_diagonal(gap, np.inf)
    if np.min(np.abs(gap)) < 1e-10 * max(1.0, np.abs(e).max()):
        raise ValueError("spectrum is degenerate; the Hessian is not defined by perturbation theory")
    D = 1.0 / gap
    W = np.stack([V.conj().T @ s.matrix() @ V for s in basis])
    Q = np.real(np.einsum("tnn->nt", W))
    A = (r[:, None] * D)[None] * W
    second = 2.0 * np.real(A.reshape(len(basis), -1) @ np.transpose(W, (0, 2, 1)).reshape(len(basis), -1).T)
    hess = (Q.T @ Q + second) / d
    return (hess + hess.T) / 2


def polynomial_fit_residual(energies, values, degree: int = 6) -> float:
    """Standard deviation of ``values`` minus a least-squares polynomial in energy."""
    x = np.asarray(energies, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.size <= degree:
        raise ValueError("need more points than the polynomial degree")
    fit = Polynomial.fit(x, y, degree)
    return float(np.std(y - fit(x)))


def eigen_operators(metric: MetricMatrix, h0: LocalHamiltonian, how_many: int) -> list[EigenOperator]:
    """Top ``how_many`` eigenoperators with curves ``<n|O_k|n>`` sorted by energy.

    Signs are fixed so the curve correlates positively with energy (the
    first eigenoperator is then ``H'/||h0||``).
    """
    m = len(metric.basis)
    if not 1 <= how_many <= m:
        raise ValueError(f"how_many must lie in [1, {m}]")
    e, Q = diagonal_expectations(h0)
    out = []
    for k in range(how_many):
        v = metric.eigenvectors[:, k].copy()
        curve = Q @ v
        if curve @ e < 0 or (curve @ e == 0 and v[np.argmax(np.abs(v))] < 0):
            v, curve = -v, -curve
        out.append(EigenOperator(k + 1, v, e, curve))
    return out


def gram_schmidt_polynomials(energies, k: int, cond_limit: float = 1e-10) -> np.ndarray:
    """Trace-orthonormal ``F_0..F_k`` as functions on the spectrum.

    Rows are ``F_j(e_n)`` for ``F_0 = 1``, ``F_1`` from ``H'`` and higher
    powers, orthogonalized with the trace inner product ``sum_n f_n g_n``
    (two passes for stability).  Raises when a new power is numerically
    dependent on the previous ones.
    """
    e = np.asarray(energies, dtype=float)
    scale = np.abs(e).max()
    if scale == 0:
        raise ValueError("zero Hamiltonian")
    x = e / scale
    F = np.empty((k + 1, e.size))
    F[0] = 1.0 / np.sqrt(e.size)
    prev = F[0]
    for j in range(1, k + 1):
        f = x * prev
        norm0 = np.linalg.norm(f)
        for _ in range(2):
            f = f - F[:j].T @ (F[:j] @ f)
        if np.linalg.norm(f) < cond_limit * norm0:
            raise np.linalg.LinAlgError(f"degree {j} polynomial is numerically dependent")
        F[j] = f / np.linalg.norm(f)
        prev = F[j]
    return F


def estimate_lambda_k(h0: LocalHamiltonian, k: int, method: str = "ratio") -> float:
    """Polynomial estimate of the ``k``-th largest metric eigenvalue.

    ``method="ratio"`` evaluates ``||Q^T F_k||^2 / (2^N ||F_k||^2)`` for the
    single Gram-Schmidt polynomial ``F_k`` (default).  ``method="ritz"``
    returns the ``k``-th Rayleigh-Ritz value of ``Q Q^T / 2^N`` on the span
    of ``F_1..F_k``; it agrees with the ratio for ``k <= 2`` and is a
    guaranteed lower bound on the exact eigenvalue for every ``k``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if method not in ("ratio", "ritz"):
        raise ValueError(f"unknown method {method!r}")
    e, Q = diagonal_expectations(_hamiltonian(h0))
    d = e.size
    F = gram_schmidt_polynomials(e, k)
    P = F[1:] @ Q
    if method == "ratio":
        return float(P[-1] @ P[-1] / d)
    ritz = np.linalg.eigvalsh(P @ P.T / d)[::-1]
    return float(ritz[k - 1])


@dataclass(frozen=True)
class Lambda2:
    value: float
    asymptote: float
    bound: float


def _j_matrix(J) -> np.ndarray:
    J = J.J if isinstance(J, CouplingMatrixJ) else CouplingMatrixJ(J).J
    if not J.any():
        raise ValueError("J must be nonzero")
    return J


def lambda2_closed_form(J) -> Lambda2:
    """Second metric eigenvalue in the diagonal (Ising) approximation.

    ``2 (Tr J^4 - sum_e (J^2)_ee^2) / (3 Tr J^4 + (Tr J^2)^2 / 2
    - 6 sum_a (J^2)_aa^2 + 2 sum_ab J_ab^4)``, with the large-``N``
    asymptote ``2 Tr J^4 / (3 Tr J^4 + (Tr J^2)^2 / 2)`` and the bound
    ``4 Tr J^4 / (Tr J^2)^2``.
    """
    J = _j_matrix(J)
    J2 = J @ J
    t4 = float(np.sum(J2 * J2))
    t2 = float(np.trace(J2))
    d2 = float(np.sum(np.diag(J2) ** 2))
    j4 = float(np.sum(J**4))
    value = 2 * (t4 - d2) / (3 * t4 + 0.5 * t2**2 - 6 * d2 + 2 * j4)
    return Lambda2(value, 2 * t4 / (3 * t4 + 0.5 * t2**2), 4 * t4 / t2**2)


def lambda2_bruteforce(J) -> float:
    """Direct trace evaluation with ``F_2 = H'^2 - Tr(H'^2)/2^N`` over the Z-pair strings."""
    J = _j_matrix(J)
    n = J.shape[0]
    basis = enumerate_basis(n, "z_only_2local")
    _, zs, _ = basis.masks()
    h = CouplingMatrixJ(J).couplings(basis)
    e = kernels.diag_energies(zs, h, n)
    F = e**2 - np.mean(e**2)
    t = kernels.diag_contract(zs, F, n)
    return float(t @ t / (e.size * (F @ F)))


@dataclass(frozen=True)
class RankBound:
    n_qubits: int
    generic: float
    tighter: float | None = None

    @property
    def best(self) -> float:
        return self.generic if self.tighter is None else max(self.generic, self.tighter)


def rank_lower_bound(n_qubits: int, basis: StringBasis | None = None) -> RankBound:
    """Minimum rank of a projector isospectral to a local Hamiltonian.

    The generic bound is ``2^N / (m + 1)`` with ``m`` basis strings plus the
    identity; at ``N = 3`` the sharper argument gives ``4/3``.
    """
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    if basis is None:
        m = basis_size(n_qubits, "complex_2local")
    else:
        if basis.n_qubits != n_qubits:
            raise ValueError("basis qubit count differs")
        m = len(basis)
    return RankBound(n_qubits, (1 << n_qubits) / (m + 1), 4.0 / 3.0 if n_qubits == 3 else None)


def save_metric_csv(metric: MetricMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "eigenvalue"])
        for k, lam in enumerate(metric.eigenvalues, start=1):
            w.writerow([k, repr(float(lam))])


def save_eigenoperator_csv(ops: list[EigenOperator], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "n", "energy", "expectation"])
        for op in ops:
            for n, (x, y) in enumerate(zip(op.energies, op.expectations)):
                w.writerow([op.k, n, repr(float(x)), repr(float(y))])


def save_json(obj: dict, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2))
