"""Iterative Schrieffer-Wolff rotation of a dense Hamiltonian toward a local subspace.

Each step splits ``H = H_k + H_perp`` by projecting onto the basis, solves
``[S, H_k] = H_perp`` in the eigenbasis of ``H_k`` and conjugates
``H <- exp(-alpha S) H exp(alpha S)``.  The accumulated unitary ``U`` satisfies
``H_current = U^dag H_initial U``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .pauli import LocalHamiltonian, StringBasis, materialize, project_onto_subspace

__all__ = ["SwState", "SwResult", "initial_state", "sw_generator", "sw_localize", "sw_step"]


@dataclass(frozen=True)
class SwState:
    current_H: np.ndarray
    accumulated_U: np.ndarray
    alpha: float
    iteration: int
    residual_norm: float
    degenerate: bool = False
    kicked: bool = False


@dataclass
class SwResult:
    state: SwState
    hamiltonian: LocalHamiltonian
    converged: bool
    message: str
    trace: list = field(default_factory=list)
    initial_spectrum: np.ndarray | None = None

    @property
    def final_cost(self) -> float:
        """Spectral cost between the initial H and the final local part plus the trace shift."""
        E = self.initial_spectrum
        e = np.linalg.eigvalsh(materialize(self.hamiltonian)) + E.mean()
        return float(np.sum((np.sort(E) - e) ** 2) / (2 * E.size))

    def trace_rows(self):
        return [dict(zip(("iteration", "residual_norm", "spectral_drift"), row)) for row in self.trace]


def _split(H, basis):
    # The identity is never a basis string but commutes with everything, so
    # the trace part is counted as local rather than left in the residual.
    h = project_onto_subspace(H, basis)
    Hk = materialize(LocalHamiltonian(basis, h)) + (np.trace(H).real / H.shape[0]) * np.eye(H.shape[0])
    return h, Hk, H - Hk


def initial_state(H: np.ndarray, basis: StringBasis, alpha: float = 0.1) -> SwState:
    H = np.asarray(H)
    if np.abs(H - H.conj().T).max() > 1e-10 * max(1.0, np.abs(H).max()):
        raise ValueError("H must be Hermitian")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    _, _, Hp = _split(H, basis)
    U = np.eye(H.shape[0], dtype=H.dtype)
    return SwState(H.copy(), U, float(alpha), 0, float(np.linalg.norm(Hp)))


def sw_generator(Hk: np.ndarray, Hperp: np.ndarray, floor: float | None = None):
    """Anti-Hermitian ``S`` with ``<n|S|m> = -<n|H_perp|m> / (e_n - e_m)``.

    Pairs closer than ``floor`` (default ``1e-10 ||H_k||``) are zeroed.
    Returns ``(S, n_dropped, dropped_norm)`` where ``dropped_norm`` is the
    Frobenius weight of off-diagonal ``H_perp`` elements lost to the floor.
    """
    eps, V = np.linalg.eigh(Hk)
    if floor is None:
        floor = 1e-10 * np.linalg.norm(Hk, 2) if Hk.any() else 0.0
    P = V.conj().T @ Hperp @ V
    gap = eps[:, None] - eps[None, :]
    small = np.abs(gap) <= floor
    np.fill_diagonal(small, False)
    safe = np.where(np.abs(gap) > floor, gap, 1.0)
    S = np.where(np.abs(gap) > floor, -P / safe, 0.0)
    np.fill_diagonal(S, 0.0)
    dropped = float(np.linalg.norm(P[small])) if small.any() else 0.0
    return V @ S @ V.conj().T, int(small.sum()), dropped


def _expm_antihermitian(A):
    """``exp(A)`` for anti-Hermitian ``A`` through the eigenbasis of ``iA``."""
    mu, W = np.linalg.eigh(1j * A)
    U = (W * np.exp(-1j * mu)) @ W.conj().T
    return U.real if np.isrealobj(A) else U


def _random_generator(shape, real, scale, rng):
    B = rng.standard_normal(shape)
    if not real:
        B = B + 1j * rng.standard_normal(shape)
    A = (B - B.conj().T) / 2
    return A * (scale / np.linalg.norm(A))


def sw_step(state: SwState, basis: StringBasis, rng: np.random.Generator | None = None,
            kick: float = 1e-2) -> SwState:
    """One rotation step.

    When ``H_k`` is so degenerate that the whole off-diagonal part of
    ``H_perp`` falls below the floor (``H_k = 0`` is the extreme case) no
    first-order generator exists.  With an ``rng`` a small random rotation
    of generator norm ``kick`` is applied instead to lift the degeneracy.
    """
    H = state.current_H
    _, Hk, Hp = _split(H, basis)
    S, n_dropped, dropped = sw_generator(Hk, Hp)
    s_norm = np.linalg.norm(S)
    degenerate = dropped > 1e-12 * max(1.0, np.linalg.norm(H))
    kicked = False
    if degenerate and s_norm == 0.0:
        if rng is None:
            return replace(state, degenerate=True)
        A = _random_generator(H.shape, np.isrealobj(H), kick, rng)
        kicked = True
    else:
        A = state.alpha * S
    if not A.any():
        return replace(state, degenerate=degenerate)
    Ui = _expm_antihermitian(A)
    if np.isrealobj(H) and np.iscomplexobj(Ui):
        Ui = Ui.real
    U = state.accumulated_U @ Ui
    newH = Ui.conj().T @ H @ Ui
    newH = (newH + newH.conj().T) / 2
    drift = np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0]))
    if drift > 1e-10:
        W, _, Vh = np.linalg.svd(U)
        U = W @ Vh
    _, _, Hp_new = _split(newH, basis)
    return SwState(newH, U, state.alpha, state.iteration + 1, float(np.linalg.norm(Hp_new)),
                   degenerate, kicked)


def sw_localize(H: np.ndarray, basis: StringBasis, alpha: float = 0.1, max_iters: int = 5000,
                residual_tol: float = 1e-8, seed: int | None = 0, track_drift: bool = False,
                stall_window: int = 50, stall_tol: float = 1e-14) -> SwResult:
    """Iterate :func:`sw_step` until the non-local residual drops below ``residual_tol``.

    Stops early (``converged=False``) when the residual improves by less than
    ``stall_tol`` over ``stall_window`` iterations.  ``seed=None`` disables
    the degeneracy kick.
    """
    H = np.asarray(H)
    E0 = np.linalg.eigvalsh(H)
    state = initial_state(H, basis, alpha)
    rng = None if seed is None else np.random.default_rng(seed)
    trace = [(0, state.residual_norm, 0.0)]
    history = [state.residual_norm]
    converged = state.residual_norm < residual_tol
    message = "converged" if converged else "maximum iterations reached"
    while not converged and state.iteration < max_iters:
        new = sw_step(state, basis, rng)
        if new is state or new.iteration == state.iteration:
            message = "degenerate local part; no generator"
            break
        state = new
        drift = 0.0
        if track_drift:
            drift = float(np.max(np.abs(np.linalg.eigvalsh(state.current_H) - E0)))
        trace.append((state.iteration, state.residual_norm, drift))
        history.append(state.residual_norm)
        if state.residual_norm < residual_tol:
            converged, message = True, "converged"
            break
        if len(history) > stall_window and history[-stall_window - 1] - state.residual_norm < stall_tol:
            message = "stagnated"
            break
    h = project_onto_subspace(state.current_H, basis)
    return SwResult(state, LocalHamiltonian(basis, h), converged, message, trace, E0)
