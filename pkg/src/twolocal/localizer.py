"""Spectral-matching localization.

The cost between a target spectrum ``E`` and the spectrum ``e(h)`` of
``H' = sum_k h_k tau_k`` is the mean squared difference of the two sorted
spectra, ``C = sum_n (E_n - e_n)^2 / 2^(n+1)``.  Its gradient is
``dC/dh_k = sum_n (e_n - E_n) <n|tau_k|n> / 2^n``, which equals
``h_k - sum_n E_n <n|tau_k|n> / 2^n`` for a trace-orthonormal basis; the
residual form is evaluated because it does not cancel near a minimum.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .optimize import bfgs
from .pauli import LocalHamiltonian, StringBasis, enumerate_basis, materialize
from .spectra import Spectrum

__all__ = [
    "CouplingMatrixJ",
    "LocalizationProblem",
    "LocalizationResult",
    "cost",
    "cost_and_gradient",
    "diagonal_spectrum",
    "initial_couplings",
    "localize",
    "localize_diagonal",
    "localize_low_rank",
    "localize_restarts",
    "localize_sparse",
    "sparsity",
]

VARIANTS = ("plain", "low_rank", "sparse")


def cost(target, trial) -> float:
    """Mean squared localization error between two spectra paired by sorted rank."""
    E = np.asarray(getattr(target, "values", target), dtype=float)
    e = np.asarray(getattr(trial, "values", trial), dtype=float)
    if E.shape != e.shape:
        raise ValueError(f"spectra have different lengths: {E.shape} vs {e.shape}")
    if np.any(np.diff(E) < 0) or np.any(np.diff(e) < 0):
        raise ValueError("spectra must be sorted ascending")
    return float(np.sum((E - e) ** 2) / (2 * E.size))


def sparsity(h) -> float:
    """Inverse participation ratio ``sum h^4 / (sum h^2)^2``."""
    h = np.asarray(h, dtype=float)
    s2 = float(np.sum(h**2))
    return float(np.sum(h**4) / s2**2) if s2 > 0 else 0.0


@dataclass(frozen=True)
class CouplingMatrixJ:
    """Symmetric zero-diagonal couplings of ``sum_{i<j} J_ij Z_i Z_j``."""

    J: np.ndarray

    def __post_init__(self):
        J = np.array(self.J, dtype=float)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise ValueError("J must be square")
        if not np.allclose(J, J.T, atol=1e-12, rtol=0):
            raise ValueError("J must be symmetric")
        if np.any(np.diag(J) != 0):
            raise ValueError("J must have zero diagonal")
        J.setflags(write=False)
        object.__setattr__(self, "J", J)

    @property
    def n_qubits(self) -> int:
        return self.J.shape[0]

    @classmethod
    def from_couplings(cls, basis: StringBasis, h) -> "CouplingMatrixJ":
        J = np.zeros((basis.n_qubits, basis.n_qubits))
        for (i, j), v in zip(basis.pair_index(), h):
            J[i, j] = J[j, i] = v
        return cls(J)

    def couplings(self, basis: StringBasis | None = None) -> np.ndarray:
        basis = basis or enumerate_basis(self.n_qubits, "z_only_2local")
        return np.array([self.J[i, j] for i, j in basis.pair_index()])


@dataclass(frozen=True)
class LocalizationProblem:
    """What to localize and how.

    The identity is not in any basis, so the target's mean is an
    unreachable energy offset; with ``remove_trace`` (the default) it is
    subtracted before fitting and reported as ``energy_shift``.
    """

    target: Spectrum
    basis: StringBasis
    variant: str = "plain"
    rank: int | None = None
    lam: float = 0.0
    epsilon: float = 1e-8
    max_iterations: int | None = None
    gradient_tolerance: float = 1e-10
    remove_trace: bool = True
    method: str = "auto"

    def __post_init__(self):
        if self.target.n_qubits != self.basis.n_qubits:
            raise ValueError("target and basis qubit counts differ")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == "low_rank":
            if self.rank is None or not 1 <= self.rank <= self.basis.n_qubits:
                raise ValueError("low_rank needs 1 <= rank <= n_qubits")
            if self.basis.flavor != "z_only_2local":
                raise ValueError("low_rank requires the z_only_2local basis")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.method not in ("auto", "dense", "diagonal"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "diagonal" and not self.basis.is_diagonal:
            raise ValueError("diagonal method needs a Z-only basis")

    @property
    def fitted_target(self) -> np.ndarray:
        E = self.target.values
        return E - E.mean() if self.remove_trace else E

    @property
    def energy_shift(self) -> float:
        return float(self.target.values.mean()) if self.remove_trace else 0.0

    @property
    def uses_fast_path(self) -> bool:
        return self.method == "diagonal" or (self.method == "auto" and self.basis.is_diagonal)

    @property
    def n_parameters(self) -> int:
        if self.variant == "low_rank":
            return self.basis.n_qubits * self.rank
        return len(self.basis)

    def iteration_cap(self) -> int:
        return self.max_iterations if self.max_iterations is not None else 10 * len(self.basis)

    def echo(self) -> dict:
        return {
            "n_qubits": self.basis.n_qubits,
            "flavor": self.basis.flavor,
            "variant": self.variant,
            "rank": self.rank,
            "lambda": self.lam,
            "epsilon": self.epsilon,
            "max_iterations": self.iteration_cap(),
            "gradient_tolerance": self.gradient_tolerance,
            "remove_trace": self.remove_trace,
            "method": "diagonal" if self.uses_fast_path else "dense",
        }


@dataclass
class LocalizationResult:
    couplings: np.ndarray
    final_cost: float
    cost_history: list
    gradient_norm: float
    iterations: int
    converged: bool
    elapsed_seconds: float
    message: str = ""
    objective: float | None = None
    sparsity: float | None = None
    factors: np.ndarray | None = None
    energy_shift: float = 0.0
    seed: int | None = None
    config: dict = field(default_factory=dict)
    basis: StringBasis | None = None

    def hamiltonian(self) -> LocalHamiltonian:
        return LocalHamiltonian(self.basis, self.couplings)

    def to_dict(self) -> dict:
        d = {
            "problem": self.config,
            "basis": self.basis.to_dict() if self.basis is not None else None,
            "couplings": np.asarray(self.couplings).tolist(),
            "final_cost": self.final_cost,
            "objective": self.objective,
            "sparsity": self.sparsity,
            "gradient_norm": self.gradient_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "message": self.message,
            "energy_shift": self.energy_shift,
            "seed": self.seed,
            "cost_history": list(map(float, self.cost_history)),
            "wall_seconds": self.elapsed_seconds,
        }
        if self.factors is not None:
            d["factors"] = np.asarray(self.factors).tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LocalizationResult":
        basis = StringBasis.from_dict(d["basis"]) if d.get("basis") else None
        return cls(
            couplings=np.asarray(d["couplings"], dtype=float),
            final_cost=d["final_cost"],
            cost_history=d.get("cost_history", []),
            gradient_norm=d["gradient_norm"],
            iterations=d["iterations"],
            converged=d["converged"],
            elapsed_seconds=d.get("wall_seconds", 0.0),
            message=d.get("message", ""),
            objective=d.get("objective"),
            sparsity=d.get("sparsity"),
            factors=np.asarray(d["factors"]) if d.get("factors") is not None else None,
            energy_shift=d.get("energy_shift", 0.0),
            seed=d.get("seed"),
            config=d.get("problem", {}),
            basis=basis,
        )


def diagonal_spectrum(basis: StringBasis, h) -> np.ndarray:
    """Unsorted diagonal of a Z-only Hamiltonian over all ``2^n`` configurations."""
    _, zs, _ = basis.masks()
    return kernels.diag_energies(zs, np.asarray(h, dtype=float), basis.n_qubits)


def _dense_terms(basis, h, E):
    H = materialize(LocalHamiltonian(basis, h))
    w, V = np.linalg.eigh(H)
    r = w - E
    xs, zs, ph = basis.masks()
    Q = kernels.diag_expectations(V, xs, zs, ph)
    return float(r @ r) / (2 * E.size), Q.T @ r / E.size


def _diagonal_terms(basis, h, E):
    _, zs, _ = basis.masks()
    e = kernels.diag_energies(zs, h, basis.n_qubits)
    order = np.argsort(e, kind="stable")
    r = np.empty_like(e)
    r[order] = e[order] - E
    return float(r @ r) / (2 * E.size), kernels.diag_contract(zs, r, basis.n_qubits) / E.size


def cost_and_gradient(h, problem: LocalizationProblem) -> tuple[float, np.ndarray]:
    """Bare spectral cost and its gradient with respect to the couplings."""
    h = np.asarray(h, dtype=float)
    if h.shape != (len(problem.basis),):
        raise ValueError(f"expected {len(problem.basis)} couplings, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError("couplings must be finite")
    terms = _diagonal_terms if problem.uses_fast_path else _dense_terms
    return terms(problem.basis, h, problem.fitted_target)


def _low_rank_couplings(V, pairs):
    J = V @ V.T
    return np.array([J[i, j] for i, j in pairs])


def _objective(problem: LocalizationProblem):
    """``fg(x) -> (objective, gradient)`` in the optimizer's parameters."""
    lam, eps = problem.lam, problem.epsilon
    if problem.variant == "low_rank":
        n, r = problem.basis.n_qubits, problem.rank
        pairs = problem.basis.pair_index()
        ii = np.array([p[0] for p in pairs], dtype=int)
        jj = np.array([p[1] for p in pairs], dtype=int)

        def fg(x):
            V = x.reshape(n, r)
            h = _low_rank_couplings(V, pairs)
            c, gh = cost_and_gradient(h, problem)
            G = np.zeros((n, n))
            G[ii, jj] = gh
            G[jj, ii] = gh
            return c, (G @ V).ravel()

        return fg

    if problem.variant == "sparse" and lam > 0:

        def fg(x):
            c, g = cost_and_gradient(x, problem)
            soft = np.sqrt(x * x + eps * eps)
            return c + lam * float(np.sum(soft)), g + lam * x / soft

        return fg

    return lambda x: cost_and_gradient(x, problem)


def initial_couplings(problem: LocalizationProblem, rng: np.random.Generator) -> np.ndarray:
    """Gaussian start rescaled so that ``sum h^2 = Tr(H^2) / 2^n`` of the target."""
    target_norm2 = float(np.mean(problem.fitted_target**2))
    if problem.variant == "low_rank":
        n, r = problem.basis.n_qubits, problem.rank
        V = rng.standard_normal((n, r))
        h = _low_rank_couplings(V, problem.basis.pair_index())
        norm2 = float(h @ h)
        # h is quadratic in V
        return (V * (target_norm2 / norm2) ** 0.25).ravel() if norm2 > 0 else V.ravel()
    h = rng.standard_normal(len(problem.basis))
    return h * np.sqrt(target_norm2 / float(h @ h))


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(0 if seed is None else int(seed)))


def localize(problem: LocalizationProblem, init="random_scaled", seed=0) -> LocalizationResult:
    """Minimize the spectral cost (plus the variant's penalty) with BFGS.

    ``init`` is ``"random_scaled"`` or an explicit parameter vector (the
    factor matrix, flattened, for ``low_rank``).
    """
    if isinstance(init, str):
        if init != "random_scaled":
            raise ValueError(f"unknown init {init!r}")
        x0 = initial_couplings(problem, _as_rng(seed))
    else:
        x0 = np.array(init, dtype=float).ravel()
        if x0.size != problem.n_parameters:
            raise ValueError(f"init has {x0.size} entries, expected {problem.n_parameters}")
    fg = _objective(problem)
    t0 = time.perf_counter()
    res = bfgs(fg, x0, gtol=problem.gradient_tolerance, maxiter=problem.iteration_cap())
    elapsed = time.perf_counter() - t0

    factors = None
    if problem.variant == "low_rank":
        factors = res.x.reshape(problem.basis.n_qubits, problem.rank)
        h = _low_rank_couplings(factors, problem.basis.pair_index())
    else:
        h = res.x
    bare, _ = cost_and_gradient(h, problem)
    is_sparse = problem.variant == "sparse"
    return LocalizationResult(
        couplings=h,
        final_cost=bare,
        cost_history=res.history,
        gradient_norm=float(np.max(np.abs(res.grad), initial=0.0)),
        iterations=res.iterations,
        converged=res.converged,
        elapsed_seconds=elapsed,
        message=res.message,
        objective=res.fun,
        sparsity=sparsity(h) if is_sparse else None,
        factors=factors,
        energy_shift=problem.energy_shift,
        seed=None if isinstance(seed, np.random.Generator) else seed,
        config=problem.echo(),
        basis=problem.basis,
    )


def localize_restarts(problem: LocalizationProblem, n_restarts: int = 1, seed: int = 0,
                      stop_below: float | None = None):
    """Run up to ``n_restarts`` random starts; returns ``(best, attempts)``.

    Restart ``r`` draws its start from ``SeedSequence([seed, r])``.  With
    ``stop_below`` the loop ends at the first run whose cost falls below it.
    """
    attempts = []
    for r in range(max(1, n_restarts)):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), r])))
        res = localize(problem, "random_scaled", rng)
        res.seed = int(seed)
        res.config = {**res.config, "restart": r}
        attempts.append(res)
        if stop_below is not None and res.final_cost < stop_below:
            break
    best = min(attempts, key=lambda a: a.objective if a.objective is not None else a.final_cost)
    return best, attempts


def _settings(problem_kw: dict) -> dict:
    allowed = {"max_iterations", "gradient_tolerance", "remove_trace"}
    unknown = set(problem_kw) - allowed
    if unknown:
        raise TypeError(f"unknown settings: {sorted(unknown)}")
    return problem_kw


def localize_diagonal(target: Spectrum, J0=None, seed=0, **settings) -> LocalizationResult:
    """Z-only (Ising) localization without diagonalization.

    ``J0`` is a :class:`CouplingMatrixJ`, an N x N array, or ``None`` for a
    random scaled start.
    """
    basis = enumerate_basis(target.n_qubits, "z_only_2local")
    problem = LocalizationProblem(target, basis, method="diagonal", **_settings(settings))
    if J0 is None:
        return localize(problem, "random_scaled", seed)
    if not isinstance(J0, CouplingMatrixJ):
        J0 = CouplingMatrixJ(J0)
    return localize(problem, J0.couplings(basis), seed)


def localize_low_rank(target: Spectrum, rank: int, seed=0, init=None, **settings) -> LocalizationResult:
    """Ising localization with ``J = offdiag(sum_r v_r v_r^T)``; optimizes the ``v_r``."""
    basis = enumerate_basis(target.n_qubits, "z_only_2local")
    problem = LocalizationProblem(target, basis, variant="low_rank", rank=rank, **_settings(settings))
    return localize(problem, "random_scaled" if init is None else init, seed)


def localize_sparse(target: Spectrum, basis: StringBasis, lam: float, epsilon: float = 1e-8,
                    seed=0, init=None, **settings) -> LocalizationResult:
    """Localization with the smoothed L1 penalty ``lam * sum sqrt(h^2 + epsilon^2)``."""
    problem = LocalizationProblem(target, basis, variant="sparse", lam=lam, epsilon=epsilon,
                                  **_settings(settings))
    return localize(problem, "random_scaled" if init is None else init, seed)


def with_settings(problem: LocalizationProblem, **changes) -> LocalizationProblem:
    return replace(problem, **changes)
