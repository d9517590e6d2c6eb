"""Target spectra: dense GOE sampling, the beta=1 Hermite tridiagonal model,
and small spectrum utilities.

Normalization: ``H = (A + A^T) / sqrt(2)`` with standard normal ``A``, so
off-diagonal entries have variance 1 and diagonal entries variance 2.  The
tridiagonal model uses the matching scale (diagonal ``N(0, 2)``, sub-diagonal
``chi_k``), which makes the two generators interchangeable.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

__all__ = [
    "DENSE_CAP",
    "EnsembleConfig",
    "GENERATORS",
    "Spectrum",
    "TRIDIAGONAL_CAP",
    "sample_ensemble",
    "sample_goe_dense",
    "sample_spectrum",
    "sample_spectrum_tridiagonal",
    "spectrum_of",
    "stream_rng",
]

DENSE_CAP = 12
TRIDIAGONAL_CAP = 20
GENERATORS = ("goe_dense", "hermite_tridiagonal")


def stream_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Independent PCG64 stream for realization ``index`` (stream id ``seed ^ index``)."""
    return np.random.Generator(np.random.PCG64(int(seed) ^ int(index)))


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues of a ``2^n``-dimensional Hamiltonian."""

    n_qubits: int
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (1 << self.n_qubits,):
            raise ValueError(f"expected {1 << self.n_qubits} eigenvalues, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("spectrum contains non-finite values")
        if np.any(np.diff(v) < 0):
            raise ValueError("spectrum must be sorted ascending")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, values) -> "Spectrum":
        """Sort arbitrary eigenvalues and infer ``n_qubits`` from the length."""
        v = np.sort(np.asarray(values, dtype=float))
        n = int(round(np.log2(len(v)))) if len(v) else -1
        if n < 0 or (1 << n) != len(v):
            raise ValueError(f"length {len(v)} is not a power of two")
        return cls(n, v)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def __len__(self) -> int:
        return self.dim

    def scaled(self, c: float) -> "Spectrum":
        if c < 0:
            raise ValueError("scale must be non-negative to keep ascending order")
        return Spectrum(self.n_qubits, c * self.values)

    def shifted(self, c: float) -> "Spectrum":
        return Spectrum(self.n_qubits, self.values + c)

    def traceless(self) -> "Spectrum":
        return self.shifted(-self.values.mean())

    def mean_square(self) -> float:
        """``Tr(H^2) / 2^n``."""
        return float(np.mean(self.values**2))

    def to_dict(self, **meta) -> dict:
        return {"n_qubits": self.n_qubits, **meta, "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Spectrum":
        return cls(int(d["n_qubits"]), np.asarray(d["values"], dtype=float))

    def save_json(self, path, **meta):
        Path(path).write_text(json.dumps(self.to_dict(**meta)))

    @classmethod
    def load_json(cls, path) -> "Spectrum":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "energy"])
            for i, e in enumerate(self.values):
                w.writerow([i, repr(float(e))])


@dataclass(frozen=True)
class EnsembleConfig:
    n_qubits: int
    n_realizations: int = 1
    seed: int = 0
    generator: str = "goe_dense"
    scale: float = 1.0

    def __post_init__(self):
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}")
        cap = DENSE_CAP if self.generator == "goe_dense" else TRIDIAGONAL_CAP
        if not 1 <= self.n_qubits <= cap:
            raise ValueError(f"n_qubits={self.n_qubits} exceeds the {self.generator} cap of {cap}")


def _rng(seed, index):
    if isinstance(seed, np.random.Generator):
        return seed
    return stream_rng(seed, index)


def sample_goe_dense(n_qubits: int, seed=0, index: int = 0, scale: float = 1.0) -> np.ndarray:
    """Dense GOE matrix of size ``2^n``; ``seed`` may also be a Generator."""
    if not 1 <= n_qubits <= DENSE_CAP:
        raise ValueError(f"n_qubits={n_qubits} exceeds dense GOE cap {DENSE_CAP}")
    rng = _rng(seed, index)
    d = 1 << n_qubits
    A = rng.standard_normal((d, d))
    H = (A + A.T) / np.sqrt(2.0)
    return scale * H


def sample_spectrum_tridiagonal(n_qubits: int, seed=0, index: int = 0, scale: float = 1.0) -> Spectrum:
    """Spectrum of the beta=1 Hermite tridiagonal model at the dense-GOE scale."""
    if not 1 <= n_qubits <= TRIDIAGONAL_CAP:
        raise ValueError(f"n_qubits={n_qubits} exceeds tridiagonal cap {TRIDIAGONAL_CAP}")
    rng = _rng(seed, index)
    d = 1 << n_qubits
    diag = np.sqrt(2.0) * rng.standard_normal(d)
    dof = np.arange(d - 1, 0, -1)
    off = np.sqrt(rng.chisquare(dof))
    w = eigvalsh_tridiagonal(diag, off) if d > 1 else diag
    return Spectrum(n_qubits, scale * np.sort(w))


def spectrum_of(H: np.ndarray, check_residual: bool = False, tol: float = 1e-10) -> Spectrum:
    """Ascending eigenvalues of a Hermitian matrix.

    With ``check_residual`` the eigenvectors are also computed and
    ``||HV - V diag(w)|| <= 1e-9 ||H||`` is asserted.
    """
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    scale = max(np.abs(H).max(), 1.0)
    if np.abs(H - H.conj().T).max() > tol * scale:
        raise ValueError("matrix is not Hermitian")
    if check_residual:
        w, V = np.linalg.eigh(H)
        res = np.linalg.norm(H @ V - V * w)
        if res > 1e-9 * max(np.linalg.norm(H), 1e-300):
            raise RuntimeError(f"eigensolver residual {res:.3e} exceeds tolerance")
    else:
        w = np.linalg.eigvalsh(H)
    return Spectrum.from_values(w)


def sample_spectrum(n_qubits: int, seed=0, index: int = 0, generator: str = "goe_dense",
                    scale: float = 1.0) -> Spectrum:
    if generator == "goe_dense":
        return spectrum_of(sample_goe_dense(n_qubits, seed, index, scale))
    if generator == "hermite_tridiagonal":
        return sample_spectrum_tridiagonal(n_qubits, seed, index, scale)
    raise ValueError(f"unknown generator {generator!r}")


def sample_ensemble(config: EnsembleConfig) -> list[Spectrum]:
    """One spectrum per realization, realization ``r`` drawn from stream ``seed ^ r``."""
    return [
        sample_spectrum(config.n_qubits, config.seed, r, config.generator, config.scale)
        for r in range(config.n_realizations)
    ]
