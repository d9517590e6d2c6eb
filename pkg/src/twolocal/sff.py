"""Spectral form factor ``<|Tr exp(itH)|^2>`` of spectra and ensembles.

No unfolding or filtering is applied: the raw trace is used, and curves
carry both the raw values and the values divided by ``4^N``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .spectra import Spectrum

__all__ = ["SffComparison", "SffCurve", "default_times", "plateau", "ramp_onset", "sff", "sff_compare"]

NORMALIZATIONS = ("raw", "by_dimension_squared")


def default_times(n_points: int = 200, t_min: float = 1e-2, t_max: float = 1e4) -> np.ndarray:
    return np.geomspace(t_min, t_max, n_points)


@dataclass(frozen=True)
class SffCurve:
    times: np.ndarray
    values: np.ndarray
    n_realizations: int
    dim: int
    normalization: str = "raw"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if len(self.times) != len(self.values):
            raise ValueError("times and values differ in length")

    @property
    def raw(self) -> np.ndarray:
        return self.values if self.normalization == "raw" else self.values * self.dim**2

    @property
    def normalized(self) -> np.ndarray:
        return self.values / self.dim**2 if self.normalization == "raw" else self.values

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "sff_raw", "sff_normalized"])
            for t, a, b in zip(self.times, self.raw, self.normalized):
                w.writerow([repr(float(t)), repr(float(a)), repr(float(b))])

    def save_metadata(self, path, **extra) -> None:
        info = {"n_realizations": self.n_realizations, "dim": self.dim,
                "t_min": float(self.times[0]), "t_max": float(self.times[-1]),
                "n_times": len(self.times), **self.meta, **extra}
        Path(path).write_text(json.dumps(info, indent=2))


def _energy_matrix(spectra) -> np.ndarray:
    arrays = [np.asarray(s.values if isinstance(s, Spectrum) else s, dtype=float) for s in spectra]
    if not arrays:
        raise ValueError("empty ensemble")
    d = arrays[0].size
    if any(a.size != d for a in arrays):
        raise ValueError("spectra in the ensemble differ in dimension")
    return np.stack(arrays)


def _mean_abs_z2(E: np.ndarray, times: np.ndarray, chunk: int = 64) -> np.ndarray:
    out = np.empty(times.size)
    for lo in range(0, times.size, chunk):
        t = times[lo:lo + chunk]
        z = np.exp(1j * t[:, None, None] * E[None]).sum(axis=2)
        out[lo:lo + chunk] = np.mean(z.real**2 + z.imag**2, axis=1)
    return out


def sff(spectra, times=None, normalization: str = "raw") -> SffCurve:
    """Ensemble-averaged ``|sum_n exp(i t E_n)|^2`` on ``times`` (default log grid)."""
    E = _energy_matrix(spectra)
    times = default_times() if times is None else np.asarray(times, dtype=float)
    vals = _mean_abs_z2(E, times)
    d = E.shape[1]
    # Z(0) = d exactly; avoid rounding in the sum of unit phases
    vals[times == 0] = float(d) ** 2
    if normalization == "by_dimension_squared":
        vals = vals / d**2
    return SffCurve(times, vals, E.shape[0], d, normalization)


def plateau(spectra, t_min: float = 1e5, t_max: float = 1e7, n_points: int = 20000,
            seed: int = 0) -> float:
    """Long-time average of the SFF over uniformly drawn late times.

    Equals the number of pairs ``(n, m)`` with ``E_n = E_m``, i.e. ``2^N``
    for a nondegenerate spectrum, up to sampling noise ``~ n_points^-1/2``.
    """
    E = _energy_matrix(spectra)
    t = np.random.default_rng(seed).uniform(t_min, t_max, n_points)
    return float(np.mean(_mean_abs_z2(E, t)))


def ramp_onset(curve: SffCurve, factor: float = 1.5) -> float | None:
    """First time after the global dip where the curve exceeds ``factor`` times the dip value."""
    v = curve.values
    i = int(np.argmin(v))
    above = np.nonzero(v[i:] > factor * v[i])[0]
    return float(curve.times[i + above[0]]) if above.size else None


@dataclass(frozen=True)
class SffComparison:
    max_log_ratio: float
    reference_onset: float | None
    test_onset: float | None

    @property
    def onset_not_earlier(self) -> bool:
        if self.reference_onset is None or self.test_onset is None:
            return self.test_onset is None
        return self.test_onset >= self.reference_onset


def sff_compare(reference: SffCurve, test: SffCurve, factor: float = 1.5) -> SffComparison:
    if reference.times.shape != test.times.shape or not np.allclose(reference.times, test.times,
                                                                     rtol=1e-12, atol=0):
        raise ValueError("curves are sampled on different time grids")
    ratio = np.abs(np.log(test.normalized / reference.normalized))
    return SffComparison(float(np.max(ratio)), ramp_onset(reference, factor), ramp_onset(test, factor))
