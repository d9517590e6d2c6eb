"""Pauli strings, local-subspace bases and dense materialization.

A string on ``n`` qubits is stored as two bitmasks plus a power of ``i``.
Site ``k`` (0-indexed, leftmost tensor factor first) lives on bit
``n - 1 - k`` so that the dense matrix agrees with
``np.kron(sigma_0, np.kron(sigma_1, ...))``.  A site carries X when only its
x-bit is set, Z when only its z-bit is set and Y when both are set.  With
``phase_pow = 0`` the string is the Hermitian tensor product of Pauli
matrices, i.e. ``i**n_y * X^x Z^z``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
import re

import numpy as np

from . import kernels

__all__ = [
    "FLAVORS",
    "MAX_DENSE_QUBITS",
    "LocalHamiltonian",
    "PauliString",
    "StringBasis",
    "basis_size",
    "enumerate_basis",
    "materialize",
    "pair_trace",
    "project_onto_subspace",
    "string_product",
]

FLAVORS = (
    "complex_2local",
    "real_2local",
    "z_only_2local",
    "one_local_z",
    "one_local_real",
    "custom",
)

# Largest n_qubits for which a 2^n x 2^n matrix is built.
MAX_DENSE_QUBITS = 13
# Enumeration caps; diagonal flavors never need a dense matrix.
MAX_GENERAL_QUBITS = 16
MAX_DIAGONAL_QUBITS = 24

_AXES = "XYZ"
_AXIS_BITS = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_LABEL_RE = re.compile(r"^([XYZ])(\d+)$")


def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True, order=True)
class PauliString:
    """Tensor product of single-qubit Paulis times ``i**phase_pow``."""

    n_qubits: int
    x_mask: int
    z_mask: int
    phase_pow: int = 0

    def __post_init__(self):
        if self.n_qubits < 0:
            raise ValueError("n_qubits must be non-negative")
        limit = 1 << self.n_qubits
        if not (0 <= self.x_mask < limit and 0 <= self.z_mask < limit):
            raise ValueError(
                f"masks ({self.x_mask:#x}, {self.z_mask:#x}) do not fit in {self.n_qubits} qubits"
            )
        object.__setattr__(self, "phase_pow", self.phase_pow % 4)

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        return cls(n_qubits, 0, 0)

    @classmethod
    def from_sites(cls, n_qubits: int, factors: dict[int, str]) -> "PauliString":
        """Build a Hermitian string from ``{site: axis}`` with 0-indexed sites."""
        x = z = 0
        for site, axis in factors.items():
            if not 0 <= site < n_qubits:
                raise ValueError(f"site {site} out of range for {n_qubits} qubits")
            bx, bz = _AXIS_BITS[axis]
            bit = 1 << (n_qubits - 1 - site)
            x |= bit * bx
            z |= bit * bz
        return cls(n_qubits, x, z)

    @classmethod
    def from_label(cls, label: str, n_qubits: int) -> "PauliString":
        """Parse the text format, e.g. ``"X1*Z3"`` (1-indexed sites, ``"I"`` for identity)."""
        label = label.strip()
        if label in ("", "I"):
            return cls.identity(n_qubits)
        factors = {}
        for part in label.split("*"):
            m = _LABEL_RE.match(part.strip())
            if m is None:
                raise ValueError(f"cannot parse Pauli factor {part!r}")
            site = int(m.group(2)) - 1
            if site in factors:
                raise ValueError(f"site {site + 1} repeated in {label!r}")
            factors[site] = m.group(1)
        return cls.from_sites(n_qubits, factors)

    @property
    def support(self) -> int:
        return self.x_mask | self.z_mask

    @property
    def weight(self) -> int:
        return _popcount(self.support)

    @property
    def y_count(self) -> int:
        return _popcount(self.x_mask & self.z_mask)

    @property
    def is_diagonal(self) -> bool:
        return self.x_mask == 0

    @property
    def is_hermitian(self) -> bool:
        return self.phase_pow % 2 == 0

    @property
    def matrix_phase(self) -> int:
        """Power of ``i`` multiplying ``X^x Z^z`` in the dense matrix."""
        return (self.phase_pow + self.y_count) % 4

    def axis(self, site: int) -> str:
        bit = 1 << (self.n_qubits - 1 - site)
        bx, bz = bool(self.x_mask & bit), bool(self.z_mask & bit)
        return {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}[(bx, bz)]

    def sites(self) -> list[tuple[int, str]]:
        return [(s, self.axis(s)) for s in range(self.n_qubits) if self.axis(s) != "I"]

    @property
    def label(self) -> str:
        body = "*".join(f"{a}{s + 1}" for s, a in self.sites()) or "I"
        prefix = {0: "", 1: "i*", 2: "-", 3: "-i*"}[self.phase_pow]
        return prefix + body

    def hermitian_part(self) -> "PauliString":
        """The same string with the phase dropped."""
        return PauliString(self.n_qubits, self.x_mask, self.z_mask)

    def matrix(self) -> np.ndarray:
        """Dense matrix by explicit Kronecker products."""
        mats = {
            "I": np.eye(2, dtype=complex),
            "X": np.array([[0, 1], [1, 0]], dtype=complex),
            "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
            "Z": np.array([[1, 0], [0, -1]], dtype=complex),
        }
        out = np.ones((1, 1), dtype=complex)
        for s in range(self.n_qubits):
            out = np.kron(out, mats[self.axis(s)])
        return (1j ** self.phase_pow) * out

    def __mul__(self, other: "PauliString") -> "PauliString":
        return string_product(self, other)

    def __str__(self) -> str:
        return self.label


def string_product(a: PauliString, b: PauliString) -> PauliString:
    """Product ``a @ b`` as another phased string."""
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"qubit counts differ: {a.n_qubits} vs {b.n_qubits}")
    x = a.x_mask ^ b.x_mask
    z = a.z_mask ^ b.z_mask
    # i^{x1 z1} X^x1 Z^z1 i^{x2 z2} X^x2 Z^z2 = i^{...} (-1)^{z1 x2} X^x Z^z
    phase = (
        a.phase_pow
        + b.phase_pow
        + a.y_count
        + b.y_count
        + 2 * _popcount(a.z_mask & b.x_mask)
        - _popcount(x & z)
    )
    return PauliString(a.n_qubits, x, z, phase)


def pair_trace(a: PauliString, b: PauliString) -> float:
    """``Tr(a b)`` for Hermitian strings: ``2**n`` when equal, else 0."""
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"qubit counts differ: {a.n_qubits} vs {b.n_qubits}")
    p = string_product(a, b)
    if p.x_mask or p.z_mask:
        return 0.0
    return float((1 << a.n_qubits) * (1j ** p.phase_pow).real)


def basis_size(n_qubits: int, flavor: str) -> int:
    """Closed-form string count of a flavor."""
    n = n_qubits
    pairs = n * (n - 1) // 2
    return {
        "complex_2local": 3 * n + 9 * pairs,
        "real_2local": 2 * n + 5 * pairs,
        "z_only_2local": pairs,
        "one_local_z": n,
        "one_local_real": 2 * n,
    }[flavor]


@dataclass(frozen=True)
class StringBasis:
    """Ordered set of non-identity Pauli strings spanning a local subspace."""

    n_qubits: int
    flavor: str
    strings: tuple[PauliString, ...]
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise ValueError(f"unsupported flavor {self.flavor!r}")
        idx = {}
        for k, s in enumerate(self.strings):
            if s.n_qubits != self.n_qubits:
                raise ValueError(f"string {s} has {s.n_qubits} qubits, basis has {self.n_qubits}")
            if s.weight == 0:
                raise ValueError("identity string is not allowed in a basis")
            if s.phase_pow != 0:
                raise ValueError(f"basis strings must be Hermitian with phase 0, got {s.label}")
            if s in idx:
                raise ValueError(f"duplicate string {s}")
            idx[s] = k
        object.__setattr__(self, "index", idx)

    @classmethod
    def custom(cls, n_qubits: int, strings) -> "StringBasis":
        """Basis from PauliStrings or text labels, kept in the given order."""
        parsed = tuple(
            s if isinstance(s, PauliString) else PauliString.from_label(s, n_qubits) for s in strings
        )
        return cls(n_qubits, "custom", parsed)

    def __len__(self) -> int:
        return len(self.strings)

    def __iter__(self):
        return iter(self.strings)

    def __getitem__(self, k):
        return self.strings[k]

    def position(self, s: PauliString) -> int:
        return self.index[s.hermitian_part()]

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    @property
    def is_diagonal(self) -> bool:
        return all(s.is_diagonal for s in self.strings)

    @property
    def is_real(self) -> bool:
        """All strings have an even number of Y factors (real symmetric matrices)."""
        return all(s.y_count % 2 == 0 for s in self.strings)

    @property
    def labels(self) -> list[str]:
        return [s.label for s in self.strings]

    def masks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(x_masks, z_masks, matrix_phases)`` as int64 arrays for the kernels."""
        xs = np.array([s.x_mask for s in self.strings], dtype=np.int64)
        zs = np.array([s.z_mask for s in self.strings], dtype=np.int64)
        ph = np.array([s.matrix_phase for s in self.strings], dtype=np.int64)
        return xs, zs, ph

    def pair_index(self) -> list[tuple[int, int]]:
        """Site pairs ``(i, j)`` of a ZZ-only basis, in basis order."""
        out = []
        for s in self.strings:
            if not s.is_diagonal or s.weight != 2:
                raise ValueError(f"{s} is not a ZZ pair string")
            i, j = (site for site, _ in s.sites())
            out.append((i, j))
        return out

    def to_dict(self) -> dict:
        return {"n_qubits": self.n_qubits, "flavor": self.flavor, "strings": self.labels}

    @classmethod
    def from_dict(cls, d: dict) -> "StringBasis":
        if d["flavor"] == "custom":
            return cls.custom(d["n_qubits"], d["strings"])
        basis = enumerate_basis(d["n_qubits"], d["flavor"])
        if "strings" in d and list(d["strings"]) != basis.labels:
            raise ValueError("serialized strings do not match the canonical order")
        return basis


def _one_local(n: int, axes: str) -> list[PauliString]:
    return [PauliString.from_sites(n, {i: a}) for i in range(n) for a in axes]


def _two_local(n: int, axis_pairs) -> list[PauliString]:
    return [
        PauliString.from_sites(n, {i: a, j: b})
        for i, j in combinations(range(n), 2)
        for a, b in axis_pairs
    ]


def enumerate_basis(n_qubits: int, flavor: str) -> StringBasis:
    """Canonically ordered basis of a named flavor.

    Weight-1 strings come first ordered by (site, axis) with X < Y < Z, then
    weight-2 strings ordered by (site_i, site_j, axis_i, axis_j).
    """
    if flavor not in FLAVORS or flavor == "custom":
        raise ValueError(f"unsupported flavor {flavor!r}; use StringBasis.custom for custom bases")
    cap = MAX_DIAGONAL_QUBITS if flavor in ("z_only_2local", "one_local_z") else MAX_GENERAL_QUBITS
    if not 1 <= n_qubits <= cap:
        raise ValueError(f"n_qubits={n_qubits} outside [1, {cap}] for flavor {flavor}")
    all_pairs = [(a, b) for a in _AXES for b in _AXES]
    if flavor == "complex_2local":
        strings = _one_local(n_qubits, _AXES) + _two_local(n_qubits, all_pairs)
    elif flavor == "real_2local":
        even = [(a, b) for a, b in all_pairs if (a == "Y") + (b == "Y") != 1]
        strings = _one_local(n_qubits, "XZ") + _two_local(n_qubits, even)
    elif flavor == "z_only_2local":
        strings = _two_local(n_qubits, [("Z", "Z")])
    elif flavor == "one_local_z":
        strings = _one_local(n_qubits, "Z")
    else:
        strings = _one_local(n_qubits, "XZ")
    return StringBasis(n_qubits, flavor, tuple(strings))


@dataclass(frozen=True)
class LocalHamiltonian:
    """Real couplings on a string basis, ``H' = sum_k h_k tau_k``."""

    basis: StringBasis
    couplings: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.couplings, dtype=float)
        if h.shape != (len(self.basis),):
            raise ValueError(f"expected {len(self.basis)} couplings, got shape {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ValueError("couplings must be finite")
        h = h.copy()
        h.setflags(write=False)
        object.__setattr__(self, "couplings", h)

    @property
    def n_qubits(self) -> int:
        return self.basis.n_qubits

    def matrix(self) -> np.ndarray:
        return materialize(self)

    def terms(self) -> dict[str, float]:
        return dict(zip(self.basis.labels, self.couplings.tolist()))


def materialize(h: LocalHamiltonian) -> np.ndarray:
    """Dense ``2^n x 2^n`` matrix of a LocalHamiltonian.

    Real dtype when every string has an even number of Y factors, complex
    otherwise.
    """
    basis = h.basis
    if basis.n_qubits > MAX_DENSE_QUBITS:
        raise ValueError(f"dense matrix for {basis.n_qubits} qubits exceeds cap {MAX_DENSE_QUBITS}")
    xs, zs, ph = basis.masks()
    return kernels.materialize(xs, zs, ph, h.couplings, basis.n_qubits, basis.is_real)


def project_onto_subspace(H: np.ndarray, basis: StringBasis) -> np.ndarray:
    """Couplings ``h_k = Tr(tau_k H) / 2^n`` of the orthogonal projection."""
    H = np.asarray(H)
    if H.shape != (basis.dim, basis.dim):
        raise ValueError(f"matrix shape {H.shape} does not match {basis.n_qubits} qubits")
    xs, zs, ph = basis.masks()
    return kernels.project(H, xs, zs, ph)
