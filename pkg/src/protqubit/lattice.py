"""Dense operators on an N x N lattice of spin-1/2 sites.

Sites are labelled (row, col), 1-based. Tensor products run over sites in
row-major order with (1, 1) as the most significant factor, in the
sigma^z-diagonal basis.
"""

from __future__ import annotations

import enum
import functools
import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

MAX_SPINS = 12
EXACT_TOL = 1e-12
RELATION_TOL = 1e-10
BOND_CONVENTIONS = ("pair", "square")


class Axis(str, enum.Enum):
    X = "X"
    Y = "Y"
    Z = "Z"

    @classmethod
    def parse(cls, value: "Axis | str") -> "Axis":
        if isinstance(value, Axis):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValueError(f"unknown axis {value!r}; expected one of X, Y, Z") from None


PAULI = {
    Axis.X: np.array([[0, 1], [1, 0]], dtype=complex),
    Axis.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    Axis.Z: np.array([[1, 0], [0, -1]], dtype=complex),
}
_I2 = np.eye(2, dtype=complex)

# sigma^a sigma^b = phase * sigma^c
_PAULI_PRODUCT = {
    (Axis.X, Axis.Y): (1j, Axis.Z),
    (Axis.Y, Axis.Z): (1j, Axis.X),
    (Axis.Z, Axis.X): (1j, Axis.Y),
    (Axis.Y, Axis.X): (-1j, Axis.Z),
    (Axis.Z, Axis.Y): (-1j, Axis.X),
    (Axis.X, Axis.Z): (-1j, Axis.Y),
}


@dataclass(frozen=True)
class LatticeSpec:
    """Lattice side ``n`` and the row (x) / column (y) couplings, in units of J.

    ``bonds`` fixes how a coupling J multiplies a line: ``"pair"`` counts each
    pair of spins on the line once, -J sum_{a<b} s_a s_b, which puts the 2x2
    gap at 2(sqrt 2 - 1) J; ``"square"`` is the literal -J (sum_a s_a)^2, equal
    to twice the pair form plus a constant. Eigenvectors are the same.
    """

    n: int
    j_x: float = 1.0
    j_y: float = 1.0
    bonds: str = "pair"

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"lattice side n must be an integer >= 2, got {self.n!r}")
        if self.n * self.n > MAX_SPINS:
            raise ValueError(
                f"n={self.n} gives {self.n * self.n} spins; dense matrices are capped at {MAX_SPINS}"
            )
        if not (self.j_x > 0 and self.j_y > 0):
            raise ValueError(f"couplings must be positive, got j_x={self.j_x}, j_y={self.j_y}")
        if self.bonds not in BOND_CONVENTIONS:
            raise ValueError(f"bonds must be one of {BOND_CONVENTIONS}, got {self.bonds!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "j_x", float(self.j_x))
        object.__setattr__(self, "j_y", float(self.j_y))

    @property
    def num_sites(self) -> int:
        return self.n * self.n

    @property
    def dim(self) -> int:
        return 2 ** self.num_sites

    @property
    def energy_unit(self) -> float:
        """J used to normalize reported energies (equal to j_x when j_x == j_y)."""
        return 0.5 * (self.j_x + self.j_y)

    def sites(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(1, self.n + 1) for j in range(1, self.n + 1)]

    def site_index(self, site: tuple[int, int]) -> int:
        i, j = site
        if not (1 <= i <= self.n and 1 <= j <= self.n):
            raise ValueError(f"site {site} outside the {self.n}x{self.n} lattice")
        return (i - 1) * self.n + (j - 1)


_TOKEN = re.compile(r"^([XYZ])(?:(\d)(\d)|\((\d+),(\d+)\))$")


@dataclass(frozen=True)
class PauliString:
    """Product of single-site Pauli factors; identity on sites not listed."""

    factors: tuple[tuple[tuple[int, int], Axis], ...] = ()

    def __post_init__(self) -> None:
        seen = set()
        clean = []
        for site, axis in self.factors:
            site = (int(site[0]), int(site[1]))
            if site in seen:
                raise ValueError(f"duplicate site {site} in Pauli string")
            if site[0] < 1 or site[1] < 1:
                raise ValueError(f"sites are 1-based, got {site}")
            seen.add(site)
            clean.append((site, Axis.parse(axis)))
        object.__setattr__(self, "factors", tuple(sorted(clean)))

    @classmethod
    def from_mapping(cls, mapping: Mapping[tuple[int, int], Axis | str]) -> "PauliString":
        return cls(tuple(mapping.items()))

    @classmethod
    def parse(cls, text: str) -> "PauliString":
        """Parse ``"Y11 Y12"`` or ``"X(1,1) X(2,1)"``; ``"I"`` or ``""`` is the identity."""
        tokens = text.replace(",", " ").split() if "(" not in text else text.split()
        if not tokens or tokens == ["I"]:
            return cls()
        factors = []
        for tok in tokens:
            m = _TOKEN.match(tok.strip().upper())
            if m is None:
                raise ValueError(f"cannot parse Pauli factor {tok!r}")
            axis, a, b, c, d = m.groups()
            site = (int(a), int(b)) if a is not None else (int(c), int(d))
            factors.append((site, Axis(axis)))
        return cls(tuple(factors))

    @classmethod
    def row(cls, i: int, n: int, axis: Axis | str = Axis.Y) -> "PauliString":
        return cls(tuple(((i, j), Axis.parse(axis)) for j in range(1, n + 1)))

    @classmethod
    def column(cls, j: int, n: int, axis: Axis | str = Axis.X) -> "PauliString":
        return cls(tuple(((i, j), Axis.parse(axis)) for i in range(1, n + 1)))

    @property
    def weight(self) -> int:
        return len(self.factors)

    def as_dict(self) -> dict[tuple[int, int], Axis]:
        return dict(self.factors)

    def __mul__(self, other: "PauliString") -> tuple[complex, "PauliString"]:
        """Operator product, returned as (phase, string)."""
        out = self.as_dict()
        phase = 1 + 0j
        for site, b in other.factors:
            a = out.pop(site, None)
            if a is None:
                out[site] = b
            elif a != b:
                p, c = _PAULI_PRODUCT[(a, b)]
                phase *= p
                out[site] = c
        return phase, PauliString.from_mapping(out)

    def __str__(self) -> str:
        if not self.factors:
            return "I"
        return " ".join(f"{a.value}{i}{j}" if max(i, j) < 10 else f"{a.value}({i},{j})"
                        for (i, j), a in self.factors)


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """Complex dim x dim matrix with a checked hermiticity flag."""

    matrix: np.ndarray
    hermitian: bool = False
    label: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got shape {m.shape}")
        if self.hermitian:
            dev = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
            if dev >= EXACT_TOL:
                raise ValueError(f"hermitian flag set but max|A - A^dagger| = {dev:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def __matmul__(self, other):
        if isinstance(other, DenseOperator):
            return self.matrix @ other.matrix
        return self.matrix @ other

    def __add__(self, other: "DenseOperator") -> "DenseOperator":
        return DenseOperator(self.matrix + other.matrix, self.hermitian and other.hermitian)

    def scaled(self, c: float) -> "DenseOperator":
        return DenseOperator(self.matrix * c, self.hermitian and np.isreal(c))


def _kron_sites(lattice: LatticeSpec, local: Mapping[int, np.ndarray]) -> np.ndarray:
    mats = [local.get(k, _I2) for k in range(lattice.num_sites)]
    return functools.reduce(np.kron, mats)


def build_pauli_string(lattice: LatticeSpec, s: PauliString) -> DenseOperator:
    local = {}
    for site, axis in s.factors:
        k = lattice.site_index(site)
        local[k] = PAULI[axis]
    return DenseOperator(_kron_sites(lattice, local), hermitian=True, label=str(s))


@functools.lru_cache(maxsize=32)
def _pair_sum(lattice: LatticeSpec, axis: Axis, along_rows: bool) -> tuple[np.ndarray, ...]:
    # one matrix per line: sum over pairs a<b on that line of sigma_a sigma_b
    n = lattice.n
    out = []
    for line in range(1, n + 1):
        sites = [(line, k) if along_rows else (k, line) for k in range(1, n + 1)]
        acc = np.zeros((lattice.dim, lattice.dim), dtype=complex)
        for a in range(n):
            for b in range(a + 1, n):
                pair = PauliString(((sites[a], axis), (sites[b], axis)))
                acc += build_pauli_string(lattice, pair).matrix
        acc.setflags(write=False)
        out.append(acc)
    return tuple(out)


def build_protection_hamiltonian(
    lattice: LatticeSpec,
    row_couplings: Sequence[float] | None = None,
    col_couplings: Sequence[float] | None = None,
) -> DenseOperator:
    """-sum_i Jx_i sum_{j<j'} sx_ij sx_ij' - sum_j Jy_j sum_{i<i'} sy_ij sy_i'j.

    With ``lattice.bonds == "square"`` each line enters as its full square,
    -Jx_i (sum_j sx_ij)^2, constant shift included.
    ``row_couplings`` / ``col_couplings`` override the uniform j_x / j_y per
    row / column (coupling fluctuations); they keep every P_i and Q_j a symmetry.
    """
    n = lattice.n
    jr = np.full(n, lattice.j_x) if row_couplings is None else np.asarray(row_couplings, float)
    jc = np.full(n, lattice.j_y) if col_couplings is None else np.asarray(col_couplings, float)
    if jr.shape != (n,) or jc.shape != (n,):
        raise ValueError(f"need {n} row and {n} column couplings")
    rows = _pair_sum(lattice, Axis.X, True)
    cols = _pair_sum(lattice, Axis.Y, False)
    h = np.zeros((lattice.dim, lattice.dim), dtype=complex)
    for k in range(n):
        h -= jr[k] * rows[k] + jc[k] * cols[k]
    if lattice.bonds == "square":
        # (sum_k s_k)^2 = n * 1 + 2 sum_{a<b} s_a s_b
        h = 2.0 * h - n * (jr.sum() + jc.sum()) * np.eye(lattice.dim)
    return DenseOperator(h, hermitian=True, label="H0")


class SymmetryOperators(NamedTuple):
    """Row products P_i of sigma^y and column products Q_j of sigma^x."""

    p: tuple[DenseOperator, ...]
    q: tuple[DenseOperator, ...]

    def all(self) -> tuple[DenseOperator, ...]:
        return self.p + self.q


@functools.lru_cache(maxsize=8)
def build_symmetry_operators(lattice: LatticeSpec) -> SymmetryOperators:
    n = lattice.n
    p = tuple(build_pauli_string(lattice, PauliString.row(i, n, Axis.Y)) for i in range(1, n + 1))
    q = tuple(build_pauli_string(lattice, PauliString.column(j, n, Axis.X)) for j in range(1, n + 1))
    return SymmetryOperators(p, q)


@functools.lru_cache(maxsize=16)
def build_collective_field(lattice: LatticeSpec, axis: Axis | str) -> DenseOperator:
    axis = Axis.parse(axis)
    acc = np.zeros((lattice.dim, lattice.dim), dtype=complex)
    for site in lattice.sites():
        acc += build_pauli_string(lattice, PauliString(((site, axis),))).matrix
    return DenseOperator(acc, hermitian=True, label=f"S{axis.value.lower()}")


def build_local_field(lattice: LatticeSpec, directions: np.ndarray) -> DenseOperator:
    """sum over sites of d_s . sigma_s for per-site vectors ``directions`` (n*n, 3)."""
    directions = np.asarray(directions, float)
    if directions.shape != (lattice.num_sites, 3):
        raise ValueError(f"directions must have shape ({lattice.num_sites}, 3)")
    acc = np.zeros((lattice.dim, lattice.dim), dtype=complex)
    for k, site in enumerate(lattice.sites()):
        local = sum(directions[k, a] * PAULI[ax] for a, ax in enumerate(Axis))
        acc += _kron_sites(lattice, {k: local})
    return DenseOperator(acc, hermitian=True, label="local field")


class Relation(str, enum.Enum):
    COMMUTE = "commute"
    ANTICOMMUTE = "anticommute"
    NEITHER = "neither"


class AmbiguousRelationError(ValueError):
    """Both [A, B] and {A, B} vanish, which only happens for a zero operand."""


def algebra_relation(a, b, tol: float = RELATION_TOL) -> Relation:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    ab = a @ b
    ba = b @ a
    comm = np.max(np.abs(ab - ba))
    anti = np.max(np.abs(ab + ba))
    if comm < tol and anti < tol:
        raise AmbiguousRelationError("operator product vanishes; relation is ambiguous")
    if comm < tol:
        return Relation.COMMUTE
    if anti < tol:
        return Relation.ANTICOMMUTE
    return Relation.NEITHER


def iter_strings(n: int, max_weight: int, axes: Iterable[Axis] = tuple(Axis)):
    """Every Pauli string on the n x n lattice with weight <= max_weight."""
    sites = [(i, j) for i in range(1, n + 1) for j in range(1, n + 1)]
    axes = tuple(axes)
    for w in range(max_weight + 1):
        for chosen in itertools.combinations(sites, w):
            for labels in itertools.product(axes, repeat=w):
                yield PauliString(tuple(zip(chosen, labels)))
