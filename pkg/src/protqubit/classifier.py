"""Symmetry-sector classification of Pauli strings, without matrices.

A single-site factor sigma^a at (i, j) anticommutes with the row symmetry
P_i (a product of sigma^y) when a is X or Z, and with the column symmetry
Q_j (a product of sigma^x) when a is Y or Z. The signs multiply, so a
product of factors flips p_i (q_j) iff it holds an odd number of
row-flipping (column-flipping) factors on that row (column). Only strings
that preserve or flip *all* p_i, and likewise all q_j, act inside the
ground doublet; the pair of actions fixes the logical operator.

H0 is also real in the computational basis, so complex conjugation K is
an antiunitary symmetry. A string with an odd number of sigma^y factors is
odd under K. For even n, K fixes each logical state, so a K-even string
has no tau_y weight and a K-odd one has only tau_y weight. For odd n, K
swaps the two sectors, so K-odd strings keep only tau_z and K-even ones
lose it. The table class then tells where a block may live, and this
conjugation rule tells whether it is forced to vanish.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .lattice import Axis, LatticeSpec, PauliString, build_pauli_string
from .spectrum import TAU, LogicalBasis

ORACLE_TOL = 1e-10


class Action(str, enum.Enum):
    PRESERVE_ALL = "PreserveAll"
    FLIP_ALL = "FlipAll"
    MIXED = "Mixed"


class LogicalClass(str, enum.Enum):
    IDENTITY = "Identity"
    TAU_X = "TauX"
    TAU_Y = "TauY"
    TAU_Z = "TauZ"
    NULL = "Null"

    @property
    def matrix(self) -> np.ndarray:
        return {
            LogicalClass.IDENTITY: TAU["1"],
            LogicalClass.TAU_X: TAU["x"],
            LogicalClass.TAU_Y: TAU["y"],
            LogicalClass.TAU_Z: TAU["z"],
            LogicalClass.NULL: np.zeros((2, 2), complex),
        }[self]


# (row action, column action) -> logical operator
TABLE = {
    (Action.PRESERVE_ALL, Action.PRESERVE_ALL): LogicalClass.IDENTITY,
    (Action.PRESERVE_ALL, Action.FLIP_ALL): LogicalClass.TAU_Z,
    (Action.FLIP_ALL, Action.PRESERVE_ALL): LogicalClass.TAU_X,
    (Action.FLIP_ALL, Action.FLIP_ALL): LogicalClass.TAU_Y,
}

_FLIPS_ROW = {Axis.X, Axis.Z}
_FLIPS_COL = {Axis.Y, Axis.Z}


def _action(flips) -> Action:
    if not any(flips):
        return Action.PRESERVE_ALL
    if all(flips):
        return Action.FLIP_ALL
    return Action.MIXED


def class_of(row_action: Action, col_action: Action) -> LogicalClass:
    return TABLE.get((row_action, col_action), LogicalClass.NULL)


def conjugation_allows(cls: LogicalClass, k_odd: bool, n: int) -> bool:
    """Whether a Hermitian operator of conjugation parity ``k_odd`` may carry ``cls`` weight."""
    if cls is LogicalClass.NULL:
        return True
    transpose = -1 if cls is LogicalClass.TAU_Y else 1
    swap = -1 if n % 2 and cls in (LogicalClass.TAU_Y, LogicalClass.TAU_Z) else 1
    return (-1 if k_odd else 1) * swap == transpose


@dataclass(frozen=True)
class ClassifierVerdict:
    row_action: Action
    col_action: Action
    logical_class: LogicalClass
    row_flips: tuple[bool, ...]
    col_flips: tuple[bool, ...]
    conjugation_allowed: bool = True

    @property
    def effective_class(self) -> LogicalClass:
        """The table class, or Null when the conjugation rule forces the block to zero."""
        return self.logical_class if self.conjugation_allowed else LogicalClass.NULL

    def as_dict(self) -> dict:
        return {
            "row_action": self.row_action.value,
            "col_action": self.col_action.value,
            "logical_class": self.logical_class.value,
            "conjugation_allowed": self.conjugation_allowed,
            "effective_class": self.effective_class.value,
            "row_flips": [int(b) for b in self.row_flips],
            "col_flips": [int(b) for b in self.col_flips],
        }


def classify_string(s: PauliString, n: int) -> ClassifierVerdict:
    rows = [0] * n
    cols = [0] * n
    for (i, j), axis in s.factors:
        if not (1 <= i <= n and 1 <= j <= n):
            raise ValueError(f"site {(i, j)} outside the {n}x{n} lattice")
        if axis in _FLIPS_ROW:
            rows[i - 1] ^= 1
        if axis in _FLIPS_COL:
            cols[j - 1] ^= 1
    ra, ca = _action(rows), _action(cols)
    cls = class_of(ra, ca)
    k_odd = sum(a is Axis.Y for _, a in s.factors) % 2 == 1
    return ClassifierVerdict(ra, ca, cls, tuple(map(bool, rows)), tuple(map(bool, cols)),
                             conjugation_allows(cls, k_odd, n))


_PRODUCT = {
    LogicalClass.TAU_X: {LogicalClass.TAU_Y: LogicalClass.TAU_Z, LogicalClass.TAU_Z: LogicalClass.TAU_Y},
    LogicalClass.TAU_Y: {LogicalClass.TAU_X: LogicalClass.TAU_Z, LogicalClass.TAU_Z: LogicalClass.TAU_X},
    LogicalClass.TAU_Z: {LogicalClass.TAU_X: LogicalClass.TAU_Y, LogicalClass.TAU_Y: LogicalClass.TAU_X},
}


def compose_classes(a: LogicalClass, b: LogicalClass) -> LogicalClass | None:
    """Class of a product of strings in classes a and b, up to phase.

    None when both are Null: two sector-changing strings can combine into anything.
    """
    if a is LogicalClass.NULL and b is LogicalClass.NULL:
        return None
    if LogicalClass.NULL in (a, b):
        return LogicalClass.NULL
    if a is LogicalClass.IDENTITY:
        return b
    if b is LogicalClass.IDENTITY:
        return a
    if a is b:
        return LogicalClass.IDENTITY
    return _PRODUCT[a][b]


class ClassifierDisagreement(AssertionError):
    """The matrix oracle found logical weight outside the predicted class."""


@dataclass(frozen=True)
class OracleCheck:
    block: np.ndarray
    predicted: LogicalClass  # effective class: table class, or Null if conjugation forbids it
    coefficients: dict[LogicalClass, complex]
    residual: float
    table_class: LogicalClass = LogicalClass.NULL

    @property
    def support(self) -> set[LogicalClass]:
        return {c for c, v in self.coefficients.items() if abs(v) > ORACLE_TOL}

    @property
    def oracle_class(self) -> LogicalClass:
        """Class read off the block alone: the single nonzero component, or Null."""
        sup = self.support
        if not sup:
            return LogicalClass.NULL
        if len(sup) == 1:
            return next(iter(sup))
        raise ClassifierDisagreement(f"block spans several logical operators: {sorted(c.value for c in sup)}")

    @property
    def agrees(self) -> bool:
        """No weight outside the predicted class, and nonzero weight inside unless Null."""
        if self.residual >= ORACLE_TOL:
            return False
        return self.support == (set() if self.predicted is LogicalClass.NULL else {self.predicted})


def logical_projection_oracle(
    s: PauliString, basis: LogicalBasis, lattice: LatticeSpec, strict: bool = True
) -> OracleCheck:
    """Project the string's matrix onto the doublet and compare with the classifier."""
    block = basis.block(build_pauli_string(lattice, s).matrix)
    verdict = classify_string(s, lattice.n)
    predicted = verdict.effective_class
    coefs = {
        c: complex(np.trace(c.matrix.conj().T @ block) / 2)
        for c in (LogicalClass.IDENTITY, LogicalClass.TAU_X, LogicalClass.TAU_Y, LogicalClass.TAU_Z)
    }
    expected = coefs.get(predicted, 0.0) * predicted.matrix
    residual = float(np.max(np.abs(block - expected)))
    check = OracleCheck(block, predicted, coefs, residual, verdict.logical_class)
    if strict and not check.agrees:
        raise ClassifierDisagreement(
            f"{s}: predicted {predicted.value}, block support {sorted(c.value for c in check.support)}, "
            f"residual {residual:.2e}"
        )
    return check


def _contribution(axis: Axis, i: int, j: int) -> tuple[int, int]:
    r = 1 << i if axis in _FLIPS_ROW else 0
    c = 1 << j if axis in _FLIPS_COL else 0
    return r, c


def _reachable(axis: Axis, n: int, max_count: int) -> list[set[tuple[int, int]]]:
    """Flip masks reachable with exactly k factors of ``axis``, for k = 0..max_count."""
    moves = {_contribution(axis, i, j) for i in range(n) for j in range(n)}
    layers = [{(0, 0)}]
    for _ in range(max_count):
        layers.append({(r ^ dr, c ^ dc) for r, c in layers[-1] for dr, dc in moves})
    return layers


def _mask_class(mask: tuple[int, int], n: int) -> LogicalClass:
    full = (1 << n) - 1

    def act(m):
        return Action.PRESERVE_ALL if m == 0 else Action.FLIP_ALL if m == full else Action.MIXED

    return class_of(act(mask[0]), act(mask[1]))


def _check_manip_axis(u: Axis | str) -> Axis:
    u = Axis.parse(u)
    if u is Axis.Z:
        raise ValueError("Z manipulations are not supported; use X or Y")
    return u


def minimum_effective_order(manip_axis: Axis | str, n: int) -> int:
    """Smallest number of sigma^u factors whose product acts nontrivially on the doublet."""
    u = _check_manip_axis(manip_axis)
    for m, layer in enumerate(_reachable(u, n, 2 * n + 2)):
        if any(_mask_class(s, n) not in (LogicalClass.IDENTITY, LogicalClass.NULL) for s in layer):
            return m
    raise RuntimeError("no nontrivial product found")  # unreachable for X or Y


@dataclass(frozen=True)
class ScalingTerm:
    """Leading deviation f^k g^(m-N) gap^(N-k-m) from k noise and m manipulation
    factors, relative to the noiseless effect (g/gap)^N."""

    noise_order: int
    manip_order: int
    f_power: int
    g_power: int
    gap_power: int
    relevant: bool = True

    def formula(self) -> str:
        if not self.relevant:
            return "not relevant"
        num = [f"f^{self.f_power}"]
        den = []
        for sym, p in (("g_max", self.g_power), ("Delta", self.gap_power)):
            if p > 0:
                num.append(f"{sym}^{p}")
            elif p < 0:
                den.append(f"{sym}^{-p}")
        return " ".join(num) + (" / " + " ".join(den) if den else "")


@dataclass(frozen=True)
class ScalingPrediction:
    manip_axis: Axis
    noise_axis: Axis
    n: int
    parallel: bool
    quoted: bool  # True where the pairing is tabulated explicitly; False if derived by symmetry
    terms: dict[LogicalClass, ScalingTerm | None]

    def as_dict(self) -> dict:
        return {
            "manip_axis": self.manip_axis.value,
            "noise_axis": self.noise_axis.value,
            "n": self.n,
            "parallel": self.parallel,
            "quoted": self.quoted,
            "terms": {
                c.value: None if t is None else {
                    "noise_order": t.noise_order,
                    "manip_order": t.manip_order,
                    "f_power": t.f_power,
                    "g_max_power": t.g_power,
                    "gap_power": t.gap_power,
                    "relevant": t.relevant,
                    "formula": t.formula(),
                }
                for c, t in self.terms.items()
            },
        }


def predict_dominant_scaling(manip_axis: Axis | str, noise_axis: Axis | str, n: int) -> ScalingPrediction:
    """Lowest-order noise-induced term per logical class.

    The noise order k >= 1 is minimized first (f is the smallest scale), then
    the manipulation order m. Identity terms only shift a global phase and
    are marked not relevant. Classes no product can reach map to None.

    Pure-noise terms (m = 0) come from a static Hermitian perturbation, so
    the conjugation rule removes them exactly. Terms that involve the drive
    are time ordered and can evade that rule, so only the table applies.
    """
    u = _check_manip_axis(manip_axis)
    v = Axis.parse(noise_axis)
    bound = 2 * n + 2
    noise_layers = _reachable(v, n, bound)
    manip_layers = _reachable(u, n, bound)
    N = minimum_effective_order(u, n)
    terms: dict[LogicalClass, ScalingTerm | None] = {}
    for target in (LogicalClass.IDENTITY, LogicalClass.TAU_X, LogicalClass.TAU_Y, LogicalClass.TAU_Z):
        found = None
        for k in range(1, bound + 1):
            for m in range(0, bound + 1):
                if m == 0 and not conjugation_allows(target, v is Axis.Y and k % 2 == 1, n):
                    continue
                if any(_mask_class((a[0] ^ b[0], a[1] ^ b[1]), n) is target
                       for a in noise_layers[k] for b in manip_layers[m]):
                    found = (k, m)
                    break
            if found:
                break
        if found is None:
            terms[target] = None
            continue
        k, m = found
        terms[target] = ScalingTerm(
            noise_order=k, manip_order=m,
            f_power=k, g_power=m - N, gap_power=N - k - m,
            relevant=target is not LogicalClass.IDENTITY,
        )
    parallel = u is v
    quoted = parallel or (u is Axis.Y and v is Axis.X)
    return ScalingPrediction(u, v, n, parallel, quoted, terms)
