"""Schedules, pulses and fixed-step propagation of the Schroedinger equation.

Energies are in units of J and hbar = 1. Hamiltonians are linear
combinations ``H(t) = sum_k c_k(t) A_k`` of fixed hermitian matrices, which
lets the propagator restrict itself to the smallest subspace left invariant
by every A_k and evaluate all coefficients up front.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from ._kernels import magnus4_steps, rk4_propagate
from .fitting import loglog_slope
from .lattice import (
    Axis,
    DenseOperator,
    LatticeSpec,
    build_collective_field,
    build_protection_hamiltonian,
)

NORM_TOL = 1e-9
CONVERGENCE_TOL = 1e-10
STEP_SAFETY = 0.01  # dt * ||H||_max
_CHUNK = 1 << 17


class IntegratorError(RuntimeError):
    """Norm drift beyond NORM_TOL: the step is too large."""


class ConvergenceError(RuntimeError):
    """Halving dt moved the final state by more than CONVERGENCE_TOL."""


RAMP_FORMS = ("gaussian", "linear")
ENVELOPES = ("sin2", "sin2_skewed")
# pulse length in units of 1/gap; shorter sin2 pulses leak > 1e-6 near g ~ 0.1 on n=2
DEFAULT_DURATION_GAPS = 200.0


@dataclass(frozen=True)
class Schedule:
    """Ramp f(t) switching the protection Hamiltonian on with time scale ``tau``."""

    tau: float
    t_final: float | None = None
    form: str = "gaussian"

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.t_final is not None and not self.t_final > 0:
            raise ValueError(f"t_final must be positive, got {self.t_final}")
        if self.form not in RAMP_FORMS:
            raise ValueError(f"unknown ramp form {self.form!r}; choose from {RAMP_FORMS}")

    @property
    def final_time(self) -> float:
        return 5.0 * self.tau if self.t_final is None else self.t_final


@dataclass(frozen=True)
class PulseSpec:
    """Gate g(t) S^u with peak ``g_max``; ``duration=None`` means DEFAULT_DURATION_GAPS / gap."""

    axis: Axis
    g_max: float
    duration: float | None = None
    envelope: str = "sin2"

    def __post_init__(self) -> None:
        object.__setattr__(self, "axis", Axis.parse(self.axis))
        if self.g_max < 0:
            raise ValueError(f"g_max must be nonnegative, got {self.g_max}")
        if self.duration is not None and not self.duration > 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if self.envelope not in ENVELOPES:
            raise ValueError(f"unknown envelope {self.envelope!r}; choose from {ENVELOPES}")

    def resolved(self, gap: float) -> "PulseSpec":
        if self.duration is not None:
            return self
        return replace(self, duration=DEFAULT_DURATION_GAPS / gap)


def _check_time(t):
    t = np.asarray(t, float)
    if np.any(t < 0):
        raise ValueError("schedule evaluated at negative time")
    return t


def ramp_value(s: Schedule, t):
    t = _check_time(t)
    if s.form == "gaussian":
        return -np.expm1(-(t / s.tau) ** 2)
    return np.minimum(t / s.tau, 1.0)


def pulse_value(p: PulseSpec, t):
    if p.duration is None:
        raise ValueError("pulse duration unresolved; call PulseSpec.resolved(gap) first")
    t = _check_time(t)
    s = np.minimum(t, p.duration) / p.duration
    if p.envelope == "sin2_skewed":
        # peak at s = 1/sqrt(2); no time-reversal symmetry about T/2
        s = s * s
    return np.where(t <= p.duration, p.g_max * np.sin(np.pi * s) ** 2, 0.0)


def schedule_eval(obj: Schedule | PulseSpec, t):
    if isinstance(obj, Schedule):
        return ramp_value(obj, t)
    if isinstance(obj, PulseSpec):
        return pulse_value(obj, t)
    raise TypeError(f"expected Schedule or PulseSpec, got {type(obj).__name__}")


Coefficient = float | Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class TimeDependentHamiltonian:
    """H(t) = sum_k c_k(t) A_k; a coefficient is a constant or a vectorized callable."""

    operators: tuple[np.ndarray, ...]
    coefficients: tuple[Coefficient, ...]

    def __post_init__(self) -> None:
        ops = tuple(np.asarray(a, dtype=complex) for a in self.operators)
        if len(ops) != len(self.coefficients) or not ops:
            raise ValueError("need one coefficient per operator and at least one term")
        dim = ops[0].shape
        if any(a.shape != dim for a in ops):
            raise ValueError("all terms must share one dimension")
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "coefficients", tuple(self.coefficients))

    @classmethod
    def from_terms(cls, terms: Sequence[tuple[object, Coefficient]]) -> "TimeDependentHamiltonian":
        kept = [(np.asarray(a), c) for a, c in terms if a is not None]
        return cls(tuple(a for a, _ in kept), tuple(c for _, c in kept))

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    def coefficient_table(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, float))
        cols = [np.broadcast_to(np.asarray(c(t) if callable(c) else c, float), t.shape)
                for c in self.coefficients]
        return np.stack(cols, axis=1)

    def __call__(self, t: float) -> np.ndarray:
        row = self.coefficient_table(t)[0]
        return sum(c * a for c, a in zip(row, self.operators))

    def reversed(self, t_final: float) -> "TimeDependentHamiltonian":
        """-H(t_final - t): running it for t_final undoes the forward evolution."""
        coefs = []
        for c in self.coefficients:
            if callable(c):
                coefs.append(lambda t, c=c: -np.asarray(c(t_final - np.asarray(t)), float))
            else:
                coefs.append(-c)
        return TimeDependentHamiltonian(self.operators, tuple(coefs))


def initialization_hamiltonian(
    lattice: LatticeSpec,
    schedule: Schedule,
    noise_field: DenseOperator | None = None,
    h0: DenseOperator | None = None,
) -> TimeDependentHamiltonian:
    """f(t) H0 + (1 - f(t)) S^y, plus an unmodulated static noise field."""
    h0 = build_protection_hamiltonian(lattice) if h0 is None else h0
    sy = build_collective_field(lattice, Axis.Y)
    terms = [
        (h0.matrix, lambda t: ramp_value(schedule, t)),
        (sy.matrix, lambda t: 1.0 - ramp_value(schedule, t)),
    ]
    if noise_field is not None:
        terms.append((noise_field.matrix, 1.0))
    return TimeDependentHamiltonian.from_terms(terms)


def manipulation_hamiltonian(
    lattice: LatticeSpec,
    pulse: PulseSpec,
    h0: DenseOperator,
    noise_field: DenseOperator | None = None,
) -> TimeDependentHamiltonian:
    """H0 + g(t) S^u, plus a static noise field."""
    field = build_collective_field(lattice, pulse.axis)
    terms = [(h0.matrix, 1.0), (field.matrix, lambda t: pulse_value(pulse, t))]
    if noise_field is not None:
        terms.append((noise_field.matrix, 1.0))
    return TimeDependentHamiltonian.from_terms(terms)


def invariant_subspace(operators: Sequence[np.ndarray], states: np.ndarray, tol: float = 1e-9):
    """Orthonormal basis of the smallest subspace containing ``states`` and closed
    under every operator, or None when that subspace is the whole space."""
    states = np.asarray(states, complex).reshape(len(states), -1)
    dim = states.shape[0]
    ops = [np.asarray(a, complex) for a in operators]
    scale = max([np.linalg.norm(a, 2) for a in ops] + [1.0])

    def orth_against(basis, w):
        for _ in range(2):
            if basis is not None:
                w = w - basis @ (basis.conj().T @ w)
        u, s, _ = np.linalg.svd(w, full_matrices=False)
        ref = 1.0 if basis is not None else max(s[0], 1e-300)
        return u[:, s > tol * ref]

    basis = orth_against(None, states)
    frontier = basis
    while frontier.shape[1]:
        if basis.shape[1] >= dim:
            return None
        cand = np.hstack([a @ frontier for a in ops]) / scale
        frontier = orth_against(basis, cand)
        basis = np.hstack([basis, frontier])
    if basis.shape[1] >= dim:
        return None
    for a in ops:
        image = a @ basis
        if np.max(np.abs(image - basis @ (basis.conj().T @ image)), initial=0.0) > 1e-11 * scale:
            return None
    return basis


@dataclass
class Evolution:
    """Result of :func:`evolve_state`; states are columns when several were evolved."""

    state: np.ndarray
    times: np.ndarray
    samples: list[np.ndarray]
    dt: float
    steps: int
    norm_drift: float
    convergence_deficit: float | None
    subspace_dim: int


def _norm_drift(psi: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.norm(psi, axis=0) - 1.0)))


def _propagate(ops, shifts, ham, psi, t0, dt, nsteps, sample_steps):
    """Run nsteps; return final reduced state and the states at sample_steps."""
    out = []
    step = 0
    phase = 0.0
    targets = list(sample_steps)
    if targets and targets[0] == 0:
        out.append(psi.copy())
        targets.pop(0)
    stops = sorted(set(targets + [nsteps]))
    for stop in stops:
        while step < stop:
            n = min(_CHUNK, stop - step)
            ts = t0 + dt * (step + 0.5 * np.arange(2 * n + 1))
            coef = ham.coefficient_table(ts)
            psi = rk4_propagate(ops, coef, psi, dt)
            # the shifted-out constants only contribute a global phase
            w = np.full(2 * n + 1, 2.0)
            w[1::2] = 4.0
            w[0] = w[-1] = 1.0
            phase += float(dt / 6.0 * (w @ coef) @ shifts)
            step += n
        if stop in targets:
            out.append(psi * np.exp(-1j * phase))
    return psi * np.exp(-1j * phase), out


def _prepare(hamiltonian: TimeDependentHamiltonian, block: np.ndarray, reduce: bool):
    """Reduced, eigenvalue-shifted operators and the reduced initial block."""
    basis = invariant_subspace(hamiltonian.operators, block) if reduce else None
    if basis is None:
        ops = list(hamiltonian.operators)
        psi = block.copy()
    else:
        ops = [basis.conj().T @ a @ basis for a in hamiltonian.operators]
        psi = basis.conj().T @ block
    shifts = np.array([np.linalg.eigvalsh(a)[0] for a in ops])
    ops = np.ascontiguousarray(
        np.stack([a - s * np.eye(a.shape[0]) for a, s in zip(ops, shifts)]), dtype=np.complex128
    )
    return basis, ops, shifts, psi


def _lift(basis, x):
    return x if basis is None else basis @ x


def max_norm_bound(ham: TimeDependentHamiltonian, ops, t0: float, t1: float) -> float:
    norms = np.array([np.linalg.norm(a, 2) for a in ops])
    grid = np.linspace(t0, t1, 4097)
    coef = np.abs(ham.coefficient_table(grid))
    return float(np.max(coef @ norms))


def evolve_state(
    psi0: np.ndarray,
    hamiltonian: TimeDependentHamiltonian,
    t0: float,
    t1: float,
    dt: float | None = None,
    sample_times: Sequence[float] | None = None,
    check_convergence: bool = True,
    reduce: bool = True,
) -> Evolution:
    """Integrate i dpsi/dt = H(t) psi from t0 to t1 with fixed-step RK4.

    ``dt`` defaults to ``STEP_SAFETY / ||H||_max`` and may not exceed it.
    Each term is shifted by its lowest eigenvalue before integration (the
    removed phase is restored exactly), so ``||H||`` here is the norm of the
    shifted operator actually integrated. Sample times snap to the step grid.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    single = psi0.ndim == 1
    block = psi0.reshape(-1, 1) if single else psi0
    if block.shape[0] != hamiltonian.dim:
        raise ValueError(f"state dimension {block.shape[0]} != Hamiltonian dimension {hamiltonian.dim}")
    if _norm_drift(block) > NORM_TOL:
        raise ValueError("initial state is not normalized")
    if not t1 > t0:
        raise ValueError("need t1 > t0")

    basis, ops, shifts, psi = _prepare(hamiltonian, block, reduce)
    bound = max_norm_bound(hamiltonian, ops, t0, t1)
    span = t1 - t0
    dt_max = STEP_SAFETY / bound if bound > 0 else span
    if dt is None:
        dt = dt_max
    elif dt > dt_max * (1 + 1e-9):
        raise ValueError(f"dt={dt:g} exceeds {STEP_SAFETY}/||H||_max = {dt_max:g}")
    nsteps = max(1, int(np.ceil(span / dt - 1e-9)))
    dt = span / nsteps

    times = np.array([], float)
    steps_at = []
    if sample_times is not None:
        ts = np.asarray(sample_times, float)
        if np.any(ts < t0 - 1e-12) or np.any(ts > t1 + 1e-12):
            raise ValueError("sample times outside [t0, t1]")
        steps_at = sorted(set(int(round((t - t0) / dt)) for t in ts))
        times = t0 + dt * np.array(steps_at, float)

    def lift(x):
        return _lift(basis, x)

    final, samples = _propagate(ops, shifts, hamiltonian, psi, t0, dt, nsteps, steps_at)
    samples = [lift(x) for x in samples]
    final = lift(final)
    drift = max([_norm_drift(final)] + [_norm_drift(x) for x in samples])
    if drift > NORM_TOL:
        raise IntegratorError(f"norm drift {drift:.2e} exceeds {NORM_TOL:g}; reduce dt")

    deficit = None
    if check_convergence:
        fine, _ = _propagate(ops, shifts, hamiltonian, psi, t0, dt / 2, 2 * nsteps, [])
        fine = lift(fine)
        overlaps = np.abs(np.sum(final.conj() * fine, axis=0)) ** 2
        deficit = float(np.max(1.0 - overlaps))
        if abs(deficit) > CONVERGENCE_TOL:
            raise ConvergenceError(f"halving dt changes the final state by {deficit:.2e}")

    if single:
        final = final[:, 0]
        samples = [x[:, 0] for x in samples]
    return Evolution(
        state=final,
        times=times,
        samples=samples,
        dt=dt,
        steps=nsteps,
        norm_drift=drift,
        convergence_deficit=deficit,
        subspace_dim=hamiltonian.dim if basis is None else basis.shape[1],
    )


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(min(1.0, abs(np.vdot(a, b)) ** 2))


def magnus4_propagate(
    psi0: np.ndarray, hamiltonian: TimeDependentHamiltonian, t0: float, t1: float, nsteps: int
) -> np.ndarray:
    """Commutator-free fourth-order Magnus integration with series exponentials.

    Each step applies exp(-i h B) exp(-i h A) with A, B built from H at the
    two Gauss nodes; the exponentials are summed to below 1e-17. Independent
    of the RK4 path (no shifts, no subspace tricks); used as a reference.
    """
    psi = np.asarray(psi0, complex)
    out = np.ascontiguousarray(psi.reshape(psi.shape[0], -1)).copy()
    h = (t1 - t0) / nsteps
    r = np.sqrt(3.0) / 6.0
    c1, c2 = 0.5 - r, 0.5 + r
    ops = np.ascontiguousarray(np.stack(hamiltonian.operators))
    chunk = 1 << 16
    for start in range(0, nsteps, chunk):
        t = t0 + h * np.arange(start, min(start + chunk, nsteps))
        nodes = np.stack([t + c1 * h, t + c2 * h], axis=1).ravel()
        coef = np.ascontiguousarray(hamiltonian.coefficient_table(nodes).astype(complex))
        magnus4_steps(ops, coef, out, h, 0.25 + r, 0.25 - r)
    return out.reshape(psi.shape)


# errors outside this window are pre-asymptotic or at the roundoff floor
ORDER_FIT_WINDOW = (1e-10, 1e-6)


@dataclass
class OrderStudy:
    """RK4 errors against a reference solution at several step sizes."""

    step_scales: np.ndarray  # dt * ||H||_max
    dts: np.ndarray
    errors: np.ndarray
    fitted: np.ndarray  # mask of the points inside ORDER_FIT_WINDOW
    order: float


def order_study(
    psi0: np.ndarray,
    hamiltonian: TimeDependentHamiltonian,
    t0: float,
    t1: float,
    step_scales: Sequence[float] = (1.6, 0.8, 0.4, 0.2, 0.1, 0.05, 0.025),
    reference: np.ndarray | None = None,
    reference_scale: float = 0.00625,
) -> OrderStudy:
    """Empirical convergence order of the RK4 propagator.

    Step sizes are given as dt * ||H||_max, bypassing the production step
    cap. Without an explicit ``reference`` the final state comes from
    :func:`magnus4_propagate` at step scale ``reference_scale`` inside the
    same invariant subspace. The order is the log-log slope over the points
    whose error lies in ORDER_FIT_WINDOW; NaN if fewer than three qualify.
    """
    psi0 = np.asarray(psi0, complex)
    block = psi0.reshape(-1, 1) if psi0.ndim == 1 else psi0
    basis, ops, shifts, psi = _prepare(hamiltonian, block, True)
    bound = max_norm_bound(hamiltonian, ops, t0, t1)
    span = t1 - t0
    scales = np.asarray(step_scales, float)
    if reference is None:
        # unshifted operators and exact exponentials
        reduced = hamiltonian if basis is None else TimeDependentHamiltonian(
            tuple(basis.conj().T @ a @ basis for a in hamiltonian.operators), hamiltonian.coefficients
        )
        nref = int(np.ceil(span * bound / reference_scale))
        reference = _lift(basis, magnus4_propagate(psi, reduced, t0, t1, nref))
    reference = np.asarray(reference, complex).reshape(block.shape)
    dts, errs = [], []
    for sc in scales:
        nsteps = max(1, int(np.ceil(span * bound / sc)))
        dt = span / nsteps
        final, _ = _propagate(ops, shifts, hamiltonian, psi, t0, dt, nsteps, [])
        dts.append(dt)
        errs.append(float(np.max(np.linalg.norm(_lift(basis, final) - reference, axis=0))))
    dts, errs = np.array(dts), np.array(errs)
    lo, hi = ORDER_FIT_WINDOW
    fitted = (errs >= lo) & (errs <= hi)
    order = loglog_slope(dts[fitted], errs[fitted], inner=1.0) if fitted.sum() >= 3 else float("nan")
    return OrderStudy(scales, dts, errs, fitted, order)
