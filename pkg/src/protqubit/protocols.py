"""Adiabatic initialization and logical manipulation, with static noise."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .dynamics import (
    PulseSpec,
    Schedule,
    evolve_state,
    fidelity,
    initialization_hamiltonian,
    manipulation_hamiltonian,
)
from .fitting import loglog_slope
from .lattice import (
    Axis,
    DenseOperator,
    LatticeSpec,
    build_collective_field,
    build_local_field,
    build_protection_hamiltonian,
    build_symmetry_operators,
)
from .spectrum import TAU, LogicalBasis, extract_logical_basis

LEAKAGE_LIMIT = 1e-3
ROTATION_LEAKAGE_LIMIT = 1e-6
ANGLE_TOL = 1e-6

NOISE_KINDS = ("none", "directional", "random_orientation", "coupling_fluctuation")


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


@dataclass(frozen=True)
class NoiseSpec:
    """Static perturbation held fixed over a whole run; amplitudes in units of J."""

    kind: str = "none"
    amplitude: float = 0.0
    axis: Axis | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; choose from {NOISE_KINDS}")
        if self.amplitude < 0:
            raise ValueError(f"noise amplitude must be nonnegative, got {self.amplitude}")
        if self.kind == "directional":
            if self.axis is None:
                raise ValueError("directional noise needs an axis")
            object.__setattr__(self, "axis", Axis.parse(self.axis))

    @classmethod
    def none(cls) -> "NoiseSpec":
        return cls()

    @classmethod
    def directional(cls, axis: Axis | str, amplitude: float) -> "NoiseSpec":
        return cls("directional", amplitude, Axis.parse(axis))

    @classmethod
    def random_orientation(cls, amplitude: float, seed: int) -> "NoiseSpec":
        return cls("random_orientation", amplitude, seed=seed)

    @classmethod
    def coupling_fluctuation(cls, epsilon: float, seed: int) -> "NoiseSpec":
        return cls("coupling_fluctuation", epsilon, seed=seed)

    def site_directions(self, lattice: LatticeSpec) -> np.ndarray:
        """One unit vector per site, uniform on the sphere (row-major site order)."""
        v = make_rng(self.seed).standard_normal((lattice.num_sites, 3))
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    def couplings(self, lattice: LatticeSpec) -> tuple[np.ndarray, np.ndarray] | tuple[None, None]:
        if self.kind != "coupling_fluctuation":
            return None, None
        eps = make_rng(self.seed).uniform(-self.amplitude, self.amplitude, 2 * lattice.n)
        return lattice.j_x * (1 + eps[: lattice.n]), lattice.j_y * (1 + eps[lattice.n:])

    def field_operator(self, lattice: LatticeSpec) -> DenseOperator | None:
        if self.amplitude == 0 or self.kind in ("none", "coupling_fluctuation"):
            return None
        if self.kind == "directional":
            return build_collective_field(lattice, self.axis).scaled(self.amplitude)
        return build_local_field(lattice, self.amplitude * self.site_directions(lattice))


def _hamiltonian_and_basis(lattice: LatticeSpec, noise: NoiseSpec):
    rows, cols = noise.couplings(lattice)
    if rows is None:
        return _nominal(lattice)
    h0 = build_protection_hamiltonian(lattice, rows, cols)
    return h0, extract_logical_basis(h0, build_symmetry_operators(lattice))


@functools.lru_cache(maxsize=8)
def _nominal(lattice: LatticeSpec):
    h0 = build_protection_hamiltonian(lattice)
    return h0, extract_logical_basis(h0, build_symmetry_operators(lattice))


def prepare_product_state(lattice: LatticeSpec) -> np.ndarray:
    """Every spin in the -1 eigenstate of sigma^y: the ground state of S^y."""
    down_y = np.array([1.0, -1j]) / np.sqrt(2.0)
    psi = np.ones(1, dtype=complex)
    for _ in range(lattice.num_sites):
        psi = np.kron(psi, down_y)
    return psi


@dataclass
class InitializationResult:
    times: np.ndarray
    errors: np.ndarray
    final_error: float
    final_state: np.ndarray
    norm_drift: float
    convergence_deficit: float | None
    basis: LogicalBasis = field(repr=False)


def run_initialization(
    lattice: LatticeSpec,
    schedule: Schedule,
    noise: NoiseSpec | None = None,
    n_samples: int = 0,
    dt: float | None = None,
    verify: bool = False,
) -> InitializationResult:
    """Drag the product state into |0_L> under f(t) H0 + (1 - f(t)) S^y (+ noise).

    Returns 1 - F(t) at ``n_samples`` evenly spaced times and at t_final.
    """
    noise = noise or NoiseSpec.none()
    h0, basis = _hamiltonian_and_basis(lattice, noise)
    ham = initialization_hamiltonian(lattice, schedule, noise.field_operator(lattice), h0=h0)
    t_final = schedule.final_time
    sample_times = np.linspace(0.0, t_final, n_samples) if n_samples else None
    evo = evolve_state(
        prepare_product_state(lattice), ham, 0.0, t_final,
        dt=dt, sample_times=sample_times, check_convergence=verify,
    )
    errors = np.array([1.0 - fidelity(basis.zero_l, s) for s in evo.samples])
    return InitializationResult(
        times=evo.times,
        errors=errors,
        final_error=1.0 - fidelity(basis.zero_l, evo.state),
        final_state=evo.state,
        norm_drift=evo.norm_drift,
        convergence_deficit=evo.convergence_deficit,
        basis=basis,
    )


class NonAdiabaticError(RuntimeError):
    """The logical block lost more than LEAKAGE_LIMIT of its weight."""


@dataclass(frozen=True)
class LogicalDecomposition:
    """U = alpha_1 1 + alpha_x tau^x + alpha_y tau^y + alpha_z tau^z on the doublet."""

    alpha_1: complex
    alpha_x: complex
    alpha_y: complex
    alpha_z: complex
    leakage: float
    block: np.ndarray = field(repr=False, compare=False, default=None)
    norm_drift: float = field(default=0.0, compare=False)

    @property
    def alphas(self) -> np.ndarray:
        return np.array([self.alpha_1, self.alpha_x, self.alpha_y, self.alpha_z])

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.alphas)


def decompose_block(block: np.ndarray) -> LogicalDecomposition:
    """Pauli coefficients of a 2x2 logical block, with the gauge alpha_1 >= 0.

    When |alpha_1| is negligible the largest coefficient is made real positive.
    """
    block = np.asarray(block, complex)
    alphas = np.array([np.trace(TAU[k] @ block) / 2 for k in ("1", "x", "y", "z")])
    k = 0 if abs(alphas[0]) > 1e-12 else int(np.argmax(np.round(np.abs(alphas), 12)))
    if abs(alphas[k]) > 0:
        alphas = alphas * (abs(alphas[k]) / alphas[k])
    # sum |alpha|^2 = ||block||_F^2 / 2, so leakage closes the budget exactly
    leakage = float(max(0.0, 1.0 - np.sum(np.abs(alphas) ** 2)))
    return LogicalDecomposition(*alphas, leakage=leakage, block=block)


def run_manipulation(
    lattice: LatticeSpec,
    pulse: PulseSpec,
    noise: NoiseSpec | None = None,
    dt: float | None = None,
    verify: bool = False,
) -> LogicalDecomposition:
    """Evolve |0_L>, |1_L> under H0 + g(t) S^u (+ static noise) and decompose the
    logical block after removing the dynamical phase of the ground energy."""
    noise = noise or NoiseSpec.none()
    h0, basis = _hamiltonian_and_basis(lattice, noise)
    if pulse.g_max >= basis.gap:
        raise ValueError(f"g_max={pulse.g_max:g} must stay below the gap {basis.gap:.6g}")
    # the pulse is designed on the nominal lattice; fluctuations are unknown to it
    pulse = pulse.resolved(_nominal(lattice)[1].gap)
    ham = manipulation_hamiltonian(lattice, pulse, h0, noise.field_operator(lattice))
    evo = evolve_state(basis.states, ham, 0.0, pulse.duration, dt=dt, check_convergence=verify)
    block = basis.states.conj().T @ evo.state * np.exp(1j * basis.ground_energy * pulse.duration)
    dec = decompose_block(block)
    if dec.leakage > LEAKAGE_LIMIT:
        raise NonAdiabaticError(f"leakage {dec.leakage:.2e} out of the logical doublet")
    return replace(dec, norm_drift=evo.norm_drift)


@dataclass(frozen=True)
class RotationReport:
    """U = e^{i phase} (cos(angle) 1 + i sin(angle) axis . tau)."""

    axis: np.ndarray
    angle: float
    phase: float
    axis_defined: bool = True


def rotation_axis_angle(d: LogicalDecomposition, tol: float = 1e-6) -> RotationReport:
    if d.leakage >= ROTATION_LEAKAGE_LIMIT:
        raise ValueError(f"leakage {d.leakage:.2e} too large for a rotation reading")
    alphas = d.alphas
    u = alphas[0] * TAU["1"] + sum(a * TAU[k] for a, k in zip(alphas[1:], "xyz"))
    phi = 0.5 * np.angle(np.linalg.det(u))
    best = None
    for cand in (phi, phi + np.pi):
        rot = alphas * np.exp(-1j * cand)
        a0, vec = rot[0].real, (rot[1:] / 1j).real
        key = (a0 > 1e-12, vec[np.argmax(np.abs(vec))] > 0 if a0 <= 1e-12 else True)
        if best is None or key > best[0]:
            best = (key, cand, a0, vec, rot)
    _, phi, a0, vec, rot = best
    resid = max(abs(rot[0].imag), np.max(np.abs((rot[1:] / 1j).imag)), abs(a0 ** 2 + vec @ vec - 1))
    if resid > tol:
        raise ValueError(f"logical block is not unitary within {tol:g} (residual {resid:.2e})")
    sin_theta = float(np.linalg.norm(vec))
    angle = float(np.arctan2(sin_theta, a0))
    phase = float(np.angle(np.exp(1j * phi)))
    if sin_theta < 1e-12:
        return RotationReport(np.zeros(3), angle, phase, axis_defined=False)
    return RotationReport(vec / sin_theta, angle, phase)


def rotation_angle(lattice: LatticeSpec, pulse: PulseSpec, noise: NoiseSpec | None = None,
                   dt: float | None = None) -> float:
    return rotation_axis_angle(run_manipulation(lattice, pulse, noise, dt=dt)).angle


def modulus_angle(d: LogicalDecomposition) -> float:
    """Rotation angle in [0, pi/2] read from |alpha| alone; insensitive to leakage."""
    m = d.moduli
    return float(np.arctan2(np.linalg.norm(m[1:]), m[0]))


def modulus_axis(d: LogicalDecomposition) -> np.ndarray:
    """Unsigned rotation axis (|alpha_x|, |alpha_y|, |alpha_z|) / norm; zeros if undefined."""
    m = d.moduli[1:]
    norm = np.linalg.norm(m)
    return m / norm if norm > 1e-12 else np.zeros(3)


def calibrate_g_max(
    lattice: LatticeSpec,
    axis: Axis | str,
    target_angle: float,
    duration: float | None = None,
    envelope: str = "sin2",
    g_start: float = 1e-2,
    tol: float = ANGLE_TOL,
) -> float:
    """Smallest g_max whose noiseless rotation angle equals ``target_angle``.

    Brackets the first monotonic branch of theta(g_max) by doubling from
    ``g_start``, then bisects until the angle is within ``tol``.
    """
    axis = Axis.parse(axis)
    if not 0 < target_angle < np.pi / 2:
        raise ValueError("target angle must lie in (0, pi/2)")
    _, basis = _nominal(lattice)

    def theta(g):
        return modulus_angle(run_manipulation(lattice, PulseSpec(axis, g, duration, envelope)))

    lo, hi = 0.0, g_start
    prev = 0.0
    while (th := theta(hi)) < target_angle:
        if th <= prev or 2 * hi >= basis.gap:
            raise ValueError(f"target angle {target_angle:g} not reached on the monotonic branch")
        lo, prev, hi = hi, th, 2 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        th = theta(mid)
        if abs(th - target_angle) < tol:
            return mid
        if th < target_angle:
            lo = mid
        else:
            hi = mid
    raise RuntimeError("bisection did not converge")


@dataclass
class NoiseSweep:
    """Deviations of |alpha_k| from the noiseless run, per noise amplitude.

    Angle and axis deviations are read from the moduli (see ``modulus_angle``)
    so that noise-induced leakage does not block them. With several seeds each
    row holds the median over seeds.
    """

    amplitudes: np.ndarray
    d_alpha: np.ndarray  # (len(amplitudes), 4): 1, x, y, z
    d_angle: np.ndarray
    axis_shift: np.ndarray
    reference: LogicalDecomposition
    slopes: dict[str, float]
    per_seed: list[tuple[float, int, LogicalDecomposition]] = field(repr=False, default_factory=list)


def sweep_noise_deviation(
    lattice: LatticeSpec,
    pulse: PulseSpec,
    noise_axis: Axis | str | None,
    amplitudes: Sequence[float],
    seeds: Sequence[int] = (0,),
    dt: float | None = None,
) -> NoiseSweep:
    """``noise_axis=None`` selects random-orientation noise, one realization per seed."""
    amps = np.asarray(amplitudes, float)
    reference = run_manipulation(lattice, pulse, dt=dt)
    d_alpha = np.zeros((len(amps), 4))
    d_angle = np.zeros(len(amps))
    axis_shift = np.zeros(len(amps))
    per_seed = []
    use_seeds = list(seeds) if noise_axis is None else [0]
    ref_axis = modulus_axis(reference)
    ref_angle = modulus_angle(reference)
    for k, f in enumerate(amps):
        devs, angles, shifts = [], [], []
        for seed in use_seeds:
            if noise_axis is None:
                noise = NoiseSpec.random_orientation(f, seed)
            else:
                noise = NoiseSpec.directional(noise_axis, f)
            dec = run_manipulation(lattice, pulse, noise, dt=dt)
            per_seed.append((float(f), seed, dec))
            devs.append(np.abs(dec.moduli - reference.moduli))
            angles.append(abs(modulus_angle(dec) - ref_angle))
            shifts.append(np.linalg.norm(modulus_axis(dec) - ref_axis))
        d_alpha[k] = np.median(devs, axis=0)
        d_angle[k] = np.median(angles)
        axis_shift[k] = np.median(shifts)
    slopes = {}
    for name, col in (("alpha_1", d_alpha[:, 0]), ("alpha_x", d_alpha[:, 1]),
                      ("alpha_y", d_alpha[:, 2]), ("alpha_z", d_alpha[:, 3]), ("angle", d_angle)):
        ok = (amps > 0) & np.isfinite(col) & (col > 0)
        slopes[name] = loglog_slope(amps[ok], col[ok]) if ok.sum() >= 2 else float("nan")
    return NoiseSweep(amps, d_alpha, d_angle, axis_shift, reference, slopes, per_seed)
