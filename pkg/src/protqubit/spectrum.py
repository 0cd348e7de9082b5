"""Spectra, the protected logical doublet, and degeneracy splitting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import initialization_hamiltonian
from .fitting import loglog_slope
from .lattice import (
    Axis,
    DenseOperator,
    LatticeSpec,
    SymmetryOperators,
    build_collective_field,
    build_protection_hamiltonian,
    build_symmetry_operators,
)

DEGENERACY_TOL = 1e-8
RESIDUAL_TOL = 1e-10

TAU = {
    "1": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class DegeneracyError(ValueError):
    """The ground level is not an isolated doublet."""


class SymmetryViolationError(ValueError):
    """A symmetry operator does not preserve the ground doublet."""


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def diagonalize(h: DenseOperator) -> SpectralData:
    if not getattr(h, "hermitian", False):
        raise ValueError("diagonalize requires an operator flagged hermitian")
    w, v = np.linalg.eigh(h.matrix)
    return SpectralData(w, v)


@dataclass(frozen=True)
class LogicalBasis:
    """|0_L>, |1_L> with P_i acting as tau^z and Q_j as tau^x."""

    zero_l: np.ndarray
    one_l: np.ndarray
    gap: float
    ground_energy: float
    p_sector: tuple[int, ...]

    @property
    def states(self) -> np.ndarray:
        return np.column_stack([self.zero_l, self.one_l])

    def block(self, op) -> np.ndarray:
        """2x2 matrix <a_L| op |b_L>."""
        v = self.states
        return v.conj().T @ (np.asarray(op) @ v)


def ferromagnetic_p_sector(n: int) -> tuple[int, ...]:
    """P_i eigenvalues of the all-spins-down-along-y product state."""
    return tuple([(-1) ** n] * n)


def extract_logical_basis(
    h0: DenseOperator,
    syms: SymmetryOperators,
    p_target: int | None = None,
) -> LogicalBasis:
    n = len(syms.p)
    spec = diagonalize(h0)
    w, v = spec.eigenvalues, spec.eigenvectors
    if len(w) < 3 or w[1] - w[0] > DEGENERACY_TOL or w[2] - w[0] <= DEGENERACY_TOL:
        raise DegeneracyError(f"ground level is not an isolated doublet: {w[:3]}")
    ground = v[:, :2]

    for k, p in enumerate(syms.p + syms.q):
        image = p.matrix @ ground
        leak = np.max(np.abs(image - ground @ (ground.conj().T @ image)))
        if leak > RESIDUAL_TOL:
            raise SymmetryViolationError(f"symmetry #{k} maps the ground doublet outside itself ({leak:.2e})")

    pw, pv = np.linalg.eigh(ground.conj().T @ syms.p[0].matrix @ ground)
    if not np.allclose(pw, [-1.0, 1.0], atol=1e-9):
        raise SymmetryViolationError(f"P_1 restricted to the doublet has eigenvalues {pw}")
    target = ferromagnetic_p_sector(n)[0] if p_target is None else p_target
    zero = ground @ pv[:, 1 if target > 0 else 0]

    # deterministic global phase: largest amplitude (first among ties) real positive
    mags = np.round(np.abs(zero), 9)
    k = int(np.argmax(mags))
    zero = zero * (abs(zero[k]) / zero[k])
    one = syms.q[0].matrix @ zero

    p_sector = []
    for p in syms.p:
        ev = np.vdot(zero, p.matrix @ zero).real
        p_sector.append(int(round(ev)))
        if np.max(np.abs(p.matrix @ zero - ev * zero)) > RESIDUAL_TOL:
            raise SymmetryViolationError("|0_L> is not a simultaneous P eigenstate")
    return LogicalBasis(
        zero_l=zero,
        one_l=one,
        gap=float(w[2] - w[0]),
        ground_energy=float(w[0]),
        p_sector=tuple(p_sector),
    )


def logical_basis(lattice: LatticeSpec, row_couplings=None, col_couplings=None) -> LogicalBasis:
    h0 = build_protection_hamiltonian(lattice, row_couplings, col_couplings)
    return extract_logical_basis(h0, build_symmetry_operators(lattice))


def ground_splitting(h: DenseOperator) -> tuple[float, float]:
    """(E1 - E0, E2 - E1) of ``h``."""
    w = np.linalg.eigvalsh(h.matrix)
    return float(w[1] - w[0]), float(w[2] - w[1])


@dataclass(frozen=True)
class SplittingScan:
    axis: Axis
    amplitudes: np.ndarray
    splittings: np.ndarray
    slope: float
    gap: float


def ground_splitting_scan(
    lattice: LatticeSpec, perturb_axis: Axis | str, amplitudes: Sequence[float]
) -> SplittingScan:
    axis = Axis.parse(perturb_axis)
    amps = np.asarray(amplitudes, float)
    h0 = build_protection_hamiltonian(lattice)
    field = build_collective_field(lattice, axis)
    gap = float(np.diff(np.linalg.eigvalsh(h0.matrix)[[0, 2]])[0])
    if np.any(amps < 0) or np.any(amps >= gap / 2):
        raise ValueError(f"amplitudes must lie in [0, gap/2) = [0, {gap / 2:.4g})")
    split = np.empty_like(amps)
    for k, h in enumerate(amps):
        s, excitation = ground_splitting(DenseOperator(h0.matrix + h * field.matrix, hermitian=True))
        if excitation <= s or excitation < gap / 2:
            raise ValueError(f"h={h:g} closes the gap above the ground doublet")
        split[k] = s
    positive = amps > 0
    try:
        slope = loglog_slope(amps[positive], split[positive])
    except ValueError:  # too few points for a fit
        slope = float("nan")
    return SplittingScan(axis, amps, split, slope, gap)


def sector_basis(syms: SymmetryOperators, p_sector: Sequence[int]) -> np.ndarray:
    """Orthonormal basis of the joint eigenspace P_i = p_sector[i]."""
    dim = syms.p[0].dim
    proj = np.eye(dim, dtype=complex)
    for p, s in zip(syms.p, p_sector):
        proj = proj @ (0.5 * (np.eye(dim) + s * p.matrix))
    w, v = np.linalg.eigh(proj)
    return v[:, w > 0.5]


@dataclass(frozen=True)
class InstantaneousSpectrum:
    times: np.ndarray
    levels: np.ndarray  # (len(times), dim), ascending, in units of J


def instantaneous_spectrum(lattice: LatticeSpec, schedule, sample_times) -> InstantaneousSpectrum:
    times = np.asarray(sample_times, float)
    if np.any(times < 0) or np.any(times > schedule.final_time + 1e-12):
        raise ValueError("sample times must lie in [0, t_final]")
    ham = initialization_hamiltonian(lattice, schedule)
    levels = np.array([np.linalg.eigvalsh(ham(t)) for t in times]) / lattice.energy_unit
    return InstantaneousSpectrum(times, levels)
