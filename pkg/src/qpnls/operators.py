"""The two exactly solvable sub-flows of the split equation, and potentials.

Kinetic flow: ``i phi_t = -Laplace phi``.  Each mode ``exp(i lambda.x)`` is an
eigenfunction with eigenvalue ``-|lambda|^2``, so the flow multiplies its
coefficient by ``exp(-i t |lambda|^2)``.

Potential/nonlinear flow: ``i phi_t = (V + theta |phi|^2) phi``.  ``|phi|`` is
constant along it, so the exact solution is the pointwise phase rotation
``exp(-i t (V + theta |phi_0|^2)) phi_0``, applied on the parent grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    NonIntegralSteps,
    NotRealError,
    ShapeMismatch,
    ValidationError,
)
from .lattice import COLLISION_TOL, RANK_TOL, FrequencyLattice
from .qpfield import GridField, QPState

REAL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Potential:
    """Real parent potential from a sparse list of ``(k, amplitude)`` modes."""

    lattice: FrequencyLattice
    modes: tuple
    grid_values: np.ndarray

    def parent_value(self, y) -> float:
        y = np.asarray(y, dtype=float)
        return float(sum((a * np.exp(1j * np.dot(k, y))).real for k, a in self.modes))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.grid_values)


def sine_modes(k, amplitude=1.0):
    """Modes of ``amplitude * sin(k . y)``."""
    k = tuple(int(v) for v in k)
    neg = tuple(-v for v in k)
    a = amplitude / 2j
    return [(k, a), (neg, -a)]


def cosine_modes(k, amplitude=1.0):
    """Modes of ``amplitude * cos(k . y)``."""
    k = tuple(int(v) for v in k)
    neg = tuple(-v for v in k)
    if k == neg:
        return [(k, complex(amplitude))]
    return [(k, amplitude / 2), (neg, amplitude / 2)]


def merge_modes(modes) -> tuple:
    """Sum amplitudes of repeated modes; returns a sorted tuple of pairs."""
    acc = {}
    for k, a in modes:
        k = tuple(int(v) for v in k)
        acc[k] = acc.get(k, 0j) + complex(a)
    return tuple(sorted(acc.items()))


def check_conjugate_symmetric(modes, tol=REAL_TOL) -> None:
    table = dict(merge_modes(modes))
    scale = max([abs(a) for a in table.values()] + [1.0])
    for k, a in table.items():
        partner = table.get(tuple(-v for v in k), 0j)
        if abs(partner - np.conj(a)) > tol * scale:
            raise NotRealError(
                f"mode {k} has amplitude {a} but mode {tuple(-v for v in k)} has {partner}"
            )


def build_potential(modes, lattice: FrequencyLattice) -> Potential:
    """Sample the parent potential on the lattice grid.

    Modes need not lie inside the truncated lattice: the grid values are the
    exact parent samples ``V_p(y_j)``, which is what the pointwise phase step
    consumes.
    """
    modes = merge_modes(modes)
    for k, _ in modes:
        if len(k) != lattice.n:
            raise DimensionMismatch(f"potential mode {k} does not have n={lattice.n} entries")
    check_conjugate_symmetric(modes)
    y = np.arange(2 * lattice.N) * lattice.h
    vals = np.zeros(lattice.shape, dtype=complex)
    for k, a in modes:
        if a == 0:
            continue
        term = np.array(a, dtype=complex)
        for kj in k:
            # outer product of per-axis exponentials, exact at every grid node
            term = np.multiply.outer(term, np.exp(1j * kj * y))
        vals += term
    scale = max(1.0, sum(abs(a) for _, a in modes))
    resid = np.max(np.abs(vals.imag)) if vals.size else 0.0
    if resid > REAL_TOL * scale:
        raise NotRealError(f"potential grid values have imaginary residue {resid:.2e}")
    gv = vals.real.copy()
    gv.setflags(write=False)
    return Potential(lattice=lattice, modes=modes, grid_values=gv)


def zero_potential(lattice: FrequencyLattice) -> Potential:
    return build_potential([], lattice)


def constant_potential(lattice: FrequencyLattice, v0: float) -> Potential:
    return build_potential([((0,) * lattice.n, complex(v0))], lattice)


@dataclass(frozen=True)
class SolverConfig:
    """Time step, step count, nonlinearity and truncation for one solve."""

    tau: float
    M: int
    theta: float
    N: int
    collision_tol: float = COLLISION_TOL
    rank_tol: float = RANK_TOL

    def __post_init__(self):
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise ValidationError(f"tau must be positive, got {self.tau!r}")
        if int(self.M) != self.M or self.M < 0:
            raise ValidationError(f"M must be a non-negative integer, got {self.M!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValidationError(f"N must be a positive integer, got {self.N!r}")
        if not np.isfinite(self.theta):
            raise ValidationError("theta must be finite")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "N", int(self.N))

    @property
    def T(self) -> float:
        return self.M * self.tau

    @classmethod
    def from_final_time(cls, T, tau, theta, N, **kw):
        return cls(tau=tau, M=steps_for(T, tau), theta=theta, N=N, **kw)


def steps_for(T: float, tau: float, rtol: float = 1e-9) -> int:
    """Number of steps of size ``tau`` covering ``[0, T]``; must be integral."""
    if tau <= 0:
        raise NonIntegralSteps(f"tau must be positive, got {tau!r}")
    M = round(T / tau)
    if abs(M * tau - T) > rtol * max(abs(T), tau):
        raise NonIntegralSteps(f"T/tau = {T / tau!r} is not an integer")
    return int(M)


def kinetic_phase(lattice: FrequencyLattice, tau: float) -> np.ndarray:
    """Diagonal multiplier of a kinetic half step, ``exp(-i tau/2 |P k|^2)``."""
    return np.exp(-0.5j * tau * lattice.lambda_sq)


def kinetic_half_step(s: QPState, tau: float) -> QPState:
    return QPState(s.lattice, s.coeffs * kinetic_phase(s.lattice, tau))


def phase_rotate(values: np.ndarray, v_grid: np.ndarray, theta: float, tau: float) -> np.ndarray:
    dens = values.real**2 + values.imag**2
    return values * np.exp(-1j * tau * (v_grid + theta * dens))


def nonlinear_phase_step(g: GridField, V: Potential, theta: float, tau: float) -> GridField:
    if V.grid_values.shape != g.values.shape:
        raise ShapeMismatch(
            f"potential grid {V.grid_values.shape} vs field grid {g.values.shape}"
        )
    return GridField(g.lattice, phase_rotate(g.values, V.grid_values, theta, tau))
