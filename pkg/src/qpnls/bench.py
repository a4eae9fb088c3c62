"""Experiment presets, convergence sweeps and an independent RK4 oracle."""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch, DomainError, NonFinite, ValidationError
from .integrator import evolve, max_mass_drift
from .lattice import ProjectionMatrix, build_lattice
from .operators import (
    SolverConfig,
    build_potential,
    cosine_modes,
    merge_modes,
    sine_modes,
    steps_for,
)
from .qpfield import QPState, forward_transform, l2_error, l2_norm, sample_parent

# errors below this (relative to the initial mass) are roundoff; no order is reported
KAPPA_FLOOR = 1e-13


@dataclass(frozen=True)
class ExpDecayInitial:
    """Coefficients ``exp(-sum |k_i|)`` on the box ``lo <= k_i <= hi``, zero outside.

    The rule is evaluated at the lattice modes directly, so on a lattice that
    cuts the box the state is the truncation of the full series.
    """

    lo: int = -32
    hi: int = 31

    def coefficient(self, k) -> float:
        if all(self.lo <= v <= self.hi for v in k):
            return math.exp(-sum(abs(v) for v in k))
        return 0.0

    def state(self, lattice) -> QPState:
        def rule(*ks):
            inside = np.logical_and.reduce([(k >= self.lo) & (k <= self.hi) for k in ks])
            return np.where(inside, np.exp(-sum(np.abs(k) for k in ks)), 0.0)

        return QPState.from_rule(lattice, rule)

    def spec(self) -> str:
        return f"exp_decay:{self.lo},{self.hi}"


@dataclass(frozen=True)
class GaussianInitial:
    centered: bool = False
    domain: str = "symmetric"

    def state(self, lattice) -> QPState:
        return gaussian_parent_initial(lattice, centered=self.centered, domain=self.domain)

    def spec(self) -> str:
        return "gaussian"


def gaussian_parent_initial(lattice, centered: bool = False, domain: str = "symmetric") -> QPState:
    """Interpolant of the parent Gaussian ``exp(-(y_1^2 + y_2^2) / 2)``.

    ``domain="symmetric"`` evaluates the formula on the cell ``[-pi, pi)^2``,
    i.e. the periodic field peaked at the origin.  ``domain="literal"`` uses
    ``[0, 2pi)^2``, which leaves a jump along the seam of the torus.
    ``centered=True`` moves the peak to ``(pi, pi)`` instead.
    """
    if lattice.n != 2:
        raise DimensionMismatch(f"Gaussian parent needs n = 2, lattice has n = {lattice.n}")
    if domain not in ("symmetric", "literal"):
        raise ValueError(f"unknown Gaussian domain {domain!r}")

    def fn(*ys):
        if centered:
            ys = [y - np.pi for y in ys]
        elif domain == "symmetric":
            ys = [np.where(y >= np.pi, y - 2 * np.pi, y) for y in ys]
        return np.exp(-sum(y**2 for y in ys) / 2)

    return forward_transform(sample_parent(lattice, fn))


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    P: ProjectionMatrix
    potential_modes: tuple
    initial: object
    theta: float
    T: float
    ref_tau: float
    ref_N: int
    N_time: int
    tau_list: tuple = ()
    N_list: tuple = ()

    def lattice(self, N):
        return build_lattice(self.P, N)

    def potential(self, lattice):
        return build_potential(self.potential_modes, lattice)

    def initial_state(self, lattice) -> QPState:
        return self.initial.state(lattice)


def preset_1d() -> ExperimentPreset:
    """``P = (1, sqrt 3)``, ``V = sin x + sum_{k<=4} sin(k sqrt3 x)``, theta = 10."""
    modes = sine_modes((1, 0))
    for k in range(1, 5):
        modes += sine_modes((0, k))
    return ExperimentPreset(
        name="1d",
        P=ProjectionMatrix([[1.0, math.sqrt(3.0)]]),
        potential_modes=merge_modes(modes),
        initial=ExpDecayInitial(-32, 31),
        theta=10.0,
        T=1e-3,
        ref_tau=1e-6,
        ref_N=64,
        N_time=64,
        tau_list=(1e-4, 5e-5, 2.5e-5, 1.25e-5),
        N_list=(2, 4, 8, 16, 32),
    )


PRESET_2D_KS = ((0, 1, 0, -1), (0, -1, 3, 0), (2, 0, 0, 1))


def preset_2d() -> ExperimentPreset:
    """Four-dimensional parent of a 2-D field with a three-cosine potential, theta = 1."""
    c, s = math.cos(math.pi / 6), math.sin(math.pi / 6)
    P = ProjectionMatrix([[1.0, c, s, 0.0], [0.0, s, c, 1.0]])
    modes = []
    for k in PRESET_2D_KS:
        modes += cosine_modes(k)
    return ExperimentPreset(
        name="2d",
        P=P,
        potential_modes=merge_modes(modes),
        initial=ExpDecayInitial(-16, 15),
        theta=1.0,
        T=1e-4,
        ref_tau=1e-7,
        ref_N=32,
        N_time=8,
        tau_list=(1e-4, 2e-5, 1e-5, 2e-6, 1e-6),
        N_list=(2, 4, 8, 16),
    )


PRESETS = {"1d": preset_1d, "2d": preset_2d}


def get_preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def solve(preset: ExperimentPreset, N: int, tau: float, *, theta=None, T=None, x_alpha=None):
    """One run of the splitting scheme; returns ``(final_state, records)``."""
    theta = preset.theta if theta is None else theta
    T = preset.T if T is None else T
    lat = preset.lattice(N)
    cfg = SolverConfig(tau=tau, M=steps_for(T, tau), theta=theta, N=N)
    return evolve(preset.initial_state(lat), preset.potential(lat), cfg, x_alpha=x_alpha)


def _row(preset, N, tau, theta, T):
    t0 = time.perf_counter()
    final, records = solve(preset, N, tau, theta=theta, T=T)
    return final, max_mass_drift(records), time.perf_counter() - t0


def _map_rows(jobs, args):
    if jobs is None or jobs <= 1 or len(args) <= 1:
        return [_row(*a) for a in args]
    with ProcessPoolExecutor(max_workers=min(jobs, len(args))) as pool:
        return list(pool.map(_row, *zip(*args)))


def compute_order(errors, params) -> list:
    """Observed orders ``log(e_i / e_{i+1}) / log(p_i / p_{i+1})``."""
    errors = [float(e) for e in errors]
    params = [float(p) for p in params]
    if len(errors) != len(params) or len(errors) < 2:
        raise DomainError("need two or more (error, parameter) pairs of equal length")
    if any(not e > 0 for e in errors) or any(not p > 0 for p in params):
        raise DomainError("errors and parameters must be positive")
    out = []
    for i in range(len(errors) - 1):
        if params[i] == params[i + 1]:
            raise DomainError("consecutive parameters must differ")
        out.append(math.log(errors[i] / errors[i + 1]) / math.log(params[i] / params[i + 1]))
    return out


def _orders(errors, steps, floor):
    ks = []
    for i in range(len(errors) - 1):
        if errors[i] <= floor or errors[i + 1] <= floor:
            ks.append(math.nan)
        else:
            ks.append(compute_order(errors[i : i + 2], steps[i : i + 2])[0])
    return ks


@dataclass
class ConvergenceReport:
    axis: str
    params: list
    errors: list
    orders: list
    seconds: list
    mass_drift: list = field(default_factory=list)
    reference_drift: float = 0.0

    def rows(self):
        for i, (p, e, s) in enumerate(zip(self.params, self.errors, self.seconds)):
            yield p, e, (self.orders[i - 1] if i > 0 else None), s

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["param", "err", "kappa", "seconds"])
        for p, e, k, s in self.rows():
            pstr = str(p) if isinstance(p, int) else format(p, ".17g")
            kstr = "" if k is None else format(k, ".17g")
            w.writerow([pstr, format(e, ".17g"), kstr, format(s, ".6f")])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def run_temporal_convergence(
    preset: ExperimentPreset,
    tau_list,
    N_fixed: int,
    *,
    ref_tau: float | None = None,
    theta: float | None = None,
    T: float | None = None,
    jobs: int = 1,
) -> ConvergenceReport:
    """Errors at fixed ``N`` against a fine-``tau`` reference at the same ``N``."""
    tau_list = [float(t) for t in tau_list]
    if any(a <= b for a, b in zip(tau_list, tau_list[1:])):
        raise ValueError("tau_list must be strictly decreasing")
    T = preset.T if T is None else T
    ref_tau = preset.ref_tau if ref_tau is None else ref_tau
    if ref_tau > min(tau_list) / 10 * (1 + 1e-12):
        raise ValueError(f"reference tau {ref_tau} must be <= tau_min / 10")
    for tau in tau_list + [ref_tau]:
        steps_for(T, tau)
    args = [(preset, N_fixed, tau, theta, T) for tau in [ref_tau] + tau_list]
    results = _map_rows(jobs, args)
    ref, ref_drift, _ = results[0]
    errors = [l2_error(r[0], ref) for r in results[1:]]
    floor = KAPPA_FLOOR * max(1.0, l2_norm(ref))
    return ConvergenceReport(
        axis="time",
        params=tau_list,
        errors=errors,
        orders=_orders(errors, tau_list, floor),
        seconds=[r[2] for r in results[1:]],
        mass_drift=[r[1] for r in results[1:]],
        reference_drift=ref_drift,
    )


def run_spatial_convergence(
    preset: ExperimentPreset,
    N_list,
    tau_fixed: float,
    *,
    ref_N: int | None = None,
    theta: float | None = None,
    T: float | None = None,
    measure: str = "coarse",
    jobs: int = 1,
) -> ConvergenceReport:
    """Errors at fixed ``tau`` against a fine-``N`` reference.

    ``measure="coarse"`` compares each run with the reference on the run's own
    modes; ``"union"`` zero-pads the run onto the reference lattice.
    """
    N_list = [int(n) for n in N_list]
    if any(a >= b for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be strictly increasing")
    ref_N = preset.ref_N if ref_N is None else int(ref_N)
    if ref_N < 2 * max(N_list):
        raise ValueError(f"reference N={ref_N} must be >= 2 * max(N_list)")
    args = [(preset, N, tau_fixed, theta, T) for N in [ref_N] + N_list]
    results = _map_rows(jobs, args)
    ref, ref_drift, _ = results[0]
    errors = [l2_error(r[0], ref, over=measure) for r in results[1:]]
    floor = KAPPA_FLOOR * max(1.0, l2_norm(ref))
    # order measured against the grid spacing h = pi / N
    h = [math.pi / N for N in N_list]
    return ConvergenceReport(
        axis="space",
        params=N_list,
        errors=errors,
        orders=_orders(errors, h, floor),
        seconds=[r[2] for r in results[1:]],
        mass_drift=[r[1] for r in results[1:]],
        reference_drift=ref_drift,
    )


ORACLE_MAX_SIZE = 4096


def oracle_solve(
    preset: ExperimentPreset,
    N: int,
    dt: float,
    *,
    theta: float | None = None,
    T: float | None = None,
    with_drift: bool = False,
):
    """Classical RK4 on the collocation ODE of the same spatial discretisation.

    ``dc/dt = -i |P k|^2 c - i FFT[(V_p + theta |psi|^2) psi]``, with
    ``psi = IFFT c`` on the parent grid.  The splitting scheme approximates
    this system to second order in ``tau``, so at tiny ``dt`` the result is a
    reference free of splitting error.
    """
    lat = preset.lattice(N)
    if lat.size > ORACLE_MAX_SIZE:
        raise ValueError(f"oracle limited to (2N)^n <= {ORACLE_MAX_SIZE}, got {lat.size}")
    theta = preset.theta if theta is None else theta
    T = preset.T if T is None else T
    steps = steps_for(T, dt)
    lam2 = np.asarray(lat.lambda_sq)
    v = preset.potential(lat).grid_values
    fft, ifft = np.fft.fftn, np.fft.ifftn

    def rhs(c):
        g = ifft(c, norm="forward")
        w = (v + theta * (g.real**2 + g.imag**2)) * g
        return -1j * (lam2 * c + fft(w, norm="forward"))

    c = preset.initial_state(lat).coeffs.copy()
    m0 = np.linalg.norm(c)
    drift = 0.0
    for i in range(steps):
        k1 = rhs(c)
        k2 = rhs(c + 0.5 * dt * k1)
        k3 = rhs(c + 0.5 * dt * k2)
        k4 = rhs(c + dt * k3)
        c = c + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if with_drift or i % 1000 == 999:
            if not np.all(np.isfinite(c)):
                raise NonFinite(f"oracle blew up at step {i + 1}; reduce dt")
            if with_drift and m0 > 0:
                drift = max(drift, abs(np.linalg.norm(c) - m0) / m0)
    if not np.all(np.isfinite(c)):
        raise NonFinite("oracle produced non-finite coefficients; reduce dt")
    out = QPState(lat, c)
    return (out, drift) if with_drift else out


def free_flow_preset(preset: ExperimentPreset) -> ExperimentPreset:
    """Same lattice and initial data with ``V = 0`` and ``theta = 0``."""
    return replace(preset, name=preset.name + "-free", potential_modes=(), theta=0.0)
