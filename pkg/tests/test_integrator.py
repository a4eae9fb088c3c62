import math

import numpy as np
import pytest

from qpnls.bench import preset_1d, solve
from qpnls.errors import LatticeMismatch, NonFinite
from qpnls.integrator import evolve, max_mass_drift, strang_step, write_trace_csv
from qpnls.lattice import ProjectionMatrix, build_lattice
from qpnls.operators import SolverConfig, build_potential, constant_potential, zero_potential
from qpnls.qpfield import QPState, l2_error, l2_norm

P1 = ProjectionMatrix([[1.0, math.sqrt(3.0)]])


@pytest.fixture
def lat():
    return build_lattice(P1, 4)


def test_single_step_free_flow(lat):
    k0 = (2, -1)
    cfg = SolverConfig(tau=1e-2, M=1, theta=0.0, N=4)
    out = strang_step(QPState.single_mode(lat, k0), zero_potential(lat), cfg)
    lam2 = (2 - math.sqrt(3.0)) ** 2
    assert abs(out.coefficient(k0) - np.exp(-1j * 1e-2 * lam2)) <= 1e-14


def test_single_step_constant_potential(lat):
    k0 = (-1, 1)
    v0, tau = 2.5, 3e-3
    cfg = SolverConfig(tau=tau, M=1, theta=0.0, N=4)
    out = strang_step(QPState.single_mode(lat, k0), constant_potential(lat, v0), cfg)
    lam2 = (math.sqrt(3.0) - 1) ** 2
    assert abs(out.coefficient(k0) - np.exp(-1j * tau * (lam2 + v0))) <= 1e-14


def test_free_flow_many_steps_matches_analytic(lat):
    rng = np.random.default_rng(0)
    s0 = QPState(lat, rng.normal(size=lat.shape) + 1j * rng.normal(size=lat.shape))
    cfg = SolverConfig(tau=1e-3, M=500, theta=0.0, N=4)
    out, _ = evolve(s0, zero_potential(lat), cfg)
    exact = QPState(lat, s0.coeffs * np.exp(-1j * cfg.T * lat.lambda_sq))
    assert l2_error(out, exact) <= 1e-12 * l2_norm(s0)


def test_zero_steps_returns_input(lat):
    s0 = QPState.single_mode(lat, (1, 1))
    out, records = evolve(s0, zero_potential(lat), SolverConfig(tau=1e-3, M=0, theta=1.0, N=4))
    assert out is s0
    assert [r.m for r in records] == [0]


def test_records_and_mass(lat):
    p = preset_1d()
    s0 = p.initial_state(lat)
    V = build_potential(p.potential_modes, lat)
    cfg = SolverConfig(tau=1e-4, M=20, theta=10.0, N=4)
    _, records = evolve(s0, V, cfg, x_alpha=1.0)
    assert [r.m for r in records] == list(range(21))
    assert all(r.t == r.m * 1e-4 for r in records)
    assert records[0].mass == pytest.approx(l2_norm(s0), rel=1e-15)
    assert records[-1].x_alpha is not None
    assert max_mass_drift(records) <= 1e-13


def test_mass_drift_long_run():
    p = preset_1d()
    _, records = solve(p, 16, 1e-6)
    assert len(records) == 1001
    assert max_mass_drift(records) <= 1e-12


def test_lattice_mismatch(lat):
    other = build_lattice(P1, 2)
    with pytest.raises(LatticeMismatch):
        strang_step(QPState.zeros(lat), zero_potential(other), SolverConfig(1e-3, 1, 0.0, 4))
    with pytest.raises(LatticeMismatch):
        strang_step(QPState.zeros(lat), zero_potential(lat), SolverConfig(1e-3, 1, 0.0, 2))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_blow_up_detected(lat):
    s0 = QPState.single_mode(lat, (0, 0), 1e200)
    with pytest.raises(NonFinite):
        evolve(s0, zero_potential(lat), SolverConfig(tau=1.0, M=3, theta=1e200, N=4))


def test_time_reversal(lat):
    p = preset_1d()
    s0 = p.initial_state(lat)
    V = build_potential(p.potential_modes, lat)
    cfg = SolverConfig(tau=1e-3, M=10, theta=10.0, N=4)
    fwd, _ = evolve(s0, V, cfg)
    back, _ = evolve(fwd, V, cfg, backward=True)
    assert l2_error(back, s0) <= 1e-12 * l2_norm(s0)


def test_self_convergence_second_order():
    p = preset_1d()
    errs = []
    ref, _ = solve(p, 8, 1e-3 / 64)
    for M in (4, 8, 16):
        out, _ = solve(p, 8, 1e-3 / M)
        errs.append(l2_error(out, ref))
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    for r in ratios:
        assert 3.5 < r < 4.5


def test_trace_csv(tmp_path, lat):
    _, records = evolve(QPState.single_mode(lat, (0, 0)), zero_potential(lat),
                        SolverConfig(1e-3, 2, 0.0, 4))
    write_trace_csv(records, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "m,t,mass"
    assert lines[1] == "0,0,1"
    assert len(lines) == 4
