import math

import numpy as np
import pytest
from numba import njit

from togglectl.equilibria import default_initial_state, find_equilibrium
from togglectl.integrate import CellODE, ConstantInput, PulseSchedule
from togglectl.model import AvgModelInputs, full_rhs, hill_w1
from togglectl.population import OpenLoop, simulate_population
from togglectl.ssa import (InducerTrack, ReactionNetwork, SSAError, birth_death_network,
                           build_network, cell_rng, copy_numbers, ssa_run)


def test_stoichiometry_unit_steps(p):
    net = build_network(p, 10.0)
    assert net.stoich.shape == (8, 4)
    assert np.all(np.abs(net.stoich).sum(axis=1) == 1)


def test_zero_state_only_transcription(p):
    a = build_network(p, 5.0).propensities([0, 0, 0, 0])
    assert a[0] > 0 and a[1] > 0
    assert np.all(a[2:] == 0)


def test_repressor_saturation_limit(p):
    om = 10.0
    a = build_network(p, om).propensities([0, 0, 0, 10**9])
    assert a[0] == pytest.approx(om * p.k_m0_L, rel=1e-6)


@pytest.mark.parametrize("omega", [1.0, 37.0, 1000.0])
def test_deterministic_limit(p, omega):
    x = np.array([3.0, 2.0, 400.0, 150.0])
    atc, iptg = 12.0, 0.08
    a = build_network(p, omega).propensities(np.rint(omega * x), atc, iptg) / omega
    d = full_rhs([*x, atc, iptg], atc, iptg, p)
    assert a[0] - a[2] == pytest.approx(d[0], rel=1e-12, abs=1e-12)
    assert a[1] - a[3] == pytest.approx(d[1], rel=1e-12, abs=1e-12)
    assert a[4] - a[6] == pytest.approx(d[2], rel=1e-12, abs=1e-12)
    assert a[5] - a[7] == pytest.approx(d[3], rel=1e-12, abs=1e-12)


def test_general_exponent_kernel_matches(p):
    net_sq = build_network(p, 3.0)
    net_gen = build_network(p.with_overrides(eta_LacI=2.0 + 1e-15), 3.0)
    assert net_sq.propensity is not net_gen.propensity
    x = [4, 6, 250, 90]
    np.testing.assert_allclose(net_sq.propensities(x, 5.0, 0.1),
                               net_gen.propensities(x, 5.0, 0.1), rtol=1e-12)


def test_birth_death_stationary_mean():
    k, g = 20.0, 0.2
    res = ssa_run(birth_death_network(k, g), [100], 0.0, 5000.0, ConstantInput(0, 0),
                  cell_rng(3, 0), refresh=5000.0, sample_dt=100.0)
    assert res.n_events >= 100_000
    assert res.time_integral[0] / 5000.0 == pytest.approx(k / g, rel=0.02)


def test_zero_propensity_holds_state():
    res = ssa_run(birth_death_network(0.0, 1.0), [0], 0.0, 50.0, ConstantInput(0, 0),
                  cell_rng(0, 0))
    assert res.n_events == 0
    assert np.all(res.trajectory.x[:, 0] == 0)
    assert res.trajectory.t[-1] == 50.0


def test_seed_reproducible(p):
    net = build_network(p, 1.0)
    init = copy_numbers(660.0, 63.0, p, 1.0)
    sched = PulseSchedule(50.0, 0.5, 60.0, 0.4)
    runs = [ssa_run(net, init, 0.0, 180.0, sched, cell_rng(42, 3), InducerTrack(p))
            for _ in range(2)]
    assert runs[0].n_events == runs[1].n_events
    np.testing.assert_array_equal(runs[0].trajectory.x, runs[1].trajectory.x)
    other = ssa_run(net, init, 0.0, 180.0, sched, cell_rng(42, 4), InducerTrack(p))
    assert not np.array_equal(other.trajectory.x, runs[0].trajectory.x)


def test_cell_streams_independent():
    a = cell_rng(1, 0).random(1000)
    b = cell_rng(1, 1).random(1000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.1


def test_samples_include_edges(p):
    sched = PulseSchedule(50.0, 0.5, 100.0, 0.333)
    res = ssa_run(build_network(p), copy_numbers(600, 60, p, 1.0), 0.0, 200.0, sched,
                  cell_rng(0, 0), InducerTrack(p))
    for te in (33.3, 100.0, 133.3):
        assert np.min(np.abs(res.trajectory.t - te)) < 1e-9


def test_inducer_track_exact(p):
    tr = InducerTrack(p)
    mid = tr.advance(30.0, 0.4, 10.0)
    assert mid[0] == pytest.approx(30.0 * (1 - math.exp(-p.k_in_aTc * 5.0)))
    assert tr.atc == pytest.approx(30.0 * (1 - math.exp(-p.k_in_aTc * 10.0)))
    assert tr.iptg == pytest.approx(0.4 * (1 - math.exp(-p.k_in_IPTG * 10.0)))
    level = tr.atc
    tr.advance(0.0, 0.0, 7.0)
    assert tr.atc == pytest.approx(level * math.exp(-p.k_out_aTc * 7.0))


def test_inducer_track_matches_ode(p):
    sched = PulseSchedule(50.0, 0.5, 60.0, 0.3)
    ode = CellODE(p).simulate(np.zeros(6), 0.0, 120.0, sched, tol=1e-10)
    tr = InducerTrack(p)
    t = 0.0
    for b in [18.0, 60.0, 78.0, 120.0]:
        tr.advance(*sched(0.5 * (t + b)), b - t)
        t = b
    assert tr.atc == pytest.approx(ode.final[4], rel=1e-6)
    assert tr.iptg == pytest.approx(ode.final[5], rel=1e-6)


@njit
def _negative(x, c, out):
    out[0] = -1.0


def test_bad_propensity_raises():
    net = ReactionNetwork(("n",), ("bad",), np.array([[1]], dtype=np.int64), _negative,
                          lambda a, i: np.zeros(1))
    with pytest.raises(SSAError, match="invalid propensity"):
        ssa_run(net, [0], 0.0, 1.0, ConstantInput(0, 0), cell_rng(0, 0))


def test_omega_must_be_positive(p):
    with pytest.raises(ValueError):
        build_network(p, 0.0)


def _saturated_laci(p, rp):
    a = AvgModelInputs(hill_w1(100.0, p), 1.0, 1.0, 1.0)  # aTc held on
    x = find_equilibrium(a, rp, (rp.k1_0 + rp.k1, rp.k2_0))
    return x[0] * p.theta_LacI


def test_mean_field_omega_100(p):
    """Ensemble mean of 200 runs tracks the ODE within 10% after the transient."""
    om, n, horizon = 100.0, 200, 60.0
    x0 = default_initial_state(p)
    sched = ConstantInput(100.0, 0.0)
    det = CellODE(p).simulate(x0, 0.0, horizon, sched)
    net = build_network(p, om)
    init = np.rint(x0[:4] * om).astype(np.int64)
    mean = np.zeros(len(det.t))
    for i in range(n):
        res = ssa_run(net, init, 0.0, horizon, sched, cell_rng(11, i), InducerTrack(p))
        mean += res.trajectory.x[:, 2] / n
    late = det.t >= 30.0
    rel = np.abs(mean[late] - det.x[late, 2]) / det.x[late, 2]
    assert rel.max() < 0.10


def test_population_saturating_atc(p, rp):
    res = simulate_population(16, p, OpenLoop(ConstantInput(100.0, 0.0), 120.0), 720.0,
                              kind="ssa", seed=5, init=default_initial_state(p))
    final = np.array([tr.final[2] for tr in res.trajectories])
    target = _saturated_laci(p, rp)
    assert final.mean() == pytest.approx(target, rel=0.2)
    assert np.all(final > 0.5 * target)
