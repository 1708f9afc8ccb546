import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from togglectl.model import (ATC, IPTG, LACI, TETR, AvgModelInputs, ModelParams, PulseWaveSpec,
                             avg_rhs, from_reduced, full_rhs, get_params, hill_w1, hill_w2,
                             output_map, pulse_inputs, qss_rhs, reduce_params, state_scaling)

# Table I, typed in independently of ModelParams
K_M0_L, K_M0_T, K_M_L, K_M_T = 3.20e-2, 1.19e-1, 8.30, 2.06
K_P_L, K_P_T, G_M, G_P = 9.726e-1, 1.170, 1.386e-1, 1.65e-2
TH_L, TH_T = 31.94, 30.00


def test_defaults_match_table(p):
    assert (p.k_m0_L, p.k_m0_T, p.k_m_L, p.k_m_T) == (K_M0_L, K_M0_T, K_M_L, K_M_T)
    assert (p.k_p_L, p.k_p_T, p.g_m_L, p.g_m_T) == (K_P_L, K_P_T, G_M, G_M)
    assert (p.theta_LacI, p.theta_TetR, p.theta_aTc, p.theta_IPTG) == (TH_L, TH_T, 11.65, 0.0906)
    assert (p.k_in_aTc, p.k_out_aTc, p.k_in_IPTG, p.k_out_IPTG) == (0.162, 0.02, 0.0275, 0.111)
    assert p.k_RFP == p.k_GFP == 1.0
    assert get_params("lugagne2017") == p


@pytest.mark.parametrize("field,value", [("g_p_L", 0.0), ("theta_aTc", -1.0), ("eta_LacI", 0.5),
                                         ("k_m_T", math.nan)])
def test_invalid_params_rejected(field, value):
    with pytest.raises(ValueError, match=field):
        ModelParams().with_overrides(**{field: value})


def test_unknown_parameter_set():
    with pytest.raises(KeyError):
        get_params("nope")


def test_hill_examples(p):
    assert hill_w1(0.0, p) == 1.0
    assert hill_w2(0.0, p) == 1.0
    assert hill_w1(11.65, p) == pytest.approx(0.25, rel=1e-12)
    assert hill_w2(0.0906, p) == pytest.approx(0.25, rel=1e-12)
    assert hill_w1(50.0, p) == pytest.approx((1 + (50 / 11.65) ** 2) ** -2, rel=1e-12)
    assert hill_w1(50.0, p) == pytest.approx(2.652e-3, rel=1e-3)
    assert hill_w2(0.5, p) == pytest.approx(1.011e-3, rel=1e-3)


def test_hill_rejects_negative(p):
    with pytest.raises(ValueError):
        hill_w1(-1.0, p)
    with pytest.raises(ValueError):
        hill_w2(-1e-9, p)


@given(st.floats(0, 1e3), st.floats(1e-6, 1e3))
def test_hill_monotone_in_unit_interval(a, da):
    p = ModelParams()
    for f in (hill_w1, hill_w2):
        lo, hi = f(a + da, p), f(a, p)
        assert 0 < lo <= hi <= 1
        if hi > 1e-12:
            assert lo < hi


def test_reduce_params_oracle(rp):
    assert rp.k1_0 == pytest.approx(K_M0_L * K_P_L / (G_M * TH_L * G_P), rel=1e-12)
    assert rp.k1 == pytest.approx(K_M_L * K_P_L / (G_M * TH_L * G_P), rel=1e-12)
    assert rp.k2_0 == pytest.approx(K_M0_T * K_P_T / (G_M * TH_T * G_P), rel=1e-12)
    assert rp.k2 == pytest.approx(K_M_T * K_P_T / (G_M * TH_T * G_P), rel=1e-12)
    assert (round(rp.k1_0, 4), round(rp.k1, 1), round(rp.k2_0, 3), round(rp.k2, 2)) == \
        (0.4261, 110.5, 2.029, 35.13)
    assert rp.g_p == G_P


def test_reduce_params_scaling_invariance(p, rp):
    c = 3.7
    q = p.with_overrides(k_m0_L=c * p.k_m0_L, k_m_L=c * p.k_m_L, k_m0_T=c * p.k_m0_T,
                         k_m_T=c * p.k_m_T, g_p_L=c * p.g_p_L, g_p_T=c * p.g_p_T)
    rq = reduce_params(q)
    for name in ("k1_0", "k1", "k2_0", "k2"):
        assert getattr(rq, name) == pytest.approx(getattr(rp, name), rel=1e-12)


def test_reduce_params_theta_linearity(p, rp):
    rq = reduce_params(p.with_overrides(theta_LacI=2 * p.theta_LacI))
    assert rq.k1_0 == pytest.approx(rp.k1_0 / 2, rel=1e-12)
    assert rq.k1 == pytest.approx(rp.k1 / 2, rel=1e-12)
    assert (rq.k2_0, rq.k2) == (rp.k2_0, rp.k2)


def test_reduce_params_requires_common_decay(p):
    with pytest.raises(ValueError, match="g_p"):
        reduce_params(p.with_overrides(g_p_T=0.02))


def test_full_rhs_inducer_charging(p):
    s = np.zeros(6)
    d = full_rhs(s, 20.0, 0.3, p)
    assert d[ATC] == pytest.approx(p.k_in_aTc * 20.0)
    assert d[IPTG] == pytest.approx(p.k_in_IPTG * 0.3)


def test_full_rhs_efflux_branch_at_equality(p):
    s = np.zeros(6)
    s[ATC] = 5.0
    assert full_rhs(s, 5.0, 0.0, p)[ATC] == 0.0
    s[ATC] = 6.0
    assert full_rhs(s, 5.0, 0.0, p)[ATC] == pytest.approx(-p.k_out_aTc * 1.0)


def test_full_rhs_laci_equilibrium_without_repressor(p):
    m = (K_M0_L + K_M_L) / G_M
    laci = K_P_L * m / G_P
    s = np.array([m, 0.0, laci, 0.0, 0.0, 0.0])
    d = full_rhs(s, 0.0, 0.0, p)
    assert d[0] == pytest.approx(0.0, abs=1e-12)
    assert d[LACI] == pytest.approx(0.0, abs=1e-9)


def test_full_rhs_rejects_nonfinite(p):
    with pytest.raises(ValueError):
        full_rhs([0, 0, math.inf, 0, 0, 0], 0.0, 0.0, p)


@settings(max_examples=50)
@given(st.lists(st.floats(0, 1e3), min_size=6, max_size=6), st.integers(0, 5),
       st.floats(0, 100), st.floats(0, 1))
def test_full_rhs_keeps_nonnegative_orthant(s, zero, ua, ui):
    s = np.array(s)
    s[zero] = 0.0
    assert full_rhs(s, ua, ui, ModelParams())[zero] >= 0.0


def test_qss_matches_full_protein_block(p, rp):
    rng = np.random.default_rng(7)
    for _ in range(100):
        laci, tetr = rng.uniform(0, 2000, 2)
        atc, iptg = rng.uniform(0, 100), rng.uniform(0, 1)
        m_l = (p.k_m0_L + p.k_m_L / (1 + (tetr / p.theta_TetR / (1 + (atc / p.theta_aTc) ** 2)) ** 2)) / p.g_m_L
        m_t = (p.k_m0_T + p.k_m_T / (1 + (laci / p.theta_LacI / (1 + (iptg / p.theta_IPTG) ** 2)) ** 2)) / p.g_m_T
        d = full_rhs([m_l, m_t, laci, tetr, atc, iptg], atc, iptg, p)
        want = np.array([d[LACI] / p.theta_LacI, d[TETR] / p.theta_TetR]) / rp.g_p
        got = qss_rhs((laci / p.theta_LacI, tetr / p.theta_TetR), hill_w1(atc, p),
                      hill_w2(iptg, p), rp)
        assert np.max(np.abs(got - want)) < 1e-9


def test_qss_examples(rp):
    np.testing.assert_allclose(qss_rhs((0, 0), 1, 1, rp), [rp.k1_0 + rp.k1, rp.k2_0 + rp.k2])
    d = qss_rhs((1e9, 4.0), 1, 1, rp)
    assert d[1] == pytest.approx(rp.k2_0 - 4.0, abs=1e-9)


def test_qss_rejects_nonfinite(rp):
    with pytest.raises(ValueError):
        qss_rhs((math.nan, 1.0), 1, 1, rp)


def test_avg_rhs_endpoints(p, rp):
    w1, w2 = hill_w1(50, p), hill_w2(0.5, p)
    x = (3.0, 7.0)
    np.testing.assert_allclose(avg_rhs(x, AvgModelInputs(w1, w2, 2.0, 0.0), rp),
                               2.0 * qss_rhs(x, 1.0, w2, rp))
    np.testing.assert_allclose(avg_rhs(x, AvgModelInputs(w1, w2, 2.0, 1.0), rp),
                               2.0 * qss_rhs(x, w1, 1.0, rp))


@given(st.floats(0, 1), st.floats(0, 50), st.floats(0, 50))
def test_avg_rhs_unit_weights_reduce_to_qss(d, x1, x2):
    rp = reduce_params(ModelParams())
    np.testing.assert_allclose(avg_rhs((x1, x2), AvgModelInputs(1.0, 1.0, 3.0, d), rp),
                               3.0 * qss_rhs((x1, x2), 1.0, 1.0, rp), rtol=1e-12, atol=1e-12)


def test_avg_inputs_from_amplitudes(p):
    a = AvgModelInputs.from_amplitudes(35, 0.35, 240.0, 0.4, p)
    assert a.epsilon == pytest.approx(240.0 * 0.0165)
    assert (a.w1_bar, a.w2_bar, a.duty) == (hill_w1(35, p), hill_w2(0.35, p), 0.4)


def test_pulse_inputs_examples():
    spec = PulseWaveSpec(50.0, 0.5, 240.0, 0.25)
    assert pulse_inputs(30.0, spec) == (50.0, 0.0)
    assert pulse_inputs(90.0, spec) == (0.0, 0.5)
    assert pulse_inputs(240.0 + 30.0, spec) == (50.0, 0.0)
    for t in np.linspace(0, 1000, 101):
        assert pulse_inputs(t, PulseWaveSpec(50.0, 0.5, 240.0, 0.0)) == (0.0, 0.5)
        assert pulse_inputs(t, PulseWaveSpec(50.0, 0.5, 240.0, 1.0)) == (50.0, 0.0)


@given(st.floats(0, 1e4), st.floats(0.01, 0.99))
def test_pulse_inputs_mutually_exclusive(t, d):
    ua, ui = pulse_inputs(t, PulseWaveSpec(50.0, 0.5, 240.0, d))
    assert ua * ui == 0.0 and ua + ui > 0


def test_pulse_spec_validation():
    with pytest.raises(ValueError):
        PulseWaveSpec(50.0, 0.5, 240.0, 1.5)
    with pytest.raises(ValueError):
        PulseWaveSpec(50.0, 0.5, 0.0, 0.5)


def test_output_map(p):
    s = np.array([0, 0, 750.0, 300.0, 0, 0])
    assert output_map(s, p) == (750.0, 300.0)
    assert output_map(s, p.with_overrides(k_GFP=2.0))[1] == 600.0
    assert output_map(np.zeros(6), p)[0] == 0.0


def test_state_scaling(p):
    x = state_scaling(750, 300, p)
    assert x.x1 == pytest.approx(23.4821, abs=1e-3)
    assert x.x2 == pytest.approx(10.0002, abs=1e-3)
    assert tuple(state_scaling(0, 0, p)) == (0.0, 0.0)
    assert tuple(state_scaling(p.theta_LacI, p.theta_TetR, p)) == (1.0, 1.0)
    back = from_reduced(state_scaling(123.4, 56.7, p), p)
    assert back[0] == pytest.approx(123.4, rel=1e-12)
    assert back[1] == pytest.approx(56.7, rel=1e-12)
