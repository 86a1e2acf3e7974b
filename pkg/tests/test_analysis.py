import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import ndtri
from scipy.stats import norm

from hrmsim import analysis
from hrmsim.analysis import (
    PepStats,
    abep_union,
    envelope_moments,
    hypothesis_noise,
    laguerre_half,
    mutual_information,
    pep_asymptotic,
    pep_exact,
    pep_upper,
    sample_sigma_moments,
    sigma_stats,
)
from hrmsim.channel import LinkGeometry, RisLayout
from hrmsim.modem import HrmConfig
from hrmsim.simkit import SweepSpec, TrialPolicy, run_ber
from hrmsim.units import dbm_to_watt

GEOM = LinkGeometry()


def laguerre_oracle(K):
    mpmath.mp.dps = 40
    return mpmath.laguerre(mpmath.mpf(1) / 2, 0, -mpmath.mpf(K))


def q_expectation(mu, s2, snr, n=400_000):
    """Stratified sample mean of Q(sqrt(snr * Sigma^2 / 2)) with Sigma ~ N(mu, s2)."""
    u = (np.arange(n) + 0.5) / n
    sigma = mu + math.sqrt(s2) * ndtri(u)
    return float(np.mean(norm.sf(np.sqrt(snr * sigma**2 / 2.0))))


@pytest.mark.parametrize("K", [0.0, 0.3, 1.0, 2.5, 10.0, 40.0, 200.0])
def test_laguerre_half_matches_high_precision(K):
    assert laguerre_half(K) == pytest.approx(float(laguerre_oracle(K)), rel=1e-10)


def test_laguerre_half_limits():
    assert laguerre_half(0.0) == 1.0
    # large-K growth 2 sqrt(K / pi)
    assert laguerre_half(1e6) == pytest.approx(2 * math.sqrt(1e6 / math.pi), rel=1e-5)
    with pytest.raises(ValueError):
        laguerre_half(-1.0)


def test_rayleigh_envelope_moments():
    m = envelope_moments(0.0, 2.0)
    assert m.mean == pytest.approx(math.sqrt(math.pi * 2.0) / 2)
    assert m.variance == pytest.approx(2.0 * (1 - math.pi / 4))


@given(st.floats(0.0, 100.0), st.floats(1e-12, 1e3))
def test_envelope_second_moment_identity(K, L):
    m = envelope_moments(K, L)
    assert m.mean**2 + m.variance == pytest.approx(L, rel=1e-10)
    assert m.variance > 0


def test_sigma_stats_formulas():
    mu_hg, var_hg = analysis.product_moments(GEOM)
    st_r = sigma_stats(0, 1, 8, 10.0, GEOM)
    assert st_r.delta == -8
    assert st_r.mu_sigma == pytest.approx(9.0 * 8 * mu_hg)
    assert st_r.sigma_sigma2 == pytest.approx(81.0 * 8 * var_hg)
    st_p = sigma_stats(1, 0, 8, 10.0, GEOM, variant="published")
    assert st_p.sigma_sigma2 == pytest.approx(99.0 * 8 * var_hg)
    with pytest.raises(ValueError):
        sigma_stats(0, 1, 8, 10.0, GEOM, variant="other")


def test_sample_moments_select_rederived_variance(rng):
    lay = RisLayout(N=64, G=2)
    mean, var = sample_sigma_moments(1, 0, lay, 10.0, GEOM, 400_000, rng)
    r = sigma_stats(1, 0, 32, 10.0, GEOM, "rederived")
    p = sigma_stats(1, 0, 32, 10.0, GEOM, "published")
    assert mean == pytest.approx(r.mu_sigma, rel=0.005)
    assert var == pytest.approx(r.sigma_sigma2, rel=0.02)
    assert abs(var / p.sigma_sigma2 - 1) > 0.1


def test_pep_degenerate_is_half():
    st0 = PepStats(mu_sigma=0.0, sigma_sigma2=0.0, delta=1)
    assert pep_exact(st0, 1.0, 1.0) == pytest.approx(0.5, abs=1e-14)
    assert pep_upper(st0, 1.0, 1.0) == pytest.approx(0.5, abs=1e-14)


@pytest.mark.parametrize("mu, s2, snr", [(1.0, 0.2, 1.0), (1.0, 0.05, 20.0), (0.5, 0.3, 50.0), (2.0, 1.0, 4.0)])
def test_pep_exact_matches_q_expectation(mu, s2, snr):
    st0 = PepStats(mu_sigma=mu, sigma_sigma2=s2, delta=1)
    assert pep_exact(st0, snr, 1.0) == pytest.approx(q_expectation(mu, s2, snr), rel=1e-3)


def test_displayed_constants_miss_the_q_expectation():
    st0 = PepStats(mu_sigma=1.0, sigma_sigma2=0.05, delta=1)
    truth = q_expectation(1.0, 0.05, 20.0)
    assert abs(pep_exact(st0, 20.0, 1.0, s_scale=2.0) / truth - 1) > 0.5
    assert abs(pep_exact(st0, 20.0, 1.0, mgf="published") / truth - 1) > 0.05


@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(1e-3, 1e3), st.floats(1.01, 10.0))
def test_pep_monotone_in_snr_and_mean(mu, s2, snr, factor):
    st0 = PepStats(mu_sigma=mu, sigma_sigma2=s2, delta=1)
    st1 = PepStats(mu_sigma=mu * factor + 1e-3, sigma_sigma2=s2, delta=1)
    assert pep_exact(st0, snr * factor, 1.0) <= pep_exact(st0, snr, 1.0) + 1e-15
    assert pep_exact(st1, snr, 1.0) <= pep_exact(st0, snr, 1.0) + 1e-15


def test_upper_bound_dominates_exact(rng):
    n = 10_000
    mu = rng.uniform(0, 5, n)
    s2 = rng.uniform(0, 5, n)
    snr = 10 ** rng.uniform(-3, 3, n)
    for form in ("real", "published"):
        exact = np.array([pep_exact(PepStats(a, b, 1), c, 1.0, mgf=form) for a, b, c in zip(mu, s2, snr)])
        upper = np.array([pep_upper(PepStats(a, b, 1), c, 1.0, mgf=form) for a, b, c in zip(mu, s2, snr)])
        assert np.all(upper >= exact - 1e-15)
        assert np.all(upper <= 0.5) and np.all(exact <= 0.5 + 1e-12)


def test_upper_over_exact_ratio_settles_at_high_snr():
    st0 = PepStats(mu_sigma=1.0, sigma_sigma2=0.3, delta=1)
    snr = np.logspace(1, 5, 9)
    ratio = pep_upper(st0, snr, 1.0) / pep_exact(st0, snr, 1.0)
    assert np.all(ratio >= 1.0)
    assert ratio[-1] == pytest.approx(ratio[-2], rel=0.01)


def test_quadrature_converges():
    for N, pt in ((32, 30.0), (64, 20.0), (256, 0.0), (512, -10.0)):
        P_t = dbm_to_watt(pt)
        st0 = sigma_stats(1, 0, N // 2, 10.0, GEOM)
        n0 = hypothesis_noise(HrmConfig(P_t=P_t), 10.0, N // 2, GEOM.L_r)(1)
        assert abs(pep_exact(st0, P_t, n0, nodes=64) - pep_exact(st0, P_t, n0, nodes=256)) < 1e-10


def test_pep_rejects_bad_inputs():
    st0 = PepStats(1.0, 1.0, 1)
    with pytest.raises(ValueError):
        pep_exact(st0, 1.0, 0.0)
    with pytest.raises(ValueError):
        pep_exact(st0, 1.0, 1.0, mgf="other")


def test_asymptotic_pep():
    with pytest.raises(ValueError):
        pep_asymptotic(1.0, 1e-12, GEOM, 10.0, 0)
    # K = 0: Laguerre terms are 1 and the expression reduces to elementary factors
    P_t, N0, p, d = 1e-3, 1e-12, 10.0, 32
    snr = P_t / (4 * N0)
    c = math.pi**2 / 16
    expected = (snr * GEOM.L_t * GEOM.L_r * (p**2 * d - d) * (1 - c) ** -0.5
                * math.exp(-(math.pi**2) * (p - 1) ** 2 * d / (16 - math.pi**2 * (p**2 - 1))))
    assert pep_asymptotic(P_t, N0, GEOM, p, d) == pytest.approx(expected, rel=1e-12)
    assert pep_asymptotic(P_t, N0, GEOM, p, -d) == pytest.approx(expected, rel=1e-12)


def test_asymptotic_vs_upper_recorded_on_sweep():
    p, S = 10.0, 32
    st0 = sigma_stats(1, 0, S, p, GEOM)
    P_t = dbm_to_watt(np.arange(-10.0, 31.0, 10.0))
    n0 = 1e-12
    asym = pep_asymptotic(P_t, n0, GEOM, p, S)
    up = pep_upper(st0, P_t, n0)
    rel = asym / up - 1
    assert np.all(np.isfinite(rel))
    # the published leading factor grows with P_t, so the deviation grows too
    assert np.all(np.diff(asym) > 0)


def test_union_bound_g2_equals_single_pep():
    cfg = HrmConfig(P_t=dbm_to_watt(10.0))
    n0 = hypothesis_noise(cfg, 10.0, 32, GEOM.L_r, 2)
    single = pep_exact(sigma_stats(0, 1, 32, 10.0, GEOM), cfg.P_t, n0(0))
    other = pep_exact(sigma_stats(1, 0, 32, 10.0, GEOM), cfg.P_t, n0(1))
    assert abep_union(2, 32, 10.0, GEOM, cfg.P_t, n0) == pytest.approx(0.5 * (single + other), rel=1e-14)
    assert abep_union(2, 32, 10.0, GEOM, cfg.P_t, 1e-12) == pytest.approx(
        pep_exact(sigma_stats(1, 0, 32, 10.0, GEOM), cfg.P_t, 1e-12), rel=1e-14)


def test_union_bound_zero_when_peps_vanish(monkeypatch):
    monkeypatch.setattr(analysis, "pep_exact", lambda *a, **k: 0.0)
    assert abep_union(8, 8, 10.0, GEOM, 1.0, 1e-12) == 0.0


def test_hypothesis_noise_policies():
    cfg = HrmConfig(P_t=1.0)
    f = hypothesis_noise(cfg, 10.0, 16, GEOM.L_r, 4)
    assert f(0) == pytest.approx(1e-12)
    assert f(2) == pytest.approx(100 * 32 * GEOM.L_r * 1e-12 + 1e-12)
    w = hypothesis_noise(cfg, 10.0, 16, GEOM.L_r, 4, policy="worst")
    assert w(0) == w(3) == pytest.approx(f(3))
    with pytest.raises(ValueError):
        hypothesis_noise(cfg, 10.0, 16, GEOM.L_r, policy="worst")


@pytest.mark.parametrize("pt", [20.0, 22.0])
def test_union_bound_g4_brackets_simulation(pt):
    lay = RisLayout(N=64, G=4)
    spec = SweepSpec(scheme="hrm", axis="P_t", values=(pt,), layout=lay,
                     policy=TrialPolicy(target_errors=400))
    mc = run_ber(spec, 11)[0]
    assert mc.ber <= 1e-3
    cfg = HrmConfig(P_t=dbm_to_watt(pt))
    bound = abep_union(4, 16, 10.0, GEOM, cfg.P_t, hypothesis_noise(cfg, 10.0, 16, GEOM.L_r, 4))
    assert 1.0 <= bound / mc.ber <= 4.0


def test_mi_noise_limits(rng):
    loud = HrmConfig(P_t=1e-3, sigma_dy2=1.0, sigma_st2=1.0)
    quiet = HrmConfig(P_t=1e-3, sigma_dy2=1e-30, sigma_st2=1e-30)
    assert mutual_information(4, 16, 10.0, GEOM, loud, 4000, rng).value < 0.01
    assert mutual_information(4, 16, 10.0, GEOM, quiet, 4000, rng).value == pytest.approx(2.0, abs=1e-6)


def test_mi_estimators_agree(rng):
    cfg = HrmConfig(P_t=dbm_to_watt(5.0))
    a = mutual_information(2, 32, 10.0, GEOM, cfg, 40_000, rng)
    b = mutual_information(2, 32, 10.0, GEOM, cfg, 40_000, rng, estimator="direct")
    assert a.stderr < b.stderr
    assert abs(a.value - b.value) < 3 * math.hypot(a.stderr, b.stderr)


def test_mi_increases_along_power_grid():
    values = []
    for pt in np.arange(-10.0, 21.0, 5.0):
        est = mutual_information(4, 16, 10.0, GEOM, HrmConfig(P_t=dbm_to_watt(pt)), 5_000,
                                 np.random.default_rng(int(pt) + 100))
        assert 0.0 <= est.value <= 2.0
        values.append(est)
    for a, b in zip(values, values[1:]):
        assert b.value >= a.value - 2 * math.hypot(a.stderr, b.stderr)


def test_mi_rejects_empty_sample(rng):
    with pytest.raises(ValueError):
        mutual_information(2, 8, 10.0, GEOM, HrmConfig(P_t=1.0), 0, rng)
