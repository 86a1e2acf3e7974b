import numpy as np
import pytest
from hypothesis import given, strategies as st

from hrmsim.channel import LinkGeometry, RisLayout, gen_channels
from hrmsim.errors import ConfigurationError
from hrmsim.modem import HrmConfig, levels
from hrmsim.power import PowerModel, energy_efficiency, instantaneous_snr, ris_power, total_power

MODEL = PowerModel.published_defaults()


def test_published_constants_in_watts():
    table = dict(MODEL.conversion_table())
    assert table["P_c"] == pytest.approx(10 ** 4.5)
    assert table["P_p"] == pytest.approx(5e-3)
    assert table["P_st"] == pytest.approx(10 ** 0.5)
    assert table["P_dy"] == pytest.approx(1.0)
    assert table["B_W"] == 10e6


def test_passive_power():
    assert ris_power(MODEL, "passive", 256, 0.0) == pytest.approx(1.28)
    assert ris_power(MODEL, "passive", 256, 5.0) == ris_power(MODEL, "passive", 256, 0.0)


def test_hybrid_power_even_split():
    N, P_A = 64, 0.01
    expected = P_A / 0.5 + 32 * (1.0 + 5e-3) + 10 ** 0.5
    assert ris_power(MODEL, "hybrid", N, P_A) == pytest.approx(expected)


def test_hybrid_degenerates_to_passive():
    m = PowerModel(P_c=0.0, P_p=5e-3, P_st=0.0, P_dy=1.0, eps1=0, eps2=100)
    assert ris_power(m, "hybrid", 100, 0.0) == pytest.approx(ris_power(m, "passive", 100, 0.0))


def test_hybrid_split_must_cover_surface():
    m = PowerModel(P_c=0.0, P_p=5e-3, P_st=0.0, P_dy=1.0, eps1=10, eps2=10)
    with pytest.raises(ConfigurationError):
        ris_power(m, "hybrid", 64, 0.0)
    with pytest.raises(ConfigurationError):
        ris_power(MODEL, "other", 64, 0.0)


def test_active_power_linear_in_n():
    assert ris_power(MODEL, "active", 512, 0.1) - ris_power(MODEL, "active", 256, 0.1) == pytest.approx(256 * 1.0)


@given(st.integers(2, 4096), st.floats(0.0, 10.0))
def test_power_ordering(N, P_A):
    passive = ris_power(MODEL, "passive", N, P_A)
    hybrid = ris_power(MODEL, "hybrid", N, P_A)
    active = ris_power(MODEL, "active", N, P_A)
    assert passive <= hybrid <= active
    slope = (ris_power(MODEL, "active", N + 1, P_A) - ris_power(MODEL, "passive", N + 1, P_A)) - (active - passive)
    assert slope == pytest.approx(MODEL.P_dy - MODEL.P_p)


def test_total_power():
    zero = PowerModel(P_c=0.0, P_p=0.0, P_st=0.0, P_dy=0.0)
    assert total_power(0.0, zero, 0.0) == 0.0
    assert total_power(1.0, zero, 0.0) == pytest.approx(2.0)
    # hybrid, N = 512, P_A = 10 dBm, P_t = 30 dBm with the published constants
    ris = 0.01 / 0.5 + 256 * 1.0 + 256 * 5e-3 + 10 ** 0.5
    expected = 1.0 / 0.5 + ris + 10 ** 4.5
    assert total_power(1.0, MODEL, ris_power(MODEL, "hybrid", 512, 0.01)) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(31885.2, rel=1e-5)


def test_model_validation():
    with pytest.raises(ConfigurationError):
        PowerModel(P_c=1.0, P_p=1.0, P_st=1.0, P_dy=1.0, tau_t=0.0)
    with pytest.raises(ConfigurationError):
        PowerModel(P_c=-1.0, P_p=1.0, P_st=1.0, P_dy=1.0)


def test_snr_passive_state(rng):
    lay = RisLayout(N=32, G=2)
    ch = gen_channels(LinkGeometry(), lay, rng)
    cfg = HrmConfig(P_t=0.1)
    H0 = ch.products.sum()
    assert instantaneous_snr(ch, lay, cfg, 10.0, 0) == pytest.approx(0.1 * H0**2 / 1e-12)


def test_snr_active_state(rng):
    lay = RisLayout(N=32, G=4)
    ch = gen_channels(LinkGeometry(), lay, rng)
    cfg = HrmConfig(P_t=0.1)
    H = levels(ch.products, (0, 8, 16, 24), 10.0)
    g2 = np.sum(np.abs(ch.g[:16]) ** 2)
    assert instantaneous_snr(ch, lay, cfg, 10.0, 2) == pytest.approx(0.1 * H[2] ** 2 / (100 * g2 * 1e-12 + 1e-12))


def test_snr_rejects_noise_free_link(rng):
    lay = RisLayout(N=8, G=2)
    ch = gen_channels(LinkGeometry(), lay, rng)
    with pytest.raises(ValueError):
        instantaneous_snr(ch, lay, HrmConfig(P_t=1.0, sigma_dy2=0.0, sigma_st2=0.0), 10.0, 0)


def test_mean_snr_regression(rng):
    # E[gamma_0] = P_t E[H0^2] / sigma_st2 with E[H0^2] = N L_t L_r + N (N - 1) (pi/4)^2 L_t L_r
    geom = LinkGeometry()
    lay = RisLayout(N=64, G=2)
    ch = gen_channels(geom, lay, rng, 100_000)
    gamma = instantaneous_snr(ch, lay, HrmConfig(P_t=1e-3), 10.0, np.zeros(100_000, dtype=int))
    L = geom.L_t * geom.L_r
    expected = 1e-3 * (64 * L + 64 * 63 * (np.pi / 4) ** 2 * L) / 1e-12
    assert gamma.mean() == pytest.approx(expected, rel=0.01)


def test_energy_efficiency_values():
    assert energy_efficiency(10e6, 5.0, 0.0) == 0.0
    assert energy_efficiency(10e6, 1e7, 1.0) == pytest.approx(1.0)


@given(st.floats(1e-3, 1e6), st.floats(1e-3, 1e6), st.floats(1.001, 10.0))
def test_energy_efficiency_monotone(P, gamma, f):
    assert energy_efficiency(1e7, P * f, gamma) < energy_efficiency(1e7, P, gamma)
    assert energy_efficiency(1e7, P, gamma * f) > energy_efficiency(1e7, P, gamma)
