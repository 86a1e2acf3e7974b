"""Deterministic Monte Carlo engine: BER, achievable-rate and energy-efficiency sweeps.

Reproducibility
---------------
Trials are processed in fixed-size blocks.  Block ``b`` of sweep point ``i``
draws from a Philox (counter-based) generator keyed by
``SeedSequence(master_seed, spawn_key=(i, b))``, so results depend only on
``(spec, master_seed)``.  Blocks may be evaluated concurrently, but they are
reduced in block order and the stopping rule is applied on that ordered
prefix, which makes error counts independent of the number of workers.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import logging
import math
import time
import warnings

import numpy as np

from hrmsim import modem
from hrmsim.analysis import mutual_information
from hrmsim.channel import LinkGeometry, RisLayout, gen_envelopes
from hrmsim.errors import ConfigurationError, LowGainWarning
from hrmsim.modem import HrmConfig, as_realization
from hrmsim.power import PowerModel, energy_efficiency, instantaneous_snr, ris_power, total_power
from hrmsim.units import dbm_to_watt

log = logging.getLogger(__name__)

SCHEMES = ("hrm", "fhrm", "hrm_psk", "passive_psk", "active_psk", "rm")
AXES = ("P_t", "N", "G", "spacing")
_G_FREE = ("fhrm", "passive_psk", "active_psk")
ENERGY_MODES = {"fhrm": "hybrid", "active_psk": "active", "passive_psk": "passive"}
Z95 = 1.959963984540054


@dataclass(frozen=True)
class TrialPolicy:
    """Stop a point at ``target_errors`` bit errors or ``max_trials`` symbols, whichever first.

    ``min_ber > 0`` ends a sweep early once a point falls below it.
    """

    target_errors: int = 100
    max_trials: int = 10**8
    block_size: int = 8192
    min_ber: float = 0.0

    def __post_init__(self):
        if self.target_errors < 1 or self.max_trials < 1 or self.block_size < 1:
            raise ConfigurationError("trial policy values must be positive", key="sweep")


@dataclass(frozen=True)
class SweepSpec:
    """One curve: a scheme, the swept axis and every fixed parameter.

    Axis values: ``P_t`` in dBm, ``N`` / ``G`` as integers, ``spacing`` as
    the element size ``d_h = d_v`` in meters (correlated layouts only).
    """

    scheme: str
    axis: str
    values: tuple
    geometry: LinkGeometry = field(default_factory=LinkGeometry)
    layout: RisLayout = field(default_factory=lambda: RisLayout(N=64, G=2))
    cfg: HrmConfig = field(default_factory=lambda: HrmConfig(P_t=1.0, gain_override=10.0))
    M: int = 1
    detector: str = "simple"
    policy: TrialPolicy = field(default_factory=TrialPolicy)
    power: PowerModel | None = None
    samples: int = 100_000
    fhrm_snr: str = "max"
    n0_policy: str = "transmitted"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}", key="scheme")
        if self.axis not in AXES:
            raise ConfigurationError(f"unknown axis {self.axis!r}; expected one of {AXES}", key="sweep.axis")
        if not self.values:
            raise ConfigurationError("sweep grid is empty", key="sweep.values")
        if list(self.values) != sorted(self.values):
            raise ConfigurationError("sweep grid must be sorted ascending", key="sweep.values")
        if self.axis == "G" and self.scheme in _G_FREE:
            raise ConfigurationError(f"scheme {self.scheme!r} has no group axis", key="sweep.axis")
        if self.axis == "spacing" and not self.layout.correlated:
            raise ConfigurationError("spacing sweep needs a correlated layout", key="sweep.axis")
        if self.scheme in ("hrm_psk", "passive_psk", "active_psk") and self.M < 2:
            raise ConfigurationError(f"scheme {self.scheme!r} needs M >= 2", key="M")
        if self.detector not in modem.DETECTORS:
            raise ConfigurationError(f"detector must be one of {tuple(modem.DETECTORS)}", key="detector")
        if self.fhrm_snr not in ("max", "average"):
            raise ConfigurationError("fhrm_snr must be 'max' or 'average'", key="fhrm_snr")

    def point(self, i):
        """``(geometry, layout, cfg)`` with the ``i``-th axis value applied."""
        v = self.values[i]
        geom, layout, cfg = self.geometry, self.layout, self.cfg
        if self.axis == "P_t":
            cfg = cfg.replace(P_t=dbm_to_watt(v))
        elif self.axis == "N":
            layout = layout.with_(N=int(v))
        elif self.axis == "G":
            layout = layout.with_(G=int(v))
        else:
            layout = layout.with_(d_h=float(v), d_v=float(v))
        return geom, layout, cfg

    def bits_per_symbol(self, layout):
        m_g = modem.bits_per_symbol(layout.G)
        m_m = modem.bits_per_symbol(self.M) if self.M > 1 else 0
        return {
            "hrm": m_g,
            "fhrm": 1,
            "hrm_psk": m_g + m_m,
            "passive_psk": m_m,
            "active_psk": m_m,
            "rm": m_g + m_m,
        }[self.scheme]


@dataclass(frozen=True)
class BerPoint:
    axis_value: float
    trials: int
    bit_errors: int
    ber: float
    ci95: float
    bits_per_symbol: int
    wall_time: float = 0.0


@dataclass(frozen=True)
class RatePoint:
    axis_value: float
    rate: float
    stderr: float
    samples: int


@dataclass(frozen=True)
class EnergyPoint:
    axis_value: float
    ee: float
    ee_stderr: float
    p_tot: float
    p_ris: float
    mean_snr: float
    samples: int
    low_gain_fraction: float = 0.0


def stream(master_seed, point, block):
    """Counter-based generator for one block of one sweep point."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(point), int(block)))
    return np.random.Generator(np.random.Philox(ss))


def ber_ci95(errors, bits):
    if bits == 0:
        return 0.0
    ber = errors / bits
    return Z95 * math.sqrt(ber * (1.0 - ber) / bits)


# --------------------------------------------------------------------------
# per-scheme trial functions

def _draw(geom, layout, rng, n):
    abs_h, abs_g = gen_envelopes(geom, layout, rng, n)
    return as_realization(abs_h, abs_g)


def _budget_gain(cfg, ch, n_active):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LowGainWarning)
        p = modem.max_gain(cfg, ch.h[..., :n_active])
    if np.any(p < 1):
        raise ConfigurationError("amplification budget P_A yields a gain below 1", key="P_A")
    return p


def make_trial_fn(spec, geom, layout, cfg):
    """Return ``f(rng, n) -> total bit errors`` for ``n`` fresh trials."""
    scheme, M = spec.scheme, spec.M
    L_r = geom.L_r

    def gain(ch, n_active):
        if cfg.gain_override is not None:
            return cfg.gain_override
        return _budget_gain(cfg, ch, n_active)

    def f(rng, n):
        ch = _draw(geom, layout, rng, n)
        if scheme == "hrm":
            p = gain(ch, (layout.G - 1) * layout.S)
            out = modem.hrm_trial(ch, layout, cfg, p, rng, detector=spec.detector, L_r=L_r,
                                  dynamic_noise="aggregate")
        elif scheme == "fhrm":
            p = gain(ch, layout.N)
            out = modem.hrm_trial(ch, layout, cfg, p, rng, detector=spec.detector, L_r=L_r,
                                  dynamic_noise="aggregate", fully_hybrid=True)
        elif scheme == "hrm_psk":
            p = gain(ch, (layout.G - 1) * layout.S)
            out = modem.hrm_with_psk(ch, layout, cfg, p, M, rng, L_r=L_r, dynamic_noise="aggregate")
        elif scheme == "passive_psk":
            out = modem.baseline_passive_psk(ch, cfg.P_t, M, rng, sigma_st2=cfg.sigma_st2)
        elif scheme == "active_psk":
            p = gain(ch, layout.N)
            out = modem.baseline_active_psk(ch, cfg, M, rng, p=p, dynamic_noise="aggregate")
        else:
            out = modem.baseline_rm(ch, cfg.P_t, layout.G, M, rng, sigma_st2=cfg.sigma_st2)
        return int(np.sum(out.bit_errors))

    return f


# --------------------------------------------------------------------------
# engines

def estimate_ber(trial_fn, m, master_seed, point, policy, threads=1):
    """Run blocks until the stopping rule fires; returns ``(trials, bit_errors)``."""
    trials = errors = 0
    block = 0
    threads = max(1, int(threads))

    def run(b, n):
        return trial_fn(stream(master_seed, point, b), n)

    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        while True:
            wave = []
            planned = trials
            for _ in range(threads):
                n = min(policy.block_size, policy.max_trials - planned)
                if n <= 0:
                    break
                wave.append((block, n))
                planned += n
                block += 1
            if not wave:
                break
            if pool is None:
                results = [run(b, n) for b, n in wave]
            else:
                results = list(pool.map(lambda bn: run(*bn), wave))
            for (b, n), e in zip(wave, results):
                trials += n
                errors += e
                if errors >= policy.target_errors or trials >= policy.max_trials:
                    return trials, errors
    finally:
        if pool is not None:
            pool.shutdown()
    return trials, errors


def run_ber(spec, master_seed, threads=1):
    points = []
    for i, v in enumerate(spec.values):
        geom, layout, cfg = spec.point(i)
        m = spec.bits_per_symbol(layout)
        fn = make_trial_fn(spec, geom, layout, cfg)
        t0 = time.perf_counter()
        trials, errors = estimate_ber(fn, m, master_seed, i, spec.policy, threads)
        bits = trials * m
        ber = errors / bits
        pt = BerPoint(axis_value=v, trials=trials, bit_errors=errors, ber=ber,
                      ci95=ber_ci95(errors, bits), bits_per_symbol=m,
                      wall_time=time.perf_counter() - t0)
        log.info("%s %s=%s ber=%.3e (%d errors / %d trials, %.1fs)",
                 spec.scheme, spec.axis, v, ber, errors, trials, pt.wall_time)
        points.append(pt)
        if spec.policy.min_ber > 0 and ber < spec.policy.min_ber:
            break
    return points


def _map_points(fn, n_points, threads):
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, range(n_points)))
    return [fn(i) for i in range(n_points)]


def run_rate(spec, master_seed, threads=1):
    """Achievable-rate curve of HRM via :func:`hrmsim.analysis.mutual_information`."""
    if spec.scheme != "hrm":
        raise ConfigurationError("rate sweeps are defined for scheme 'hrm'", key="scheme")

    def one(i):
        geom, layout, cfg = spec.point(i)
        p = cfg.gain_override
        if p is None:
            raise ConfigurationError("rate sweeps need a fixed gain", key="gain")
        est = mutual_information(layout.G, layout.S, p, geom, cfg, spec.samples, stream(master_seed, i, 0),
                                 n0_policy=spec.n0_policy, layout=layout)
        return RatePoint(axis_value=spec.values[i], rate=est.value, stderr=est.stderr, samples=est.samples)

    return _map_points(one, len(spec.values), threads)


def _energy_snr(spec, layout, cfg, ch):
    """Per-realization SNR(s) and the fraction of realizations with a sub-unity gain."""
    N = layout.N
    if spec.scheme == "passive_psk":
        return instantaneous_snr(ch, layout, cfg, 1.0, 0, active_counts=(0, N)), 0.0
    if cfg.gain_override is not None:
        p = cfg.gain_override
        low = 0.0
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LowGainWarning)
            p = modem.max_gain(cfg, ch.h)
        low = float(np.mean(p < 1))
    g1 = instantaneous_snr(ch, layout, cfg, p, 1, active_counts=(0, N))
    if spec.scheme == "active_psk":
        return g1, low
    g0 = instantaneous_snr(ch, layout, cfg, p, 0, active_counts=(0, N))
    return (g0, g1), low


def run_energy(spec, master_seed, threads=1):
    """Expected energy efficiency (bits/J) and power draw for F-HRM, active or passive RIS."""
    if spec.scheme not in ENERGY_MODES:
        raise ConfigurationError(f"energy sweeps support {tuple(ENERGY_MODES)}", key="scheme")
    model = spec.power or PowerModel.published_defaults()
    mode = ENERGY_MODES[spec.scheme]
    block = spec.policy.block_size

    def one(i):
        geom, layout, cfg = spec.point(i)
        P_ris = ris_power(model, mode, layout.N, 0.0 if mode == "passive" else cfg.P_A)
        P_tot = total_power(cfg.P_t, model, P_ris)
        rng = stream(master_seed, i, 0)
        acc = acc2 = snr_acc = low_acc = 0.0
        done = 0
        while done < spec.samples:
            n = min(block, spec.samples - done)
            ch = _draw(geom, layout, rng, n)
            snr, low = _energy_snr(spec, layout, cfg, ch)
            if isinstance(snr, tuple):
                g0, g1 = snr
                if spec.fhrm_snr == "max":
                    gamma = np.maximum(g0, g1)
                    ee = energy_efficiency(model.B_W, P_tot, gamma)
                else:
                    gamma = 0.5 * (g0 + g1)
                    ee = 0.5 * (energy_efficiency(model.B_W, P_tot, g0) + energy_efficiency(model.B_W, P_tot, g1))
            else:
                gamma = snr
                ee = energy_efficiency(model.B_W, P_tot, gamma)
            acc += ee.sum()
            acc2 += (ee**2).sum()
            snr_acc += np.sum(gamma)
            low_acc += low * n
            done += n
        mean = acc / done
        var = max(acc2 / done - mean**2, 0.0)
        return EnergyPoint(axis_value=spec.values[i], ee=mean, ee_stderr=math.sqrt(var / done),
                           p_tot=P_tot, p_ris=P_ris, mean_snr=snr_acc / done, samples=done,
                           low_gain_fraction=low_acc / done)

    return _map_points(one, len(spec.values), threads)


def with_values(spec, values):
    return replace(spec, values=tuple(values))


__all__ = [
    "BerPoint", "EnergyPoint", "RatePoint", "SweepSpec", "TrialPolicy",
    "estimate_ber", "make_trial_fn", "run_ber", "run_energy", "run_rate", "stream",
]
