"""Power consumption and energy efficiency of passive, hybrid and fully active RIS links."""

from dataclasses import dataclass
import math

import numpy as np

from hrmsim.errors import ConfigurationError
from hrmsim.modem import levels
from hrmsim.units import dbm_to_watt

MODES = ("passive", "hybrid", "active")


@dataclass(frozen=True)
class PowerModel:
    """Circuit and amplifier constants, in watts / hertz.

    ``eps1`` and ``eps2`` are the average numbers of active and passive
    elements for the hybrid mode; ``None`` means the F-HRM split ``N/2, N/2``.
    """

    P_c: float
    P_p: float
    P_st: float
    P_dy: float
    tau_t: float = 0.5
    tau_a: float = 0.5
    B_W: float = 10e6
    eps1: float | None = None
    eps2: float | None = None

    def __post_init__(self):
        for name in ("tau_t", "tau_a"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ConfigurationError(f"{name} must lie in (0, 1], got {v}", key=name)
        for name in ("P_c", "P_p", "P_st", "P_dy", "B_W"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0", key=name)

    @classmethod
    def published_defaults(cls, **overrides):
        """P_c = 75 dBm, P_p = 5 mW, P_st = 35 dBm, P_dy = 30 dBm, tau = 0.5, B_W = 10 MHz."""
        values = dict(
            P_c=dbm_to_watt(75.0),
            P_p=5e-3,
            P_st=dbm_to_watt(35.0),
            P_dy=dbm_to_watt(30.0),
            tau_t=0.5,
            tau_a=0.5,
            B_W=10e6,
        )
        values.update(overrides)
        return cls(**values)

    def conversion_table(self):
        """Rows of (name, watts) for logging."""
        return [(k, getattr(self, k)) for k in ("P_c", "P_p", "P_st", "P_dy", "tau_t", "tau_a", "B_W")]


def ris_power(model, mode, N, P_A):
    """RIS power draw in watts.

    passive: ``N P_p``; active: ``P_A/tau_a + N P_dy + P_st``;
    hybrid: ``P_A/tau_a + eps1 P_dy + eps2 P_p + P_st``.
    """
    if mode == "passive":
        return N * model.P_p
    if mode == "active":
        return P_A / model.tau_a + N * model.P_dy + model.P_st
    if mode == "hybrid":
        eps1 = N / 2 if model.eps1 is None else model.eps1
        eps2 = N / 2 if model.eps2 is None else model.eps2
        if not math.isclose(eps1 + eps2, N, rel_tol=1e-12, abs_tol=1e-12):
            raise ConfigurationError(f"eps1 + eps2 = {eps1 + eps2} != N = {N}", key="eps1")
        return P_A / model.tau_a + eps1 * model.P_dy + eps2 * model.P_p + model.P_st
    raise ConfigurationError(f"mode must be one of {MODES}", key="mode")


def total_power(P_t, model, ris_watts):
    return P_t / model.tau_t + ris_watts + model.P_c


def instantaneous_snr(ch, layout, cfg, p, l_A, active_counts=None):
    """``P_t H[l_A]^2 / (p^2 ||g_a||^2 sigma_dy2 + sigma_st2)`` under aligned phases.

    ``active_counts`` defaults to the HRM grouping ``l * S``; pass
    ``(0, N)`` for F-HRM.
    """
    if active_counts is None:
        active_counts = tuple(l * layout.S for l in range(layout.G))
    l_A = np.asarray(l_A)
    H = levels(ch.products, active_counts, p)
    amp = np.take_along_axis(H, np.broadcast_to(l_A, H.shape[:-1])[..., None], -1)[..., 0]
    n_active = np.asarray(active_counts)[l_A]
    abs_g2 = np.abs(ch.g) ** 2
    mask = np.arange(abs_g2.shape[-1]) < np.asarray(n_active)[..., None]
    g_a2 = np.sum(np.where(mask, abs_g2, 0.0), axis=-1)
    denom = p**2 * g_a2 * cfg.sigma_dy2 + cfg.sigma_st2
    if np.any(denom <= 0):
        raise ValueError("SNR undefined without noise (zero denominator)")
    out = cfg.P_t * amp**2 / denom
    return float(out) if np.ndim(out) == 0 else out


def energy_efficiency(B_W, P_tot, gamma):
    """Bits per joule: ``B_W / P_tot * log2(1 + gamma)``."""
    return B_W / np.asarray(P_tot) * np.log2(1.0 + np.asarray(gamma))
