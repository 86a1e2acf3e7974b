"""Closed-form error-probability machinery and Monte Carlo mutual information for HRM.

The symbol difference ``Sigma = H[l] - H[l_hat]`` is modelled as a Gaussian
(large-``N`` approximation) whose moments follow from the Rician envelope
moments.  The pairwise error probability then averages
``Q(sqrt(P_t Sigma^2 / (2 N0)))`` over ``Pi = Sigma^2`` with Craig's
form of the Q-function and the MGF of ``Pi``, evaluated by Gauss-Legendre
quadrature on ``[0, pi/2]``.

Two known inconsistencies of the published expressions are exposed as
options rather than silently fixed:

``variant``
    ``"rederived"`` uses ``Var(Sigma) = (p-1)^2 |delta| Var(|h||g|)``;
    ``"published"`` uses ``(p^2 - 1) |delta| Var(|h||g|)``.
``mgf``
    ``"real"`` is the MGF of the square of a real Gaussian,
    ``(1 - 2 s2 s)^(-1/2) exp(mu^2 s / (1 - 2 s2 s))``;
    ``"published"`` drops the factor 2.
``s_scale``
    ``s = -P_t / (s_scale * N0 * sin^2 theta)``. Craig's formula with
    ``t^2 = P_t Pi / (2 N0)`` gives ``s_scale = 4``; the displayed integral
    uses 2.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy.special import i0e, i1e, logsumexp

from hrmsim.channel import RisLayout, gen_envelopes
from hrmsim.modem import bits_per_symbol, hamming, levels

VARIANTS = ("rederived", "published")
MGF_FORMS = ("real", "published")
LOG2E = math.log2(math.e)


@dataclass(frozen=True)
class EnvelopeMoments:
    mean: float
    variance: float


@dataclass(frozen=True)
class PepStats:
    """Mean / variance of ``Sigma``; ``delta`` is the signed active-count difference."""

    mu_sigma: float
    sigma_sigma2: float
    delta: int
    variant: str = "rederived"


@dataclass(frozen=True)
class MiEstimate:
    value: float
    stderr: float
    samples: int


def laguerre_half(K):
    """``L_{1/2}(-K) = e^{-K/2} [(1+K) I0(K/2) + K I1(K/2)]`` for ``K >= 0``.

    Exponentially scaled Bessel functions keep this finite for large ``K``
    (it grows like ``2 sqrt(K / pi)``).
    """
    K = np.asarray(K, dtype=float)
    if np.any(K < 0):
        raise ValueError("K must be >= 0")
    x = 0.5 * K
    out = (1.0 + K) * i0e(x) + K * i1e(x)
    return float(out) if out.ndim == 0 else out


def envelope_moments(K, L):
    """Mean and variance of ``sqrt(L) * |Rician(K)|``; ``mean**2 + variance == L``."""
    if K < 0 or L <= 0:
        raise ValueError("need K >= 0 and L > 0")
    lag = laguerre_half(K)
    mean = 0.5 * math.sqrt(L * math.pi / (K + 1.0)) * lag
    var = L - L * math.pi / (4.0 * (K + 1.0)) * lag**2
    return EnvelopeMoments(mean=mean, variance=var)


def product_moments(geom):
    """Mean and variance of one cascade magnitude ``|h_i||g_i|``."""
    mh = envelope_moments(geom.K_t, geom.L_t)
    mg = envelope_moments(geom.K_r, geom.L_r)
    mean = mh.mean * mg.mean
    return mean, geom.L_t * geom.L_r - mean**2


def sigma_stats(l_A, l_hat, S, p, geom, variant="rederived"):
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    delta = (l_A - l_hat) * S
    d = abs(delta)
    mu_hg, var_hg = product_moments(geom)
    mu = mu_hg * (p * d - d)
    if variant == "rederived":
        var = (p - 1.0) ** 2 * d * var_hg
    else:
        var = var_hg * (p**2 * d - d)
    return PepStats(mu_sigma=mu, sigma_sigma2=var, delta=delta, variant=variant)


def sample_sigma_moments(l_A, l_hat, layout, p, geom, n, rng, batch=50_000):
    """Sample mean / variance of ``H[l_A] - H[l_hat]`` from simulated channels (oracle)."""
    counts = tuple(l * layout.S for l in range(layout.G))
    total = 0.0
    total2 = 0.0
    done = 0
    while done < n:
        b = min(batch, n - done)
        abs_h, abs_g = gen_envelopes(geom, layout, rng, b)
        H = levels(abs_h * abs_g, counts, p)
        diff = H[:, l_A] - H[:, l_hat]
        total += diff.sum()
        total2 += (diff**2).sum()
        done += b
    mean = total / n
    return mean, total2 / n - mean**2


@lru_cache(maxsize=16)
def _theta_nodes(nodes):
    x, w = np.polynomial.legendre.leggauss(nodes)
    theta = 0.25 * np.pi * (x + 1.0)
    return theta, 0.25 * np.pi * w


def _mgf_integrand(mu2, s2, snr_scaled, mgf):
    """MGF of ``Pi`` at ``s = -snr_scaled`` (``snr_scaled`` >= 0)."""
    k = 2.0 if mgf == "real" else 1.0
    c = 1.0 + k * s2 * snr_scaled
    return np.exp(-mu2 * snr_scaled / c) / np.sqrt(c)


def _check(N0, mgf):
    if np.any(np.asarray(N0) <= 0):
        raise ValueError("N0 must be positive")
    if mgf not in MGF_FORMS:
        raise ValueError(f"mgf must be one of {MGF_FORMS}")


def pep_exact(stats, P_t, N0, nodes=64, mgf="real", s_scale=4.0):
    """Average PEP ``(1/pi) int_0^{pi/2} M_Pi(-P_t / (s_scale N0 sin^2 t)) dt``.

    Broadcasts over ``P_t`` and ``N0``.
    """
    _check(N0, mgf)
    theta, w = _theta_nodes(nodes)
    ratio = np.asarray(P_t, dtype=float) / (s_scale * np.asarray(N0, dtype=float))
    snr = ratio[..., None] / np.sin(theta) ** 2
    vals = _mgf_integrand(stats.mu_sigma**2, stats.sigma_sigma2, snr, mgf)
    out = (vals @ w) / np.pi
    return float(out) if np.ndim(out) == 0 else out


def pep_upper(stats, P_t, N0, mgf="real", s_scale=4.0):
    """Chernoff-type bound: half the integrand at ``theta = pi/2``."""
    _check(N0, mgf)
    ratio = np.asarray(P_t, dtype=float) / (s_scale * np.asarray(N0, dtype=float))
    out = 0.5 * _mgf_integrand(stats.mu_sigma**2, stats.sigma_sigma2, ratio, mgf)
    return float(out) if np.ndim(out) == 0 else out


def pep_asymptotic(P_t, N0, geom, p, delta):
    """High-SNR expression exactly as published; diagnostic only.

    Its leading ``P_t / (4 N0)`` factor grows without bound, so it is not a
    probability at high SNR.
    """
    if delta == 0:
        raise ValueError("asymptotic PEP undefined for identical hypotheses (delta = 0)")
    d = abs(delta)
    lag2 = laguerre_half(geom.K_t) ** 2 * laguerre_half(geom.K_r) ** 2
    kk = (geom.K_t + 1.0) * (geom.K_r + 1.0)
    snr = np.asarray(P_t, dtype=float) / (4.0 * np.asarray(N0, dtype=float))
    lead = snr * geom.L_r * geom.L_t * (p**2 * d - d)
    bracket = (1.0 - (math.pi**2 / 16.0) / kk * lag2) ** -0.5
    expo = -(math.pi**2) * lag2 * (p - 1.0) ** 2 * d / (16.0 * kk - math.pi**2 * lag2 * (p**2 - 1.0))
    out = lead * bracket * math.exp(expo)
    return float(out) if np.ndim(out) == 0 else out


def hypothesis_noise(cfg, p, S, L_r, G=None, policy="transmitted"):
    """``N0`` as a function of the transmitted hypothesis ``l``.

    ``transmitted``: ``p^2 l S L_r sigma_dy2 + sigma_st2``.  ``worst``: the
    value for ``l = G - 1`` regardless of ``l``.
    """
    def n0(l):
        return p**2 * l * S * L_r * cfg.sigma_dy2 + cfg.sigma_st2

    if policy == "transmitted":
        return n0
    if policy == "worst":
        if G is None:
            raise ValueError("worst-case N0 needs G")
        return lambda l: n0(G - 1)
    raise ValueError(f"unknown N0 policy {policy!r}")


def abep_union(G, S, p, geom, P_t, N0_fn, variant="rederived", **pep_kw):
    """Union bound ``(1/m) sum_l (1/G) sum_{l_hat != l} PEP(l -> l_hat) e(l, l_hat)``.

    ``N0_fn(l)`` gives the noise power for transmitted hypothesis ``l``; a
    plain number means a common ``N0``.  Bit labels are natural binary.
    """
    m = bits_per_symbol(G)
    if not callable(N0_fn):
        value = N0_fn
        N0_fn = lambda l: value  # noqa: E731
    total = 0.0
    for l in range(G):
        n0 = N0_fn(l)
        for lh in range(G):
            if lh == l:
                continue
            st = sigma_stats(l, lh, S, p, geom, variant)
            total = total + pep_exact(st, P_t, n0, **pep_kw) * int(hamming(l, lh))
    return total / (m * G)


def mutual_information(G, S, p, geom, cfg, n_samples, rng, n0_policy="transmitted",
                       estimator="centered", batch=20_000, layout=None):
    """Monte Carlo achievable rate (bits per channel use) of the amplitude constellation.

    Each sample draws one channel and, reusing it for all ``G`` transmitted
    hypotheses, one noise sample ``n ~ CN(0, N0(l))`` per hypothesis.  The
    default ``centered`` estimator subtracts ``|n|^2 / N0`` inside the
    exponent, which removes the ``log2(e)`` term in expectation and lowers
    the variance; ``direct`` keeps the original arrangement.  The mean is
    clamped to ``[0, log2 G]``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if layout is None:
        layout = RisLayout(N=G * S, G=G)
    n0_fn = hypothesis_noise(cfg, p, S, geom.L_r, G, n0_policy)
    n0 = np.array([n0_fn(l) for l in range(G)], dtype=float)
    counts = tuple(l * S for l in range(G))
    sqrt_pt = math.sqrt(cfg.P_t)
    ln2 = math.log(2.0)
    acc = 0.0
    acc2 = 0.0
    done = 0
    while done < n_samples:
        b = min(batch, n_samples - done)
        abs_h, abs_g = gen_envelopes(geom, layout, rng, b)
        H = levels(abs_h * abs_g, counts, p)  # (b, G)
        z = rng.standard_normal((b, G, 2))
        noise = (z[..., 0] + 1j * z[..., 1]) * np.sqrt(n0 / 2.0)  # (b, G) one per transmitted l
        diff = sqrt_pt * (H[:, :, None] - H[:, None, :]) + noise[:, :, None]  # (b, l, l_hat)
        expo = -np.abs(diff) ** 2 / n0[None, :, None]
        if estimator == "centered":
            expo = expo + (np.abs(noise) ** 2 / n0[None, :])[:, :, None]
        elif estimator != "direct":
            raise ValueError(f"unknown estimator {estimator!r}")
        inner = logsumexp(expo, axis=-1) / ln2  # log2 sum_lhat
        per_sample = math.log2(G) - inner.mean(axis=-1)
        if estimator == "direct":
            per_sample = per_sample - LOG2E
        acc += per_sample.sum()
        acc2 += (per_sample**2).sum()
        done += b
    mean = acc / n_samples
    var = max(acc2 / n_samples - mean**2, 0.0)
    stderr = math.sqrt(var / n_samples)
    return MiEstimate(value=float(min(max(mean, 0.0), math.log2(G))), stderr=stderr, samples=n_samples)
