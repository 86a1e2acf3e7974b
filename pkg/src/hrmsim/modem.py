"""HRM / F-HRM symbol construction, received-signal simulation, detection and baselines.

Information is carried by how many RIS sub-groups amplify (gain ``p > 1``)
instead of merely reflecting.  With the phase-aligning reflection phases every
element contributes ``|h_i||g_i|`` coherently, so for ``l_A`` active groups of
``S`` elements the noiseless amplitude is::

    H[l_A] = p * sum(|h_i||g_i|, i < l_A*S) + sum(|h_i||g_i|, i >= l_A*S)

Groups are contiguous index blocks and active groups fill from index 0 upward.

Every function broadcasts over leading batch axes of the channel arrays, so the
same code path serves single-trial calls and the vectorized Monte Carlo engine.
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np

from hrmsim.channel import ChannelRealization, complex_normal
from hrmsim.errors import ConfigurationError, LowGainWarning
from hrmsim.units import dbm_to_watt, watt_to_dbm  # noqa: F401  (re-exported)

BUDGET_NORMS = ("published", "frobenius")


@dataclass(frozen=True)
class HrmConfig:
    """Transmit power, amplification budget and noise powers (all in watts).

    ``gain_override`` fixes ``p`` (BER figures use ``p = 10``); when it is
    ``None`` the gain comes from :func:`max_gain` under ``P_A``.
    """

    P_t: float
    P_A: float = 0.1
    sigma_dy2: float = 1e-12
    sigma_st2: float = 1e-12
    gain_override: float | None = None
    budget_norm: str = "published"

    def __post_init__(self):
        if self.P_t <= 0 or self.P_A <= 0:
            raise ConfigurationError("P_t and P_A must be positive", key="P_t" if self.P_t <= 0 else "P_A")
        if self.sigma_dy2 < 0 or self.sigma_st2 < 0:
            raise ConfigurationError("noise powers must be non-negative", key="sigma")
        if self.gain_override is not None and self.gain_override < 1:
            raise ConfigurationError("a fixed amplification gain must be >= 1", key="gain")
        if self.budget_norm not in BUDGET_NORMS:
            raise ConfigurationError(f"budget_norm must be one of {BUDGET_NORMS}", key="budget_norm")

    def replace(self, **changes):
        d = dict(P_t=self.P_t, P_A=self.P_A, sigma_dy2=self.sigma_dy2, sigma_st2=self.sigma_st2,
                 gain_override=self.gain_override, budget_norm=self.budget_norm)
        d.update(changes)
        return HrmConfig(**d)


@dataclass(frozen=True)
class RisState:
    l_A: int
    N_A: int
    N_P: int
    phases: np.ndarray
    p: float


@dataclass(frozen=True)
class SymbolSet:
    """Virtual amplitude constellation ``amplitudes[..., l]`` and per-hypothesis noise power."""

    amplitudes: np.ndarray
    noise_powers: np.ndarray
    p: float
    active_counts: tuple
    bit_map: tuple = field(default=())

    @property
    def G(self):
        return self.amplitudes.shape[-1]


@dataclass(frozen=True)
class DetectionResult:
    l_hat: np.ndarray
    metrics: np.ndarray
    bit_errors: np.ndarray | None = None


@dataclass(frozen=True)
class TrialOutcome:
    """Result of one or a batch of transmissions: integer labels and bit-error counts."""

    tx: np.ndarray
    rx: np.ndarray
    bit_errors: np.ndarray
    bits_per_symbol: int


# --------------------------------------------------------------------------
# labels

def bits_to_index(bits):
    """Natural binary, MSB first: ``(1, 0) -> 2``."""
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


def index_to_bits(index, m):
    return tuple((int(index) >> (m - 1 - k)) & 1 for k in range(m))


_POPCOUNT = np.array([bin(i).count("1") for i in range(1 << 16)], dtype=np.int64)


def popcount(x):
    x = np.asarray(x, dtype=np.int64)
    return _POPCOUNT[x & 0xFFFF] + _POPCOUNT[(x >> 16) & 0xFFFF]


def hamming(a, b):
    return popcount(np.bitwise_xor(a, b))


def gray(k):
    k = np.asarray(k, dtype=np.int64)
    return k ^ (k >> 1)


def bits_per_symbol(G):
    m = int(round(math.log2(G)))
    if 1 << m != G:
        raise ConfigurationError(f"G must be a power of two, got {G}", key="G")
    return m


# --------------------------------------------------------------------------
# reflection design

def optimal_phases(ch):
    """Phases that cancel the cascade phase of every element: ``-(arg h + arg g)``."""
    phi = -(np.angle(ch.h) + np.angle(ch.g))
    # wrap into [-pi, pi]
    return np.angle(np.exp(1j * phi))


def max_gain(cfg, h_active):
    """Largest common gain satisfying the amplification budget ``P_A``.

    ``published`` keeps a single ``sigma_dy2`` in the denominator, while
    ``frobenius`` charges the dynamic noise of every active element
    (``||Phi||_F^2 = N_A``).  A gain below 1 is returned unchanged and a
    :class:`LowGainWarning` is emitted.
    """
    h_active = np.asarray(h_active)
    n_active = h_active.shape[-1]
    if n_active == 0:
        raise ValueError("max_gain needs at least one active element")
    norm2 = np.sum(np.abs(h_active) ** 2, axis=-1)
    noise = cfg.sigma_dy2 * (n_active if cfg.budget_norm == "frobenius" else 1)
    p = np.sqrt(cfg.P_A / (cfg.P_t * norm2 + noise))
    if np.any(p < 1):
        warnings.warn(f"amplification gain below unity (min p = {np.min(p):.3g})", LowGainWarning, stacklevel=2)
    return float(p) if np.ndim(p) == 0 else p


def ris_state(ch, layout, l_A, p):
    N_A = l_A * layout.S
    return RisState(l_A=l_A, N_A=N_A, N_P=layout.N - N_A, phases=optimal_phases(ch), p=p)


def coherent_sum(ch, phases, p, n_active):
    """``p g_a Phi h_a^T + g_p Psi h_p^T`` for arbitrary phases; magnitudes are bounded by the aligned sum."""
    terms = ch.g * np.exp(1j * phases) * ch.h
    return p * terms[..., :n_active].sum(-1) + terms[..., n_active:].sum(-1)


# --------------------------------------------------------------------------
# symbol sets

def _prefix_sums(x):
    cs = np.cumsum(x, axis=-1)
    zero = np.zeros(cs.shape[:-1] + (1,), dtype=cs.dtype)
    return np.concatenate([zero, cs], axis=-1)


def levels(products, active_counts, p):
    """Amplitudes for each active-element count given per-element cascade magnitudes."""
    cs = _prefix_sums(products)
    idx = np.asarray(active_counts)
    active = cs[..., idx]
    total = cs[..., -1:]
    return total + (_col(p) - 1.0) * active


def _col(p):
    # per-realization gains broadcast against the hypothesis axis
    p = np.asarray(p, dtype=float)
    return p if p.ndim == 0 else p[..., None]


def active_g2(abs_g, active_counts):
    """``sum |g_i|^2`` over the active elements of each hypothesis."""
    return _prefix_sums(abs_g**2)[..., np.asarray(active_counts)]


def _noise_powers(ch, cfg, p, active_counts, L_r):
    counts = np.asarray(active_counts, dtype=float)
    p2 = _col(p) ** 2
    if L_r is not None:
        return p2 * counts * L_r * cfg.sigma_dy2 + cfg.sigma_st2
    # exact conditional variance given g
    return p2 * active_g2(np.abs(ch.g), active_counts) * cfg.sigma_dy2 + cfg.sigma_st2


def hrm_symbol_set(ch, layout, cfg, p, L_r=None):
    """The ``G`` HRM amplitudes and per-hypothesis noise powers.

    With ``L_r`` given the noise power is the large-``N_A`` value
    ``p^2 N_A L_r sigma_dy2 + sigma_st2``; otherwise the exact conditional
    variance ``p^2 sum_active |g_i|^2 sigma_dy2 + sigma_st2`` is used.
    """
    if np.any(np.asarray(p) < 1):
        raise ValueError(f"gain must be >= 1, got {p}")
    counts = tuple(l * layout.S for l in range(layout.G))
    m = bits_per_symbol(layout.G)
    return SymbolSet(
        amplitudes=levels(ch.products, counts, p),
        noise_powers=_noise_powers(ch, cfg, p, counts, L_r),
        p=p,
        active_counts=counts,
        bit_map=tuple(index_to_bits(l, m) for l in range(layout.G)),
    )


def fhrm_symbol_set(ch, cfg, p, L_r=None):
    """F-HRM: the whole surface is either passive (bit 0) or active (bit 1)."""
    if np.any(np.asarray(p) < 1):
        raise ValueError(f"gain must be >= 1, got {p}")
    counts = (0, ch.N)
    return SymbolSet(
        amplitudes=levels(ch.products, counts, p),
        noise_powers=_noise_powers(ch, cfg, p, counts, L_r),
        p=p,
        active_counts=counts,
        bit_map=((0,), (1,)),
    )


# --------------------------------------------------------------------------
# received signal

def _dynamic_noise(abs_g, n_active, p, sigma_dy2, rng, mode):
    n_active = np.asarray(n_active)
    if sigma_dy2 == 0:
        return np.zeros(np.broadcast_shapes(abs_g.shape[:-1], n_active.shape), dtype=complex)
    if mode == "per_element":
        v = complex_normal(rng, abs_g.shape) * math.sqrt(sigma_dy2)
        mask = np.arange(abs_g.shape[-1]) < n_active[..., None]
        return p * np.sum(np.where(mask, abs_g * v, 0.0), axis=-1)
    if mode == "aggregate":
        # exact in distribution: a weighted sum of independent CN(0, s2) terms
        g2 = np.take_along_axis(_prefix_sums(abs_g**2), n_active[..., None], axis=-1)[..., 0]
        return p * np.sqrt(g2 * sigma_dy2) * complex_normal(rng, g2.shape)
    raise ValueError(f"unknown dynamic noise mode {mode!r}")


def received(amplitude, abs_g, n_active, cfg, p, rng, dynamic_noise="per_element"):
    """``sqrt(P_t) * amplitude + dynamic noise + static noise`` for given transmitted amplitude(s)."""
    dyn = _dynamic_noise(abs_g, n_active, p, cfg.sigma_dy2, rng, dynamic_noise)
    y = math.sqrt(cfg.P_t) * amplitude + dyn
    if cfg.sigma_st2 > 0:
        y = y + complex_normal(rng, np.shape(y)) * math.sqrt(cfg.sigma_st2)
    return y


def simulate_rx(ch, layout, cfg, p, l_A, rng, dynamic_noise="per_element"):
    """Received sample for ``l_A`` active groups under the phase-aligned configuration.

    The amplifier noise of each active element is drawn individually and
    weighted by ``p |g_i|``; ``dynamic_noise="aggregate"`` draws the
    equivalent single complex Gaussian instead.
    """
    l_A = np.asarray(l_A)
    n_active = l_A * layout.S
    counts = tuple(l * layout.S for l in range(layout.G))
    H = levels(ch.products, counts, p)
    amp = np.take_along_axis(H, np.broadcast_to(l_A, H.shape[:-1])[..., None], axis=-1)[..., 0]
    return received(amp, np.abs(ch.g), n_active, cfg, p, rng, dynamic_noise)


# --------------------------------------------------------------------------
# detection

def detect_simple(y, symbols, P_t, l_true=None):
    """Closest virtual constellation point; ties go to the smaller index."""
    y = np.asarray(y)
    metrics = np.abs(y[..., None] - math.sqrt(P_t) * symbols.amplitudes) ** 2
    l_hat = np.argmin(metrics, axis=-1)
    errors = None if l_true is None else hamming(l_true, l_hat)
    return DetectionResult(l_hat=l_hat, metrics=metrics, bit_errors=errors)


def detect_full_ml(y, symbols, P_t, l_true=None):
    """Maximum likelihood with hypothesis-dependent noise power ``N0(l)``."""
    y = np.asarray(y)
    n0 = symbols.noise_powers
    dist = np.abs(y[..., None] - math.sqrt(P_t) * symbols.amplitudes) ** 2
    metrics = -np.log(n0) - dist / n0
    l_hat = np.argmax(metrics, axis=-1)
    errors = None if l_true is None else hamming(l_true, l_hat)
    return DetectionResult(l_hat=l_hat, metrics=metrics, bit_errors=errors)


DETECTORS = {"simple": detect_simple, "ml": detect_full_ml}


def _batch_shape(ch):
    return ch.h.shape[:-1]


def hrm_trial(ch, layout, cfg, p, rng, l_A=None, detector="simple", L_r=None,
              dynamic_noise="per_element", fully_hybrid=False):
    """One transmission (or a batch) of plain HRM or, with ``fully_hybrid``, F-HRM."""
    if fully_hybrid:
        sym = fhrm_symbol_set(ch, cfg, p, L_r=L_r)
    else:
        sym = hrm_symbol_set(ch, layout, cfg, p, L_r=L_r)
    m = bits_per_symbol(sym.G)
    if l_A is None:
        l_A = rng.integers(sym.G, size=_batch_shape(ch))
    l_A = np.asarray(l_A)
    amp = np.take_along_axis(sym.amplitudes, np.broadcast_to(l_A, sym.amplitudes.shape[:-1])[..., None], -1)[..., 0]
    n_active = np.asarray(sym.active_counts)[l_A]
    y = received(amp, np.abs(ch.g), n_active, cfg, p, rng, dynamic_noise)
    det = DETECTORS[detector](y, sym, cfg.P_t, l_true=l_A)
    return TrialOutcome(tx=l_A, rx=det.l_hat, bit_errors=det.bit_errors, bits_per_symbol=m)


# --------------------------------------------------------------------------
# PSK-based schemes

def psk_points(M, rotation=0.0):
    return np.exp(1j * (2 * np.pi * np.arange(M) / M + rotation))


def _psk_bits_errors(k, k_hat):
    return hamming(gray(k), gray(k_hat))


def _joint_ml(y, amps, points, n0, P_t):
    """Joint ML over (amplitude hypothesis, PSK point); returns flat argmax index ``l*M + k``."""
    cand = math.sqrt(P_t) * amps[..., :, None] * points  # (..., G, M)
    dist = np.abs(y[..., None, None] - cand) ** 2
    n0 = np.asarray(n0)
    if n0.ndim and n0.shape[-1] == amps.shape[-1]:
        n0 = n0[..., :, None]
    metric = -np.log(n0) - dist / n0
    flat = metric.reshape(metric.shape[:-2] + (-1,))
    return np.argmax(flat, axis=-1)


def baseline_passive_psk(ch, P_t, M, rng, sigma_st2=1e-12, symbols=None, rotation=0.0):
    """Fully passive RIS with phase-aligned elements relaying an M-PSK symbol."""
    m = bits_per_symbol(M)
    amp = ch.products.sum(-1)
    if symbols is None:
        symbols = rng.integers(M, size=_batch_shape(ch))
    pts = psk_points(M, rotation)
    y = math.sqrt(P_t) * amp * pts[symbols]
    y = y + complex_normal(rng, np.shape(y)) * math.sqrt(sigma_st2)
    k_hat = _joint_ml(y, amp[..., None], pts, 1.0, P_t)
    return TrialOutcome(tx=symbols, rx=k_hat, bit_errors=_psk_bits_errors(symbols, k_hat), bits_per_symbol=m)


def baseline_active_psk(ch, cfg, M, rng, p=None, symbols=None, dynamic_noise="per_element"):
    """Every element active with common gain ``p`` (from the budget unless given)."""
    m = bits_per_symbol(M)
    if p is None:
        p = cfg.gain_override if cfg.gain_override is not None else max_gain(cfg, ch.h)
    p = np.asarray(p, dtype=float)
    N = ch.N
    amp = p * ch.products.sum(-1)
    if symbols is None:
        symbols = rng.integers(M, size=_batch_shape(ch))
    pts = psk_points(M)
    dyn = _dynamic_noise(np.abs(ch.g), np.full(_batch_shape(ch), N), p, cfg.sigma_dy2, rng, dynamic_noise)
    y = math.sqrt(cfg.P_t) * amp * pts[symbols] + dyn
    y = y + complex_normal(rng, np.shape(y)) * math.sqrt(cfg.sigma_st2)
    # noise power is common to all hypotheses, so ML is minimum distance
    k_hat = _joint_ml(y, amp[..., None], pts, 1.0, cfg.P_t)
    return TrialOutcome(tx=symbols, rx=k_hat, bit_errors=_psk_bits_errors(symbols, k_hat), bits_per_symbol=m)


def rm_amplitudes(products, G, all_on=False):
    """ON/OFF reflection-modulation patterns: pattern ``k`` switches group ``k`` OFF."""
    N = products.shape[-1]
    S = N // G
    total = products.sum(-1, keepdims=True)
    if all_on:
        return np.broadcast_to(total, products.shape[:-1] + (G,))
    groups = products.reshape(products.shape[:-1] + (G, S)).sum(-1)
    return total - groups


def baseline_rm(ch, P_t, G, M, rng, sigma_st2=1e-12, all_on=False, labels=None):
    """Approximate RM reference: group index bits plus rotated M-PSK, joint ML.

    The pattern with group ``k`` OFF carries index ``k``; the PSK symbol uses
    a fixed ``pi/M`` rotation.  ``all_on`` keeps every group ON and sends the
    PSK symbol alone, which reproduces :func:`baseline_passive_psk`.
    """
    if all_on:
        return baseline_passive_psk(ch, P_t, M, rng, sigma_st2, symbols=labels, rotation=np.pi / M)
    m_idx = bits_per_symbol(G)
    m_psk = bits_per_symbol(M)
    amps = rm_amplitudes(ch.products, G)
    if labels is None:
        labels = rng.integers(G * M, size=_batch_shape(ch))
    labels = np.asarray(labels)
    l, k = labels // M, labels % M
    pts = psk_points(M, rotation=np.pi / M)
    amp = np.take_along_axis(amps, l[..., None], -1)[..., 0]
    y = math.sqrt(P_t) * amp * pts[k]
    y = y + complex_normal(rng, np.shape(y)) * math.sqrt(sigma_st2)
    flat = _joint_ml(y, amps, pts, 1.0, P_t)
    l_hat, k_hat = flat // M, flat % M
    errors = hamming(l, l_hat) + _psk_bits_errors(k, k_hat)
    return TrialOutcome(tx=labels, rx=flat, bit_errors=errors, bits_per_symbol=m_idx + m_psk)


def hrm_with_psk(ch, layout, cfg, p, M, rng, labels=None, L_r=None, dynamic_noise="per_element"):
    """HRM amplitude index plus an M-PSK carrier; joint ML with per-hypothesis ``N0``.

    Labels are ``l_A * M + k``; spectral efficiency ``log2(G) + log2(M)``.
    """
    sym = hrm_symbol_set(ch, layout, cfg, p, L_r=L_r)
    m_idx = bits_per_symbol(layout.G)
    m_psk = bits_per_symbol(M)
    if labels is None:
        labels = rng.integers(layout.G * M, size=_batch_shape(ch))
    labels = np.asarray(labels)
    l, k = labels // M, labels % M
    pts = psk_points(M)
    amp = np.take_along_axis(sym.amplitudes, l[..., None], -1)[..., 0]
    n_active = np.asarray(sym.active_counts)[l]
    dyn = _dynamic_noise(np.abs(ch.g), n_active, p, cfg.sigma_dy2, rng, dynamic_noise)
    y = math.sqrt(cfg.P_t) * amp * pts[k] + dyn
    if cfg.sigma_st2 > 0:
        y = y + complex_normal(rng, np.shape(y)) * math.sqrt(cfg.sigma_st2)
    n0 = sym.noise_powers if np.all(np.asarray(sym.noise_powers) > 0) else 1.0
    flat = _joint_ml(y, sym.amplitudes, pts, n0, cfg.P_t)
    l_hat, k_hat = flat // M, flat % M
    errors = hamming(l, l_hat) + _psk_bits_errors(k, k_hat)
    return TrialOutcome(tx=labels, rx=flat, bit_errors=errors, bits_per_symbol=m_idx + m_psk)


def as_realization(abs_h, abs_g):
    """Wrap magnitude arrays as a (phase-free) realization; valid because phases are aligned away."""
    return ChannelRealization(h=abs_h, g=abs_g)
