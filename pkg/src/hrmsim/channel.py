"""Path loss and Rician / spatially correlated Rayleigh fading for the two RIS hops.

Channel vectors are returned with the path loss already applied, i.e.
``h = sqrt(L_t) * h_tilde`` and ``g = sqrt(L_r) * g_tilde``.  All generators
take an explicit :class:`numpy.random.Generator` and accept a leading batch
shape so the Monte Carlo engine can draw many realizations at once.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from hrmsim.errors import ConfigurationError, NumericalError

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_CARRIER_HZ = 2.4e9
DEFAULT_WAVELENGTH = SPEED_OF_LIGHT / DEFAULT_CARRIER_HZ


def path_loss(beta0_db, d, alpha):
    """Linear power gain ``beta0 * d**(-alpha)`` with ``beta0`` given in dB at 1 m."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError(f"distance must be positive, got {d}")
    out = 10.0 ** (beta0_db / 10.0) * d ** (-float(alpha))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LinkGeometry:
    """Distances (m), path-loss exponents and Rician factors of both hops."""

    d_t: float = 20.0
    d_r: float = 50.0
    alpha_t: float = 2.2
    alpha_r: float = 2.8
    beta0_db: float = -30.0
    K_t: float = 0.0
    K_r: float = 0.0
    omega_t: float = 1.0
    omega_r: float = 1.0

    def __post_init__(self):
        if self.d_t <= 0 or self.d_r <= 0:
            raise ConfigurationError("distances must be positive", key="d_t" if self.d_t <= 0 else "d_r")
        if self.alpha_t < 1 or self.alpha_r < 1:
            raise ConfigurationError("path-loss exponents must be >= 1", key="alpha")
        if self.K_t < 0 or self.K_r < 0:
            raise ConfigurationError("Rician factors must be >= 0", key="K")
        if self.omega_t <= 0 or self.omega_r <= 0:
            raise ConfigurationError("scale parameters must be positive", key="omega")

    @property
    def L_t(self):
        # omega acts as a plain power scale; 1 by default
        return self.omega_t * path_loss(self.beta0_db, self.d_t, self.alpha_t)

    @property
    def L_r(self):
        return self.omega_r * path_loss(self.beta0_db, self.d_r, self.alpha_r)


@dataclass(frozen=True)
class RisLayout:
    """Element count, grouping and (for the correlated model) the planar grid geometry.

    ``d_h``, ``d_v`` and ``wavelength`` are in meters and are only consulted
    when ``correlated`` is set, in which case ``N`` must be a perfect square.
    """

    N: int
    G: int = 2
    d_h: float | None = None
    d_v: float | None = None
    wavelength: float = DEFAULT_WAVELENGTH
    correlated: bool = False

    def __post_init__(self):
        if self.G < 1 or self.N < 1:
            raise ConfigurationError("N and G must be positive", key="G")
        if self.N % self.G:
            raise ConfigurationError(f"G={self.G} does not divide N={self.N}", key="G")
        if self.correlated:
            if math.isqrt(self.N) ** 2 != self.N:
                raise ConfigurationError(f"correlated layout needs square N, got {self.N}", key="N")
            if not self.d_h or not self.d_v or self.d_h <= 0 or self.d_v <= 0:
                raise ConfigurationError("correlated layout needs positive d_h and d_v", key="d_h")
            if self.wavelength <= 0:
                raise ConfigurationError("wavelength must be positive", key="wavelength")

    @property
    def S(self):
        return self.N // self.G

    @property
    def N_h(self):
        return math.isqrt(self.N)

    def with_(self, **changes):
        fields = dict(N=self.N, G=self.G, d_h=self.d_h, d_v=self.d_v,
                      wavelength=self.wavelength, correlated=self.correlated)
        fields.update(changes)
        return RisLayout(**fields)


@dataclass(frozen=True)
class ChannelRealization:
    """Transmitter->RIS (``h``) and RIS->receiver (``g``) gains, shape ``(..., N)``."""

    h: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        if self.h.shape != self.g.shape:
            raise ValueError(f"h and g shapes differ: {self.h.shape} vs {self.g.shape}")

    @property
    def N(self):
        return self.h.shape[-1]

    @property
    def products(self):
        """Per-element cascade magnitudes ``|h_i||g_i|``."""
        return np.abs(self.h) * np.abs(self.g)


def complex_normal(rng, size):
    """Standard circularly-symmetric complex Gaussian, unit variance."""
    z = rng.standard_normal(_as_shape(size) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * math.sqrt(0.5)


def gen_rician(n, K, rng):
    """Unit-power Rician entries.

    Each entry is ``sqrt(K/(K+1)) e^{j theta} + sqrt(1/(K+1)) z`` with a
    uniform LOS phase redrawn per entry, so envelopes are exactly Rician(K).
    ``n`` may be an int or a shape tuple.
    """
    if K < 0:
        raise ValueError(f"Rician factor must be >= 0, got {K}")
    shape = _as_shape(n)
    nlos = complex_normal(rng, shape)
    if K == 0:
        return nlos
    theta = rng.uniform(-np.pi, np.pi, size=shape)
    return math.sqrt(K / (K + 1.0)) * np.exp(1j * theta) + math.sqrt(1.0 / (K + 1.0)) * nlos


def rician_envelope(n, K, rng):
    """Magnitudes of :func:`gen_rician` entries, drawn without the phase.

    ``|a e^{j theta} + b z|`` has the law of ``|a + b z|`` since ``z`` is
    circularly symmetric; for ``K = 0`` the squared envelope is Exp(1).
    """
    if K < 0:
        raise ValueError(f"Rician factor must be >= 0, got {K}")
    shape = _as_shape(n)
    if K == 0:
        return np.sqrt(rng.standard_exponential(shape))
    los = math.sqrt(K / (K + 1.0))
    z = rng.standard_normal(shape + (2,)) * math.sqrt(0.5 / (K + 1.0))
    return np.hypot(z[..., 0] + los, z[..., 1])


def _normalized_sinc_matrix(layout):
    n_h = layout.N_h
    idx = np.arange(layout.N)
    col = (idx % n_h) * layout.d_h
    row = (idx // n_h) * layout.d_v
    dist = np.hypot(col[:, None] - col[None, :], row[:, None] - row[None, :])
    return np.sinc(2.0 * dist / layout.wavelength)


@lru_cache(maxsize=32)
def _correlation_cached(layout):
    R = _normalized_sinc_matrix(layout)
    R = 0.5 * (R + R.T)
    w, V = np.linalg.eigh(R)
    floor = -1e-10 * layout.N
    if w.min() < floor:
        raise NumericalError(
            f"correlation matrix not PSD: min eigenvalue {w.min():.3e} < {floor:.3e}",
            where="channel.correlation_matrix",
        )
    w = np.clip(w, 0.0, None)
    R_sqrt = (V * np.sqrt(w)) @ V.T
    R_sqrt = 0.5 * (R_sqrt + R_sqrt.T)
    R.setflags(write=False)
    R_sqrt.setflags(write=False)
    return R, R_sqrt


def correlation_matrix(layout):
    """Spatial correlation ``R[k, l] = sinc(2 |w_k - w_l| / wavelength)`` and its symmetric root.

    Element ``i`` sits at column ``i mod N_h`` and row ``i // N_h`` of the
    square grid.  The normalized sinc is used (first zero at half-wavelength
    spacing).  Returns ``(R, R_sqrt)``; both are read-only and cached per layout.
    """
    if not layout.correlated:
        layout = layout.with_(correlated=True)
    return _correlation_cached(layout)


def _check_correlated(geom, layout):
    if layout.correlated and (geom.K_t != 0 or geom.K_r != 0):
        raise ConfigurationError("the correlated channel model is Rayleigh only (K_t = K_r = 0)", key="K_t")


def gen_channels(geom, layout, rng, size=None):
    """Draw one (``size=None``) or ``size`` channel realizations."""
    _check_correlated(geom, layout)
    shape = _as_shape(size) + (layout.N,)
    if layout.correlated:
        _, R_sqrt = correlation_matrix(layout)
        h_t = _correlate(complex_normal(rng, shape), R_sqrt)
        g_t = _correlate(complex_normal(rng, shape), R_sqrt)
    else:
        h_t = gen_rician(shape, geom.K_t, rng)
        g_t = gen_rician(shape, geom.K_r, rng)
    return ChannelRealization(h=math.sqrt(geom.L_t) * h_t, g=math.sqrt(geom.L_r) * g_t)


def gen_envelopes(geom, layout, rng, size=None):
    """Draw ``(|h|, |g|)`` directly; same law as ``abs`` of :func:`gen_channels`.

    The HRM receiver only ever sees the phase-aligned magnitudes, so the
    Monte Carlo engine uses this cheaper path.
    """
    _check_correlated(geom, layout)
    shape = _as_shape(size) + (layout.N,)
    if layout.correlated:
        ch = gen_channels(geom, layout, rng, size)
        return np.abs(ch.h), np.abs(ch.g)
    abs_h = rician_envelope(shape, geom.K_t, rng)
    abs_g = rician_envelope(shape, geom.K_r, rng)
    abs_h *= math.sqrt(geom.L_t)
    abs_g *= math.sqrt(geom.L_r)
    return abs_h, abs_g


def _correlate(z, R_sqrt):
    # R_sqrt is real: two real matmuls beat one complex one.  The real/imag
    # views are strided, and strided operands miss the BLAS path.
    return np.ascontiguousarray(z.real) @ R_sqrt + 1j * (np.ascontiguousarray(z.imag) @ R_sqrt)


def _as_shape(size):
    if size is None:
        return ()
    if isinstance(size, (int, np.integer)):
        return (int(size),)
    return tuple(int(s) for s in size)
