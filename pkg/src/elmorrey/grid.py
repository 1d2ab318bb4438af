"""Periodic sampling lattice, field containers, derivatives and cutoffs.

The whole space is modelled by the periodic box ``[-L, L)^3`` sampled on an
``n^3`` lattice with spacing ``h = 2L/n``. Node ``(i, j, k)`` sits at
``(-L + i h, -L + j h, -L + k h)`` and arrays are stored C-ordered, so the
``k`` index varies fastest.

Two derivative schemes are available:

* ``"spectral"``: Fourier multipliers, exact for resolved modes. Odd-order
  derivatives drop the Nyquist mode (its derivative is not real-representable),
  the Laplacian keeps it.
* ``"fd4"``: periodic fourth-order central differences, for fields that are
  only trustworthy inside an interior window.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import os

import numpy as np
import scipy.fft as sfft

from . import kernels
from .errors import ConfigurationError, DomainError


def _install_fft_backend():
    """Route scipy.fft through FFTW when pyfftw is installed (about 1.5x faster here).

    ``ELMORREY_FFT=scipy`` keeps the bundled pocketfft backend.
    """
    if os.environ.get("ELMORREY_FFT", "") == "scipy":
        return "scipy"
    try:
        import pyfftw
        import pyfftw.interfaces.scipy_fft as fftw_backend
    except ImportError:
        return "scipy"
    pyfftw.interfaces.cache.enable()
    pyfftw.interfaces.cache.set_keepalive_time(60.0)
    sfft.set_global_backend(fftw_backend)
    return "fftw"


FFT_BACKEND = _install_fft_backend()

SCHEMES = ("spectral", "fd4")

# A field "decays" when |f| outside 0.9 L stays below this fraction of max |f|.
DECAY_FRACTION = 0.9
DECAY_THRESHOLD = 1e-8


def _is_power_of_two(n):
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class Grid3:
    """Cubic periodic lattice with ``n`` nodes per axis on ``[-L, L)^3``."""

    n: int
    box_half: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 16:
            raise ConfigurationError(f"n must be an integer >= 16, got {self.n!r}")
        if not (np.isfinite(self.box_half) and self.box_half > 0):
            raise ConfigurationError(f"box_half must be positive, got {self.box_half!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "box_half", float(self.box_half))

    @property
    def h(self):
        return 2.0 * self.box_half / self.n

    @property
    def cell_volume(self):
        return self.h**3

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @property
    def origin(self):
        return (-self.box_half,) * 3

    @cached_property
    def axis(self):
        """1D node coordinates shared by all three axes."""
        return -self.box_half + self.h * np.arange(self.n)

    @cached_property
    def coords(self):
        """Broadcastable coordinate arrays ``(x1, x2, x3)``."""
        a = self.axis
        return (a[:, None, None], a[None, :, None], a[None, None, :])

    @cached_property
    def radius(self):
        x, y, z = self.coords
        r = np.sqrt(x * x + y * y + z * z)
        r.setflags(write=False)
        return r

    def mesh(self):
        """Full (3, n, n, n) array of node coordinates."""
        x, y, z = self.coords
        return np.stack(np.broadcast_arrays(x, y, z)).copy()

    def index_of(self, point):
        """Nearest node index of a physical point (wrapped periodically)."""
        p = np.asarray(point, dtype=np.float64)
        return tuple(int(v) for v in np.round((p + self.box_half) / self.h).astype(int) % self.n)

    def point_of(self, index):
        return tuple(-self.box_half + self.h * int(i) for i in index)

    def require_spectral(self):
        if not _is_power_of_two(self.n):
            raise ConfigurationError(f"spectral scheme needs a power-of-two n, got {self.n}")

    @cached_property
    def wavenumbers(self):
        """Wavenumbers for the real-FFT layout, as broadcastable arrays.

        Returns ``(k, k_odd, k2)`` where ``k`` is the tuple of full
        wavenumbers, ``k_odd`` the same with Nyquist entries zeroed, and
        ``k2 = |k|^2`` (Nyquist kept).
        """
        n = self.n
        scale = np.pi / self.box_half
        full = sfft.fftfreq(n, 1.0 / n) * scale
        half = sfft.rfftfreq(n, 1.0 / n) * scale
        k = (full[:, None, None], full[None, :, None], half[None, None, :])
        full_odd = full.copy()
        full_odd[n // 2] = 0.0
        half_odd = half.copy()
        half_odd[-1] = 0.0
        k_odd = (full_odd[:, None, None], full_odd[None, :, None], half_odd[None, None, :])
        k2 = k[0] ** 2 + k[1] ** 2 + k[2] ** 2
        return k, k_odd, k2


# ---------------------------------------------------------------------------
# Field containers


def _check_data(grid, data, lead):
    arr = np.asarray(data, dtype=np.float64)
    want = lead + grid.shape
    if arr.shape != want:
        raise ConfigurationError(f"field data has shape {arr.shape}, expected {want}")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError("field data contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid3
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _check_data(self.grid, self.data, ()))

    ncomp = 1

    def magnitude(self):
        return np.abs(self.data)

    def flat(self):
        return self.data.reshape(1, *self.grid.shape)

    def integral(self):
        return float(self.data.sum() * self.grid.cell_volume)


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: Grid3
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _check_data(self.grid, self.data, (3,)))

    ncomp = 3

    @classmethod
    def from_components(cls, grid, components):
        return cls(grid, np.stack([np.broadcast_to(c, grid.shape) for c in components]))

    def component(self, i):
        return ScalarField(self.grid, self.data[i])

    @property
    def components(self):
        return tuple(self.component(i) for i in range(3))

    def magnitude(self):
        return np.sqrt(np.einsum("i...,i...->...", self.data, self.data))

    def flat(self):
        return self.data


@dataclass(frozen=True, eq=False)
class TensorField:
    """Entry ``(i, j)`` holds ``d_i (.)_j`` style data."""

    grid: Grid3
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _check_data(self.grid, self.data, (3, 3)))

    ncomp = 9

    def component(self, i, j):
        return ScalarField(self.grid, self.data[i, j])

    def magnitude(self):
        return np.sqrt(np.einsum("ij...,ij...->...", self.data, self.data))

    def flat(self):
        return self.data.reshape(9, *self.grid.shape)

    def self_contraction(self):
        """The symmetric tensor ``sum_k T(i,k) T(j,k)``, e.g. grad v ⊙ grad v."""
        return TensorField(self.grid, np.einsum("ik...,jk...->ij...", self.data, self.data))


def magnitude(f):
    """Pointwise modulus of any field kind (or a bare array)."""
    if isinstance(f, (ScalarField, VectorField, TensorField)):
        return f.magnitude()
    return np.abs(np.asarray(f, dtype=np.float64))


# ---------------------------------------------------------------------------
# Spectral helpers


def fft(data):
    return sfft.rfftn(data, axes=(-3, -2, -1))


def ifft(spec, grid):
    return sfft.irfftn(spec, s=grid.shape, axes=(-3, -2, -1))


def _check_scheme(scheme, grid):
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if scheme == "spectral":
        grid.require_spectral()


def _deriv_array(data, grid, axis, scheme):
    """First derivative of a stack of scalar arrays along ``axis``."""
    if scheme == "spectral":
        k_odd = grid.wavenumbers[1]
        return ifft(1j * k_odd[axis] * fft(data), grid)
    flat = data.reshape(-1, *grid.shape)
    out = np.stack([kernels.fd4(a, axis, grid.h, 1) for a in flat])
    return out.reshape(data.shape)


def _laplacian_array(data, grid, scheme):
    if scheme == "spectral":
        k2 = grid.wavenumbers[2]
        return ifft(-k2 * fft(data), grid)
    flat = data.reshape(-1, *grid.shape)
    out = np.stack(
        [sum(kernels.fd4(a, ax, grid.h, 2) for ax in range(3)) for a in flat]
    )
    return out.reshape(data.shape)


def gradient(f: ScalarField, scheme="spectral") -> VectorField:
    g = f.grid
    _check_scheme(scheme, g)
    if scheme == "spectral":
        fh = fft(f.data)
        k_odd = g.wavenumbers[1]
        return VectorField(g, np.stack([ifft(1j * k_odd[a] * fh, g) for a in range(3)]))
    return VectorField(g, np.stack([_deriv_array(f.data, g, a, scheme) for a in range(3)]))


def jacobian(v: VectorField, scheme="spectral") -> TensorField:
    """Tensor with entry ``(i, j) = d_i v_j``."""
    g = v.grid
    _check_scheme(scheme, g)
    if scheme == "spectral":
        vh = fft(v.data)
        k_odd = g.wavenumbers[1]
        return TensorField(g, np.stack([ifft(1j * k_odd[a] * vh, g) for a in range(3)]))
    return TensorField(g, np.stack([_deriv_array(v.data, g, a, scheme) for a in range(3)]))


def laplacian(f, scheme="spectral"):
    g = f.grid
    _check_scheme(scheme, g)
    return type(f)(g, _laplacian_array(f.data, g, scheme))


def divergence(v: VectorField, scheme="spectral") -> ScalarField:
    g = v.grid
    _check_scheme(scheme, g)
    if scheme == "spectral":
        k_odd = g.wavenumbers[1]
        vh = fft(v.data)
        return ScalarField(g, ifft(sum(1j * k_odd[a] * vh[a] for a in range(3)), g))
    return ScalarField(g, sum(_deriv_array(v.data[a], g, a, scheme) for a in range(3)))


def tensor_divergence(T: TensorField, scheme="spectral") -> VectorField:
    """Component ``i`` is ``sum_j d_j T(i, j)``."""
    g = T.grid
    _check_scheme(scheme, g)
    if scheme == "spectral":
        k_odd = g.wavenumbers[1]
        th = fft(T.data)
        return VectorField(
            g, ifft(sum(1j * k_odd[j] * th[:, j] for j in range(3)), g)
        )
    return VectorField(
        g, sum(_deriv_array(T.data[:, j], g, j, scheme) for j in range(3))
    )


def upsample(data, grid, factor):
    """Band-limited interpolation of ``data`` onto a grid ``factor`` times finer.

    Works on any stack of scalar arrays (leading axes are kept). The Nyquist
    plane of the coarse grid is dropped, so fields with Nyquist content are
    not reproduced exactly.
    """
    factor = int(factor)
    if factor == 1:
        return grid, np.array(data, dtype=np.float64, copy=True)
    if factor < 1:
        raise ConfigurationError("upsampling factor must be >= 1")
    grid.require_spectral()
    n = grid.n
    N = n * factor
    fine = Grid3(N, grid.box_half)
    # The coarse origin -L coincides with the fine origin, so no phase shift.
    spec = fft(data)
    lead = spec.shape[:-3]
    out = np.zeros(lead + (N, N, N // 2 + 1), dtype=complex)
    m = n // 2
    lo = slice(0, m)
    hi_src = slice(m + 1, n)
    hi_dst = slice(N - (m - 1), N)
    for s0, d0 in ((lo, lo), (hi_src, hi_dst)):
        for s1, d1 in ((lo, lo), (hi_src, hi_dst)):
            out[..., d0, d1, :m] = spec[..., s0, s1, :m]
    return fine, sfft.irfftn(out, s=fine.shape, axes=(-3, -2, -1)) * factor**3


def random_smooth(grid, rng, ncomp=1, kmax=4.0, amplitude=1.0):
    """Random real field whose Fourier support is ``|m|_inf <= kmax`` (integer modes).

    The result is band-limited well below Nyquist, so spectral identities hold
    to round-off.
    """
    n = grid.n
    m_full = sfft.fftfreq(n, 1.0 / n)
    m_half = sfft.rfftfreq(n, 1.0 / n)
    mask = (
        (np.abs(m_full)[:, None, None] <= kmax)
        & (np.abs(m_full)[None, :, None] <= kmax)
        & (np.abs(m_half)[None, None, :] <= kmax)
    )
    shape = (ncomp, n, n, n // 2 + 1)
    spec = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * mask
    data = sfft.irfftn(spec, s=grid.shape, axes=(-3, -2, -1))
    data *= amplitude / max(np.max(np.abs(data)), 1e-300)
    return data[0] if ncomp == 1 else data


# ---------------------------------------------------------------------------
# Cutoff functions


def _smooth_step(t):
    """C-infinity step ``S(t)``: 0 for t <= 0, 1 for t >= 1, with S' and S''."""
    t = np.asarray(t, dtype=np.float64)
    S = np.where(t >= 1.0, 1.0, 0.0)
    dS = np.zeros_like(t)
    d2S = np.zeros_like(t)
    inner = (t > 0.0) & (t < 1.0)
    ti = t[inner]
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        phi = 1.0 / ti - 1.0 / (1.0 - ti)
        Si = 1.0 / (1.0 + np.exp(phi))
        # S(1-S) = 1 / (4 cosh^2(phi/2)), overflow-safe.
        s1s = 1.0 / (4.0 * np.cosh(0.5 * phi) ** 2)
        w = 1.0 / ti**2 + 1.0 / (1.0 - ti) ** 2
        dw = -2.0 / ti**3 + 2.0 / (1.0 - ti) ** 3
        dSi = s1s * w
        d2Si = dSi * (1.0 - 2.0 * Si) * w + s1s * dw
    # Beyond these points S(1-S) < e^-190: derivatives are zero in float64.
    flat = (ti < 0.005) | (ti > 0.995)
    dSi[flat] = 0.0
    d2Si[flat] = 0.0
    S[inner] = Si
    dS[inner] = dSi
    d2S[inner] = d2Si
    return S, dS, d2S


def cutoff_profile(s):
    """Radial profile ``psi(s)`` with derivatives: 1 on [0, 1/2], 0 on [1, inf)."""
    S, dS, d2S = _smooth_step(2.0 * np.asarray(s, dtype=np.float64) - 1.0)
    return 1.0 - S, -2.0 * dS, -4.0 * d2S


@dataclass(frozen=True)
class Cutoff:
    """Radial cutoff ``theta_R(x) = psi(|x| / R)``."""

    radius: float

    def __post_init__(self):
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise DomainError(f"cutoff radius must be positive, got {self.radius!r}")

    def values(self, r):
        """``theta``, ``psi'(r/R)/R`` and ``Delta theta`` at radii ``r``."""
        R = self.radius
        r = np.asarray(r, dtype=np.float64)
        psi, d1, d2 = cutoff_profile(r / R)
        safe = np.where(r > 0, r, 1.0)
        lap = d2 / R**2 + np.where(r > 0, 2.0 * d1 / (safe * R), 0.0)
        return psi, d1 / R, lap

    def fourier(self, xi, nodes=24):
        """``int theta_R(x) exp(-i xi·x) dx`` at wavenumber moduli ``xi``.

        The radial integral ``4 pi int_0^R psi(r/R) r^2 sinc(xi r) dr`` is
        evaluated by composite Gauss-Legendre quadrature with enough panels to
        resolve the largest oscillation.
        """
        xi = np.asarray(xi, dtype=np.float64)
        R = self.radius
        panels = 16 + int(np.ceil(float(np.max(xi, initial=0.0)) * R / np.pi))
        x, w = np.polynomial.legendre.leggauss(nodes)
        edges = np.linspace(0.0, R, panels + 1)
        half = 0.5 * np.diff(edges)
        r = ((edges[:-1] + half)[:, None] + half[:, None] * x[None, :]).ravel()
        wr = (half[:, None] * w[None, :]).ravel()
        weight = 4.0 * np.pi * cutoff_profile(r / R)[0] * r**2 * wr
        flat = xi.ravel()
        out = np.empty(flat.shape)
        for s in range(0, flat.size, 512):
            chunk = flat[s:s + 512]
            out[s:s + 512] = np.sinc(np.outer(chunk, r) / np.pi) @ weight
        return out.reshape(xi.shape)

    def derivative_bounds(self, samples=200001):
        """Sup norms of ``|grad theta|`` and ``|Delta theta|`` from a dense radial sample."""
        s = np.linspace(0.5, 1.0, samples)
        _, g, lap = self.values(s * self.radius)
        return float(np.max(np.abs(g))), float(np.max(np.abs(lap)))


@dataclass(frozen=True, eq=False)
class CutoffFields:
    cutoff: Cutoff
    theta: ScalarField
    grad: VectorField
    lap: ScalarField


def cutoff_field(grid: Grid3, R: float, margin: float = 1.0) -> CutoffFields:
    """Sample ``theta_R`` with its closed-form gradient and Laplacian.

    ``R`` must satisfy ``1 <= R <= margin * L`` so the support fits the box.
    """
    if not (1.0 <= R <= margin * grid.box_half * (1 + 1e-12)):
        raise DomainError(
            f"cutoff radius {R} outside [1, {margin * grid.box_half}] for this box"
        )
    c = Cutoff(float(R))
    r = grid.radius
    theta, g, lap = c.values(r)
    safe = np.where(r > 0, r, 1.0)
    x = grid.coords
    grad = np.stack([np.broadcast_to(g * xi / safe, grid.shape) for xi in x])
    return CutoffFields(c, ScalarField(grid, theta), VectorField(grid, grad), ScalarField(grid, lap))


class CutoffPairing:
    """Integrals of sampled fields against ``theta_R``, ``grad theta_R`` and ``Delta theta_R``.

    Uses Parseval's identity with the exact Fourier coefficients of the
    cutoff, so the result is exact for band-limited integrands; sampling the
    cutoff itself would leave an aliasing error from its spectral tail.
    Requires ``R <= L`` so the support fits in one period.
    """

    def __init__(self, grid: Grid3, R: float):
        grid.require_spectral()
        if not (0 < R <= grid.box_half * (1 + 1e-12)):
            raise DomainError(f"cutoff radius {R} must lie in (0, {grid.box_half}]")
        self.grid = grid
        self.cutoff = Cutoff(float(R))
        k, _, k2 = grid.wavenumbers
        uniq, inv = np.unique(k2, return_inverse=True)
        theta_hat = self.cutoff.fourier(np.sqrt(uniq))[inv].reshape(k2.shape)
        n = grid.n
        m = [np.rint(a * grid.box_half / np.pi).astype(np.int64) for a in k]
        # Samples start at -L: shift coefficients to centred coordinates.
        sign = np.where((m[0] + m[1] + m[2]) % 2 == 0, 1.0, -1.0)
        w = np.full(n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        base = sign * theta_hat * w / float(n) ** 3
        self._theta = base
        self._grad = tuple(-1j * ka * base for ka in k)
        self._lap = -k2 * base

    def theta_spec(self, spec):
        """``int f theta_R`` from the real-FFT coefficients of ``f``."""
        return float(np.sum((spec * self._theta).real))

    def grad_spec(self, spec):
        """``int F · grad theta_R`` from the coefficients of a vector field."""
        return float(sum(np.sum((spec[i] * self._grad[i]).real) for i in range(3)))

    def lap_spec(self, spec):
        """``int f Delta theta_R`` from the coefficients of ``f``."""
        return float(np.sum((spec * self._lap).real))

    def theta(self, f):
        """``int f theta_R`` for a scalar array."""
        return self.theta_spec(fft(f))

    def grad(self, F):
        """``int F · grad theta_R`` for a (3, n, n, n) array."""
        return self.grad_spec(fft(F))

    def lap(self, f):
        """``int f Delta theta_R``."""
        return self.lap_spec(fft(f))


# ---------------------------------------------------------------------------
# Ball and shell quadrature


@dataclass(frozen=True)
class BallIntegrals:
    radii: np.ndarray
    smoothed: np.ndarray
    sharp: np.ndarray


def ball_integrals(f, radii, power=1.0, center=(0.0, 0.0, 0.0), values=None):
    """``int_{B(center, R)} |f|^power`` for each ``R``, smoothed and sharp masks.

    The smoothed mask ramps linearly from 1 to 0 across one cell width centred
    on the sphere; the sharp mask is the plain indicator ``|x - center| < R``.
    ``values`` may pass a precomputed ``|f|^power`` array.
    """
    grid = f.grid
    radii = np.atleast_1d(np.asarray(radii, dtype=np.float64))
    if values is None:
        values = magnitude(f) ** power
    sm, sh = kernels.shell_sums(values, grid.origin, grid.h, radii, center)
    vol = grid.cell_volume
    return BallIntegrals(radii, sm * vol, sh * vol)


@dataclass(frozen=True)
class AnnulusIntegral:
    R: float
    value: float
    sharp: float
    under_resolved: bool


def annulus_integral(f, R, power=1.0, values=None) -> AnnulusIntegral:
    """``int_{R/2 < |x| < R} |f|^power`` as ``ball(R) - ball(R/2)``."""
    b = ball_integrals(f, [R / 2.0, R], power, values=values)
    return AnnulusIntegral(
        float(R),
        float(b.smoothed[1] - b.smoothed[0]),
        float(b.sharp[1] - b.sharp[0]),
        bool(R / 2.0 < 4.0 * f.grid.h),
    )


@dataclass(frozen=True)
class DecayReport:
    ratio: float
    contaminated: bool


def decay_margin(f, fraction=DECAY_FRACTION, threshold=DECAY_THRESHOLD) -> DecayReport:
    """Compare ``|f|`` outside ``fraction * L`` with its global max."""
    mag = magnitude(f)
    peak = float(mag.max()) if mag.size else 0.0
    if peak == 0.0:
        return DecayReport(0.0, False)
    outer = f.grid.radius > fraction * f.grid.box_half
    ratio = float(mag[..., outer].max()) / peak if np.any(outer) else 0.0
    return DecayReport(ratio, ratio > threshold)


def l2_norm_sq(f):
    return float(np.sum(np.asarray(f.data) ** 2) * f.grid.cell_volume)


def lp_norm(f, p):
    return float((np.sum(magnitude(f) ** p) * f.grid.cell_volume) ** (1.0 / p))
