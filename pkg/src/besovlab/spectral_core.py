"""Periodic-box Fourier representation of fields and exact multiplier operators.

Everything downstream (projectors, norms, solvers, stress budgets) is built on
the objects here: a cubic 2*pi-periodic grid, complex Fourier coefficient
arrays with the convention

    u(x) = sum_k  u_hat(k) * exp(i k . x),      k in {-n/2, ..., n/2 - 1}^3,

and pointwise Fourier multipliers (heat semigroup, Leray projector, Riesz
symbols, derivatives).  Fields are real in physical space (Hermitian
coefficients) and mean-free (u_hat(0) = 0).

Quadratic products come in two flavours:

* ``multiply_dealiased`` -- pseudo-spectral product with the 2/3-rule mask,
  used inside time integration (standard hygiene).
* ``multiply_exact``     -- zero-padded (factor 2) product, an exact circular
  convolution for every retained mode; used wherever an algebraic identity
  is asserted to machine precision.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as _fft

TWO_PI = 2.0 * np.pi
BOX_VOLUME = TWO_PI**3

_FFT_WORKERS = 1


def set_fft_workers(workers: int) -> None:
    """Set the worker count for all FFT calls (explicit, never ambient)."""
    global _FFT_WORKERS
    if workers < 1:
        raise ValueError("workers must be >= 1")
    _FFT_WORKERS = int(workers)


def get_fft_workers() -> int:
    return _FFT_WORKERS


def _fftn(a):
    return _fft.fftn(a, axes=(-3, -2, -1), workers=_FFT_WORKERS)


def _ifftn(a):
    return _fft.ifftn(a, axes=(-3, -2, -1), workers=_FFT_WORKERS)


class Grid:
    """Cubic periodic grid: n points per axis on [0, 2*pi)^3.

    The frequency lattice is the integer cube {-n/2, ..., n/2-1}^3 in numpy
    FFT ordering.  n must be even and FFT-friendly; powers of two are the
    common case, n = 48 is supported for the stability experiment.
    """

    def __init__(self, n: int, dim: int = 3, length: float = TWO_PI,
                 dealias_fraction: float = 2.0 / 3.0):
        if dim != 3:
            raise ValueError("only dim = 3 is supported")
        if length != TWO_PI:
            raise ValueError("box side is fixed to 2*pi")
        if n < 16 or n > 128 or n % 2 != 0:
            raise ValueError("n must be even with 16 <= n <= 128")
        self.n = int(n)
        self.dim = 3
        self.length = TWO_PI
        self.dealias_fraction = float(dealias_fraction)

        k1 = np.fft.fftfreq(n, 1.0 / n).astype(np.int64)
        self.k1 = k1
        self.kx = k1[:, None, None].astype(np.float64)
        self.ky = k1[None, :, None].astype(np.float64)
        self.kz = k1[None, None, :].astype(np.float64)
        self.k_sq = (self.kx**2 + self.ky**2 + self.kz**2)
        self.k_abs = np.sqrt(self.k_sq)
        # 1/|k|^2 with the zero mode neutralised (mean-free fields only)
        inv = self.k_sq.copy()
        inv[0, 0, 0] = 1.0
        self.k_sq_inv = 1.0 / inv
        self.k_sq_inv[0, 0, 0] = 0.0

        # odd-derivative wavenumbers: Nyquist row zeroed to preserve realness
        kd = k1.astype(np.float64).copy()
        kd[n // 2] = 0.0
        self.kdx = kd[:, None, None]
        self.kdy = kd[None, :, None]
        self.kdz = kd[None, None, :]

        self.dealias_kmax = int(np.floor(self.dealias_fraction * (n // 2)))
        keep1 = np.abs(k1) <= self.dealias_kmax
        self.dealias_mask = (keep1[:, None, None] & keep1[None, :, None]
                             & keep1[None, None, :])
        self.dx = TWO_PI / n
        self.cell_volume = self.dx**3
        self.corner_radius = np.sqrt(3.0) * (n / 2.0)

        # rfft (half-spectrum) layout: last axis holds kz = 0 .. n/2
        nh = n // 2 + 1
        self.nh = nh
        kz_h = np.arange(nh, dtype=np.float64)[None, None, :]
        self.kz_h = kz_h
        self.k_sq_h = self.kx**2 + self.ky**2 + kz_h**2
        inv_h = self.k_sq_h.copy()
        inv_h[0, 0, 0] = 1.0
        self.k_sq_inv_h = 1.0 / inv_h
        self.k_sq_inv_h[0, 0, 0] = 0.0
        kdz = np.arange(nh, dtype=np.float64)
        kdz[nh - 1] = 0.0
        self.kdz_h = kdz[None, None, :]
        keep_h = np.arange(nh) <= self.dealias_kmax
        self.dealias_mask_h = (keep1[:, None, None] & keep1[None, :, None]
                               & keep_h[None, None, :])
        w = np.full(nh, 2.0)
        w[0] = 1.0
        w[nh - 1] = 1.0
        self.parseval_h = w[None, None, :]

    def axis_points(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    def __eq__(self, other):
        return isinstance(other, Grid) and self.n == other.n

    def __hash__(self):
        return hash(("Grid", self.n))

    def __repr__(self):
        return f"Grid(n={self.n})"


class SpectralField:
    """Real scalar or 3-vector field stored by its Fourier coefficients.

    coeffs has shape (components, n, n, n), complex128, Hermitian
    (coeffs(-k) = conj(coeffs(k))) and mean-free (coeffs(0) = 0).
    """

    __slots__ = ("grid", "coeffs", "meta")

    def __init__(self, grid: Grid, coeffs: np.ndarray, meta: dict | None = None):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.ndim == 3:
            coeffs = coeffs[None]
        if coeffs.shape[0] not in (1, 3) or coeffs.shape[1:] != (grid.n,) * 3:
            raise ValueError(f"bad coefficient shape {coeffs.shape}")
        if not np.all(np.isfinite(coeffs.view(np.float64))):
            raise ValueError("non-finite Fourier coefficients")
        self.grid = grid
        self.coeffs = coeffs
        self.meta = meta

    # -- constructors ------------------------------------------------------

    @classmethod
    def zeros(cls, grid: Grid, components: int = 3) -> "SpectralField":
        return cls(grid, np.zeros((components,) + (grid.n,) * 3, dtype=np.complex128))

    @classmethod
    def from_physical(cls, grid: Grid, values: np.ndarray) -> "SpectralField":
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 3:
            values = values[None]
        c = _fftn(values) / grid.n**3
        c[(slice(None), 0, 0, 0)] = 0.0
        return cls(grid, c)

    @classmethod
    def from_modes(cls, grid: Grid, modes: dict, components: int = 3) -> "SpectralField":
        """Build a real field from {k-tuple: complex amplitude (vector)} pairs.

        Each entry contributes Re(a * exp(i k.x)); the Hermitian partner is
        inserted automatically.
        """
        c = np.zeros((components,) + (grid.n,) * 3, dtype=np.complex128)
        n = grid.n
        for k, amp in modes.items():
            amp = np.atleast_1d(np.asarray(amp, dtype=np.complex128))
            if amp.shape != (components,):
                raise ValueError("amplitude shape does not match components")
            if all(ki == 0 for ki in k):
                raise ValueError("k = 0 would break mean-freeness")
            i, j, l = (int(ki) % n for ki in k)
            im, jm, lm = ((-int(ki)) % n for ki in k)
            c[:, i, j, l] += amp / 2.0
            c[:, im, jm, lm] += np.conj(amp) / 2.0
        return cls(grid, c)

    # -- basic algebra -----------------------------------------------------

    @property
    def components(self) -> int:
        return self.coeffs.shape[0]

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def __add__(self, other):
        self._check_compatible(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_compatible(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.grid, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)

    def _check_compatible(self, other):
        if not isinstance(other, SpectralField):
            raise TypeError("expected a SpectralField")
        if other.grid != self.grid or other.components != self.components:
            raise ValueError("grid/component mismatch")

    # -- transforms and diagnostics ----------------------------------------

    def to_physical(self) -> np.ndarray:
        return _ifftn(self.coeffs).real * self.grid.n**3

    def l2_norm(self) -> float:
        """L2 norm over the box, via Parseval."""
        return float(np.sqrt(BOX_VOLUME * np.sum(np.abs(self.coeffs) ** 2)))

    def h1_seminorm_sq(self) -> float:
        """||grad u||_2^2, spectrally."""
        return float(BOX_VOLUME * np.sum(self.grid.k_sq * np.abs(self.coeffs) ** 2))

    def divergence_max(self) -> float:
        """max_k |k . u_hat(k)|; zero for divergence-free fields."""
        if self.components != 3:
            raise ValueError("divergence needs a 3-component field")
        g = self.grid
        d = (g.kx * self.coeffs[0] + g.ky * self.coeffs[1] + g.kz * self.coeffs[2])
        return float(np.max(np.abs(d)))

    def hermitian_defect(self) -> float:
        c = self.coeffs
        flipped = np.conj(c[:, ::-1, ::-1, ::-1])
        flipped = np.roll(flipped, shift=1, axis=(1, 2, 3))
        return float(np.max(np.abs(c - flipped)))


# ---------------------------------------------------------------------------
# multiplier operators
# ---------------------------------------------------------------------------


def apply_heat(u: SpectralField, t: float) -> SpectralField:
    """Heat semigroup e^{t Lap} as an exact Fourier multiplier."""
    if not np.isfinite(t) or t < 0:
        raise ValueError("heat time must be finite and >= 0")
    return SpectralField(u.grid, u.coeffs * np.exp(-u.grid.k_sq * t))


def heat_multiplier(grid: Grid, t: float) -> np.ndarray:
    if not np.isfinite(t) or t < 0:
        raise ValueError("heat time must be finite and >= 0")
    return np.exp(-grid.k_sq * t)


def leray_project_coeffs(grid: Grid, c: np.ndarray) -> np.ndarray:
    """P = I - k k^T / |k|^2 applied to a (3, n, n, n) coefficient array."""
    kdotc = grid.kx * c[0] + grid.ky * c[1] + grid.kz * c[2]
    factor = kdotc * grid.k_sq_inv
    out = np.empty_like(c)
    out[0] = c[0] - grid.kx * factor
    out[1] = c[1] - grid.ky * factor
    out[2] = c[2] - grid.kz * factor
    return out


def leray_project(v: SpectralField) -> SpectralField:
    """Project onto divergence-free fields; gradients map to zero."""
    if v.components != 3:
        raise ValueError("Leray projection needs a 3-component field")
    return SpectralField(v.grid, leray_project_coeffs(v.grid, v.coeffs))


def gradient_coeffs(grid: Grid, c: np.ndarray) -> np.ndarray:
    """d_l of each component: shape (3,) + c.shape; first axis is l."""
    return np.stack([1j * grid.kdx * c, 1j * grid.kdy * c, 1j * grid.kdz * c])


def divergence_of_tensor(grid: Grid, T: np.ndarray) -> np.ndarray:
    """(div T)_i = d_l T_{l i} for a (3, 3, n, n, n) coefficient array."""
    return 1j * (grid.kdx * T[0] + grid.kdy * T[1] + grid.kdz * T[2])


# ---------------------------------------------------------------------------
# quadratic products
# ---------------------------------------------------------------------------


def coeffs_to_physical(grid: Grid, c: np.ndarray) -> np.ndarray:
    return _ifftn(c).real * grid.n**3


def physical_to_coeffs(grid: Grid, v: np.ndarray) -> np.ndarray:
    return _fftn(v) / grid.n**3


def multiply_dealiased(grid: Grid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise product of two coefficient arrays, 2/3-rule dealiased."""
    pa = coeffs_to_physical(grid, a)
    pb = coeffs_to_physical(grid, b)
    return physical_to_coeffs(grid, pa * pb) * grid.dealias_mask


def pad_spectrum(c: np.ndarray, n: int, m: int) -> np.ndarray:
    """Embed coefficients of an n-lattice into an m-lattice (m >= n)."""
    shifted = np.fft.fftshift(c, axes=(-3, -2, -1))
    shape = c.shape[:-3] + (m, m, m)
    out = np.zeros(shape, dtype=c.dtype)
    lo = (m - n) // 2
    out[..., lo:lo + n, lo:lo + n, lo:lo + n] = shifted
    return np.fft.ifftshift(out, axes=(-3, -2, -1))


def truncate_spectrum(c: np.ndarray, m: int, n: int) -> np.ndarray:
    """Restrict coefficients of an m-lattice to the centred n-lattice."""
    shifted = np.fft.fftshift(c, axes=(-3, -2, -1))
    lo = (m - n) // 2
    block = shifted[..., lo:lo + n, lo:lo + n, lo:lo + n]
    return np.fft.ifftshift(block, axes=(-3, -2, -1))


def multiply_exact(grid: Grid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact convolution of two coefficient arrays, truncated to the lattice.

    Zero-padding by a factor 2 makes every retained mode alias-free.
    """
    n = grid.n
    m = 2 * n
    pa = _ifftn(pad_spectrum(a, n, m)).real * m**3
    pb = _ifftn(pad_spectrum(b, n, m)).real * m**3
    prod = _fftn(pa * pb) / m**3
    return truncate_spectrum(prod, m, n)


def pressure_from_velocity(u: SpectralField) -> SpectralField:
    """Pressure from the velocity: pi_hat = -(k_i k_j/|k|^2) FT(u_i u_j).

    The quadratic product is dealiased; the identity
    -Lap pi = div div (u x u) then holds exactly on the dealiased lattice.
    """
    if u.components != 3:
        raise ValueError("pressure needs a 3-component velocity")
    g = u.grid
    kvec = (g.kx, g.ky, g.kz)
    pi = np.zeros((g.n,) * 3, dtype=np.complex128)
    for i in range(3):
        for j in range(i, 3):
            uij = multiply_dealiased(g, u.coeffs[i], u.coeffs[j])
            w = kvec[i] * kvec[j] * g.k_sq_inv
            pi -= w * uij * (1.0 if i == j else 2.0)
    pi[0, 0, 0] = 0.0
    return SpectralField(g, pi[None])


def tensor_product_coeffs(grid: Grid, a: np.ndarray, b: np.ndarray,
                          exact: bool = False) -> np.ndarray:
    """(a x b)_{l i} = a_l b_i as a (3, 3, n, n, n) coefficient array."""
    mult = multiply_exact if exact else multiply_dealiased
    out = np.empty((3, 3) + a.shape[1:], dtype=np.complex128)
    for l in range(3):
        for i in range(3):
            out[l, i] = mult(grid, a[l], b[i])
    return out


def convective_coeffs(grid: Grid, a: np.ndarray, b: np.ndarray,
                      exact: bool = False) -> np.ndarray:
    """P div(a x b) on coefficient arrays (the projected convective term)."""
    T = tensor_product_coeffs(grid, a, b, exact=exact)
    return leray_project_coeffs(grid, divergence_of_tensor(grid, T))


def nonlinear_term(u: SpectralField, v: SpectralField) -> SpectralField:
    """P div(u x v), dealiased: the pseudo-spectral convective term u.grad v."""
    if u.components != 3 or v.components != 3:
        raise ValueError("nonlinear term needs 3-component fields")
    return SpectralField(u.grid, convective_coeffs(u.grid, u.coeffs, v.coeffs))


# ---------------------------------------------------------------------------
# half-spectrum (rfft layout) fast path
# ---------------------------------------------------------------------------


def half_to_full(h: np.ndarray, n: int) -> np.ndarray:
    """Expand an rfft-layout coefficient array to the full Hermitian lattice."""
    nh = n // 2 + 1
    full = np.empty(h.shape[:-1] + (n,), dtype=np.complex128)
    full[..., :nh] = h
    tail = np.conj(h[..., 1:n // 2])
    tail = np.roll(tail[..., ::-1, :, :], 1, axis=-3)
    tail = np.roll(tail[..., :, ::-1, :], 1, axis=-2)
    full[..., nh:] = tail[..., ::-1]
    return full


def full_to_half(c: np.ndarray, n: int) -> np.ndarray:
    return np.ascontiguousarray(c[..., :n // 2 + 1])


def half_to_physical(grid: Grid, h: np.ndarray) -> np.ndarray:
    return _fft.irfftn(h, s=(grid.n,) * 3, axes=(-3, -2, -1),
                       workers=_FFT_WORKERS) * grid.n**3


def physical_to_half(grid: Grid, v: np.ndarray) -> np.ndarray:
    return _fft.rfftn(v, axes=(-3, -2, -1), workers=_FFT_WORKERS) / grid.n**3


def heat_multiplier_half(grid: Grid, t: float) -> np.ndarray:
    if not np.isfinite(t) or t < 0:
        raise ValueError("heat time must be finite and >= 0")
    return np.exp(-grid.k_sq_h * t)


def leray_project_half(grid: Grid, c: np.ndarray) -> np.ndarray:
    kdotc = grid.kx * c[0] + grid.ky * c[1] + grid.kz_h * c[2]
    factor = kdotc * grid.k_sq_inv_h
    out = np.empty_like(c)
    out[0] = c[0] - grid.kx * factor
    out[1] = c[1] - grid.ky * factor
    out[2] = c[2] - grid.kz_h * factor
    return out


def half_l2_sq(grid: Grid, h: np.ndarray) -> float:
    """sum over the full lattice of |c|^2, from the half layout."""
    return float(np.sum(grid.parseval_h * (h.real**2 + h.imag**2)))


def half_inner(grid: Grid, a: np.ndarray, b: np.ndarray) -> float:
    """Re sum over the full lattice of conj(a) b, from the half layout."""
    return float(np.sum(grid.parseval_h * (a.real * b.real + a.imag * b.imag)))


# ---------------------------------------------------------------------------
# Duhamel bilinear operator
# ---------------------------------------------------------------------------


def _series_data(traj):
    """Accept anything exposing .times and .fields (e.g. a Trajectory)."""
    times = np.asarray(traj.times, dtype=np.float64)
    return times, list(traj.fields)


def duhamel_bilinear_series(grid: Grid, times: np.ndarray,
                            f_coeffs: list, g_coeffs: list,
                            exact: bool = True) -> list:
    """B(f,g) at every snapshot time by trapezoidal quadrature.

    B(f,g)(t) = -int_0^t e^{(t-s) Lap} P div(f(s) x g(s)) ds, accumulated
    recursively so the heat factors compose exactly.  The sign makes the
    mild identity u = e^{t Lap} u0 + B(u, u) hold for the momentum equation.
    """
    W = [-convective_coeffs(grid, fc, gc, exact=exact)
         for fc, gc in zip(f_coeffs, g_coeffs)]
    out = [np.zeros_like(W[0])]
    for i in range(len(times) - 1):
        ds = times[i + 1] - times[i]
        E = heat_multiplier(grid, ds)
        out.append(E * (out[i] + 0.5 * ds * W[i]) + 0.5 * ds * W[i + 1])
    return out


def duhamel_bilinear(f, g, t: float, exact: bool = True) -> SpectralField:
    """B(f, g)(t) for two sampled trajectories on a common time grid."""
    tf, ff = _series_data(f)
    tg, gf = _series_data(g)
    if len(tf) != len(tg) or not np.allclose(tf, tg, rtol=0, atol=1e-12):
        raise ValueError("trajectories must share a common snapshot time grid")
    if t > tf[-1] + 1e-12:
        raise ValueError("t is beyond the trajectory horizon")
    idx = int(np.argmin(np.abs(tf - t)))
    if abs(tf[idx] - t) > 1e-10:
        raise ValueError("t must coincide with a snapshot time")
    grid = ff[0].grid
    fc = [x.coeffs for x in ff[:idx + 1]]
    gc = [x.coeffs for x in gf[:idx + 1]]
    series = duhamel_bilinear_series(grid, tf[:idx + 1], fc, gc, exact=exact)
    ds = float(np.max(np.diff(tf[:idx + 1]))) if idx > 0 else 0.0
    return SpectralField(grid, series[idx], meta={"quadrature_step": ds})
