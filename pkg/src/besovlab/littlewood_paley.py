"""Dyadic frequency decomposition: the profile pair, projectors, support algebra.

The radial profiles are built by the telescoping construction

    S(r)   smooth, = 1 on r <= 3/4, = 0 on r >= 4/3   (exp(-1/x) glue),
    chi    := S,
    phi(r) := S(r/2) - S(r),

so phi is supported in {3/4 <= r <= 8/3} and the partition

    chi(r) + sum_{j=0..J} phi(2^-j r) = S(2^-(J+1) r)

telescopes exactly (halving a float is exact), hence equals 1 on every
lattice radius once J is large enough.  The bank keeps two index ranges:

* ``j_max``  -- the range used for Besov-type sums, floor(log2(n/2)) - 1;
* ``j_cut``  -- the largest j whose annulus still meets the lattice; the
  partition with blocks 0..j_cut reconstructs every lattice mode exactly.

Projector applications for j in (j_max, j_cut] are well defined and are used
by the support-identity checks and the high-frequency sweeps; norm sums only
ever run over 0..j_max and reports record the range used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral_core import (
    BOX_VOLUME,
    Grid,
    SpectralField,
    coeffs_to_physical,
    multiply_exact,
)

_SUPPORT_LO = 0.75
_SUPPORT_HI = 4.0 / 3.0


def _glue(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def lowpass_profile(r) -> np.ndarray:
    """Smooth radial step: 1 on r <= 3/4, 0 on r >= 4/3."""
    r = np.asarray(r, dtype=np.float64)
    x = (r - _SUPPORT_LO) / (_SUPPORT_HI - _SUPPORT_LO)
    f1 = _glue(x)
    f2 = _glue(1.0 - x)
    return 1.0 - f1 / (f1 + f2)


def annulus_profile(r) -> np.ndarray:
    """phi(r) = S(r/2) - S(r), supported in {3/4 <= r <= 8/3}."""
    r = np.asarray(r, dtype=np.float64)
    return lowpass_profile(r / 2.0) - lowpass_profile(r)


class LittlewoodPaleyBank:
    """Sampled dyadic profiles on a grid's frequency lattice."""

    def __init__(self, grid: Grid):
        j_max = int(math.floor(math.log2(grid.n / 2.0))) - 1
        if j_max < 2:
            raise ValueError("grid too small to host at least 3 dyadic shells")
        self.grid = grid
        self.j_min = 0
        self.j_max = j_max
        # smallest J with S(2^-(J+1) r_corner) = 1, i.e. 2^(J+1) >= (4/3) r_corner
        self.j_cut = max(j_max, math.ceil(math.log2(grid.corner_radius / _SUPPORT_LO)) - 1)
        # radius up to which the 0..j_max partition already sums to one
        self.interior_radius = _SUPPORT_LO * 2.0 ** (j_max + 1)
        self._phi_cache: dict[int, np.ndarray] = {}
        self._chi_cache: dict[int, np.ndarray] = {}

    # -- sampled weights ----------------------------------------------------

    def phi_weights(self, j: int) -> np.ndarray:
        if j not in self._phi_cache:
            self._phi_cache[j] = annulus_profile(self.grid.k_abs * 2.0 ** (-j))
        return self._phi_cache[j]

    def chi_weights(self, j: int) -> np.ndarray:
        if j not in self._chi_cache:
            self._chi_cache[j] = lowpass_profile(self.grid.k_abs * 2.0 ** (-j))
        return self._chi_cache[j]

    @property
    def j_range(self) -> tuple[int, int]:
        return (self.j_min, self.j_max)

    def describe(self) -> dict:
        return {
            "n": self.grid.n,
            "j_min": self.j_min,
            "j_max": self.j_max,
            "j_cut": self.j_cut,
            "interior_radius": self.interior_radius,
            "phi_support": [_SUPPORT_LO, 8.0 / 3.0],
            "chi_support_radius": _SUPPORT_HI,
        }


def build_bank(grid: Grid) -> LittlewoodPaleyBank:
    return LittlewoodPaleyBank(grid)


_BANKS: dict[int, LittlewoodPaleyBank] = {}


def default_bank(grid: Grid) -> LittlewoodPaleyBank:
    if grid.n not in _BANKS:
        _BANKS[grid.n] = build_bank(grid)
    return _BANKS[grid.n]


# ---------------------------------------------------------------------------
# projectors
# ---------------------------------------------------------------------------


def delta_j(f: SpectralField, j: int, bank: LittlewoodPaleyBank | None = None) -> SpectralField:
    """Dyadic block: coefficients weighted by phi(2^-j |k|)."""
    bank = bank or default_bank(f.grid)
    if j < bank.j_min or j > bank.j_cut:
        raise ValueError(f"block index {j} outside projector range [0, {bank.j_cut}]")
    return SpectralField(f.grid, f.coeffs * bank.phi_weights(j))


def s_j(f: SpectralField, j: int, bank: LittlewoodPaleyBank | None = None) -> SpectralField:
    """Smooth low-pass chi(2^-j D); j above the range acts as the identity,
    far below it only the (zero) mean survives."""
    bank = bank or default_bank(f.grid)
    if j > bank.j_cut:
        return f.copy()
    if j < -60:
        return SpectralField(f.grid, np.zeros_like(f.coeffs))
    return SpectralField(f.grid, f.coeffs * bank.chi_weights(j))


def delta_j_coeffs(bank: LittlewoodPaleyBank, c: np.ndarray, j: int) -> np.ndarray:
    return c * bank.phi_weights(j)


def s_j_coeffs(bank: LittlewoodPaleyBank, c: np.ndarray, j: int) -> np.ndarray:
    if j > bank.j_cut:
        return c.copy()
    return c * bank.chi_weights(j)


def partition_residual(bank: LittlewoodPaleyBank, j_hi: int | None = None,
                       r_max: float | None = None) -> dict:
    """max over nonzero lattice radii of |chi + sum_j phi - 1|.

    With j_hi = j_cut (default) the sum reconstructs every lattice shell; with
    j_hi = j_max the residual is checked up to the interior radius.
    """
    if j_hi is None:
        j_hi = bank.j_cut
    r = np.unique(bank.grid.k_abs)
    r = r[r > 0]
    if r_max is None:
        r_max = bank.interior_radius if j_hi < bank.j_cut else float(r[-1])
    r = r[r <= r_max + 1e-9]
    total = lowpass_profile(r)
    for j in range(bank.j_min, j_hi + 1):
        total = total + annulus_profile(r * 2.0 ** (-j))
    resid = np.abs(total - 1.0)
    return {
        "max_residual": float(np.max(resid)),
        "j_range_used": [bank.j_min, int(j_hi)],
        "radius_max": float(r_max),
        "shells_checked": int(r.size),
    }


def interior_sum_residual(bank: LittlewoodPaleyBank) -> float:
    """max |sum_j phi(2^-j r) - 1| over interior shells r in [4/3, interior]."""
    r = np.unique(bank.grid.k_abs)
    r = r[(r >= _SUPPORT_HI) & (r <= bank.interior_radius + 1e-9)]
    total = np.zeros_like(r)
    for j in range(bank.j_min, bank.j_cut + 1):
        total += annulus_profile(r * 2.0 ** (-j))
    return float(np.max(np.abs(total - 1.0)))


# ---------------------------------------------------------------------------
# frequency-support algebra
# ---------------------------------------------------------------------------


def check_product_support_low(a: SpectralField, b: SpectralField, j: int, n0: int,
                              bank: LittlewoodPaleyBank | None = None,
                              strict: bool = True) -> float:
    """Residual ||S_j(S_{j-n0}a S_{j-n0}b) - S_{j-n0}a S_{j-n0}b||_2.

    Zero to machine precision when n0 >= 3 (low-frequency products cannot
    reach past the low-pass window).  strict=False allows deliberate
    violations for counterexample probes.
    """
    bank = bank or default_bank(a.grid)
    if strict and n0 < 3:
        raise ValueError("the low-frequency support identity needs n0 >= 3")
    if j - n0 < bank.j_min:
        raise ValueError(f"j - n0 = {j - n0} is below the projector range")
    if j > bank.j_cut:
        raise ValueError(f"j = {j} above projector range")
    la = s_j_coeffs(bank, a.coeffs, j - n0)
    lb = s_j_coeffs(bank, b.coeffs, j - n0)
    prod = np.stack([multiply_exact(a.grid, la[c], lb[c])
                     for c in range(la.shape[0])])
    resid = prod - s_j_coeffs(bank, prod, j)
    return float(np.sqrt(BOX_VOLUME * np.sum(np.abs(resid) ** 2)))


def check_product_support_high(a: SpectralField, b: SpectralField, j: int,
                               j1: int, j2: int, n1: int,
                               bank: LittlewoodPaleyBank | None = None,
                               strict: bool = True) -> float:
    """Residual ||S_j(Delta_{j1}a Delta_{j2}b)||_2.

    Zero to machine precision when j1 >= j + n1 with n1 >= 5 and j2 <= j1 - 2
    (the product's spectrum sits in an annulus far above the low-pass ball).
    """
    bank = bank or default_bank(a.grid)
    if strict:
        if n1 < 5:
            raise ValueError("the high-frequency support identity needs n1 >= 5")
        if j1 < j + n1:
            raise ValueError(f"need j1 >= j + n1 (got j1={j1}, j+n1={j + n1})")
        if j2 > j1 - 2:
            raise ValueError(f"need j2 <= j1 - 2 (got j2={j2}, j1={j1})")
    for idx in (j1, j2):
        if idx < bank.j_min or idx > bank.j_cut:
            raise ValueError(f"block index {idx} outside projector range")
    da = delta_j_coeffs(bank, a.coeffs, j1)
    db = delta_j_coeffs(bank, b.coeffs, j2)
    prod = np.stack([multiply_exact(a.grid, da[c], db[c])
                     for c in range(da.shape[0])])
    low = s_j_coeffs(bank, prod, j)
    return float(np.sqrt(BOX_VOLUME * np.sum(np.abs(low) ** 2)))


# ---------------------------------------------------------------------------
# frequency-localized heat kernels
# ---------------------------------------------------------------------------


@dataclass
class KernelSample:
    """Localized heat kernels sampled on the physical grid at one (q, t)."""

    q: int
    t: float
    g2: np.ndarray            # scalar kernel, shape (n, n, n)
    g1: np.ndarray            # (3, 3, n, n, n), symmetric in (i, j)
    g_grad: np.ndarray        # (3, 3, 3, n, n, n): indices (i, j, n)
    bound_report: dict


def sample_localized_kernel(q: int, t: float, grid: Grid,
                            bank: LittlewoodPaleyBank | None = None) -> KernelSample:
    """Evaluate the three localized kernels and fit their decay bounds.

    Lattice analogue: the defining integrals become sums over the integer
    frequency lattice, normalized by (2 pi)^-3.  The gradient-family kernel
    carries the i*k_n of the derivative so all sampled values are real.

    The report returns the sharpest exponential rate available on the
    lattice, c_hat = min{|k|^2 : phi(2^-q |k|) > 0} / 2^(2q), and the
    smallest prefactors C_hat for which

        |g_2|, |g_1| <= C_hat 2^(3q) e^(-c_hat t 2^(2q)) / (1 + (2^q |x|)^6),
        |g_grad|     <= C_hat 2^(4q) e^(-c_hat t 2^(2q)) / (1 + (2^q |x|)^6)

    hold at every sampled point (|x| in the torus min-image metric).
    """
    if t <= 0 or not np.isfinite(t):
        raise ValueError("kernel time must be positive and finite")
    bank = bank or default_bank(grid)
    if q < bank.j_min or q > bank.j_cut:
        raise ValueError(f"q = {q} outside projector range [0, {bank.j_cut}]")

    phi = bank.phi_weights(q)
    if not np.any(phi > 0):
        raise ValueError(f"annulus {q} has no lattice support")
    heat = np.exp(-grid.k_sq * t)
    base = phi * heat / (2.0 * np.pi) ** 3

    g2 = coeffs_to_physical(grid, base[None])[0]

    kvec = (grid.kx, grid.ky, grid.kz)
    g1 = np.empty((3, 3) + (grid.n,) * 3)
    for i in range(3):
        for j in range(i, 3):
            sym = base * ((1.0 if i == j else 0.0) - kvec[i] * kvec[j] * grid.k_sq_inv)
            vals = coeffs_to_physical(grid, sym[None])[0]
            g1[i, j] = vals
            g1[j, i] = vals

    g_grad = np.empty((3, 3, 3) + (grid.n,) * 3)
    for i in range(3):
        for j in range(3):
            sym = base * ((1.0 if i == j else 0.0) - kvec[i] * kvec[j] * grid.k_sq_inv)
            for nn in range(3):
                g_grad[i, j, nn] = coeffs_to_physical(grid, (1j * kvec[nn] * sym)[None])[0]

    # min-image distance from the origin
    x1 = grid.axis_points()
    x1 = np.minimum(x1, 2.0 * np.pi - x1)
    dist = np.sqrt(x1[:, None, None] ** 2 + x1[None, :, None] ** 2 + x1[None, None, :] ** 2)
    poly = 1.0 + (2.0**q * dist) ** 6

    ksq_support = grid.k_sq[phi > 0]
    c_hat = float(np.min(ksq_support)) / 4.0**q
    decay = math.exp(-c_hat * t * 4.0**q)

    def _prefactor(vals, power):
        scale = 2.0 ** (power * q) * decay
        return float(np.max(np.abs(vals) * poly) / scale)

    report = {
        "q": q,
        "t": t,
        "c_hat": c_hat,
        "C_hat_g2": _prefactor(g2, 3),
        "C_hat_g1": max(_prefactor(g1[i, j], 3) for i in range(3) for j in range(3)),
        "C_hat_g_grad": max(_prefactor(g_grad[i, j, nn], 4)
                            for i in range(3) for j in range(3) for nn in range(3)),
        "sup_g2": float(np.max(np.abs(g2))),
        "sup_g1": float(np.max(np.abs(g1))),
        "sup_g_grad": float(np.max(np.abs(g_grad))),
    }
    return KernelSample(q=q, t=float(t), g2=g2, g1=g1, g_grad=g_grad,
                        bound_report=report)
