"""Scalar functionals: Lp, Sobolev, Besov, Chemin-Lerner, Carleson, path norm.

Physical-space norms are Riemann sums with weight (2 pi / n)^3, spectrally
accurate for band-limited fields; p = infinity reads the grid max.  The
Carleson-type functionals discretize a continuum sup over ball centres,
radii and time; the mesh is declared in ``CarlesonSpec`` and echoed into
reports, with a refinement knob for oracle cross-checks.

Unknown constants in the classical inequalities are never asserted: the
probe functions return LHS/RHS ratios whose boundedness and scale invariance
are the testable content.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np
import scipy.fft as _fft

from .littlewood_paley import LittlewoodPaleyBank, default_bank
from .spectral_core import (
    BOX_VOLUME,
    Grid,
    SpectralField,
    apply_heat,
    get_fft_workers,
    multiply_exact,
)

TWO_PI = 2.0 * np.pi


def _pointwise_magnitude(values: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(values**2, axis=0))


def lp_norm(f: SpectralField, p: float) -> float:
    """Lp norm of |f| (Euclidean magnitude for vector fields)."""
    if p < 1:
        raise ValueError("p must lie in [1, inf]")
    mag = _pointwise_magnitude(f.to_physical())
    if not np.all(np.isfinite(mag)):
        raise ValueError("field has non-finite physical values")
    if np.isinf(p):
        return float(np.max(mag))
    return float((np.sum(mag**p) * f.grid.cell_volume) ** (1.0 / p))


def linf_norm(f: SpectralField) -> float:
    return lp_norm(f, np.inf)


def sobolev_norm(f: SpectralField, alpha: float, homogeneous: bool = True) -> float:
    """Hdot^alpha seminorm (sum |k|^(2 alpha) |f_hat|^2)^(1/2); H^alpha adds L2."""
    if homogeneous and not (-1.5 < alpha < 1.5):
        raise ValueError("homogeneous Sobolev exponent must lie in (-3/2, 3/2)")
    if not np.all(np.isfinite(f.coeffs.view(np.float64))):
        raise ValueError("field has non-finite coefficients")
    ksq = f.grid.k_sq.copy()
    ksq[0, 0, 0] = 1.0  # zero mode carries no content (mean-free)
    weighted = BOX_VOLUME * np.sum(ksq**alpha * np.abs(f.coeffs) ** 2)
    if homogeneous:
        return float(np.sqrt(weighted))
    return float(np.sqrt(weighted + f.l2_norm() ** 2))


@dataclass(frozen=True)
class BesovParams:
    """Regularity / integrability / summability triple (s, p, q)."""

    s: float
    p: float
    q: float

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise ValueError("p and q must lie in [1, inf]")
        if not np.isfinite(self.s):
            raise ValueError("s must be finite")


@dataclass
class NormReport:
    """A norm value together with its per-block table and the range used."""

    value: float
    j_range_used: tuple[int, int]
    per_block: list = dataclass_field(default_factory=list)
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "j_range_used": list(self.j_range_used),
            "per_block": [[int(j), float(v)] for j, v in self.per_block],
            "label": self.label,
        }


def _lq_aggregate(values: np.ndarray, q: float) -> float:
    if np.isinf(q):
        return float(np.max(values)) if values.size else 0.0
    return float(np.sum(values**q) ** (1.0 / q))


def besov_norm(f: SpectralField, params: BesovParams,
               bank: LittlewoodPaleyBank | None = None) -> NormReport:
    """Bdot^s_{p,q} over the bank's dyadic range (torus truncation: j >= 0)."""
    bank = bank or default_bank(f.grid)
    blocks = []
    for j in range(bank.j_min, bank.j_max + 1):
        block = SpectralField(f.grid, f.coeffs * bank.phi_weights(j))
        blocks.append((j, 2.0 ** (j * params.s) * lp_norm(block, params.p)))
    vals = np.array([v for _, v in blocks])
    return NormReport(value=_lq_aggregate(vals, params.q),
                      j_range_used=bank.j_range, per_block=blocks,
                      label=f"besov(s={params.s},p={params.p},q={params.q})")


def _time_lr_norm(times: np.ndarray, values: np.ndarray, r: float) -> float:
    if np.isinf(r):
        return float(np.max(values))
    return float(np.trapz(values**r, times) ** (1.0 / r))


def chemin_lerner_norm(traj, r: float, params: BesovParams,
                       bank: LittlewoodPaleyBank | None = None) -> NormReport:
    """Time-norm inside the block sum: || 2^{js} ||Delta_j u||_{L^r_T L^p} ||_{l^q}."""
    times = np.asarray(traj.times, dtype=np.float64)
    fields = list(traj.fields)
    if len(fields) == 0:
        raise ValueError("empty trajectory")
    if len(fields) == 1 and not np.isinf(r):
        raise ValueError("time integral needs more than one snapshot")
    if r < 1:
        raise ValueError("r must lie in [1, inf]")
    bank = bank or default_bank(fields[0].grid)
    grid = fields[0].grid
    blocks = []
    for j in range(bank.j_min, bank.j_max + 1):
        w = bank.phi_weights(j)
        series = np.array([lp_norm(SpectralField(grid, f.coeffs * w), params.p)
                           for f in fields])
        blocks.append((j, 2.0 ** (j * params.s) * _time_lr_norm(times, series, r)))
    vals = np.array([v for _, v in blocks])
    return NormReport(value=_lq_aggregate(vals, params.q),
                      j_range_used=bank.j_range, per_block=blocks,
                      label=f"chemin_lerner(r={r},s={params.s},p={params.p},q={params.q})")


# ---------------------------------------------------------------------------
# Carleson-type functionals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CarlesonSpec:
    """Declared discretization of the Carleson sup (centres, radii, time)."""

    center_stride_divisor: int = 8
    points_per_decade: int = 24
    decades: int = 3
    radius_min_cells: float = 3.0
    refine: int = 1

    def describe(self) -> dict:
        return {
            "center_stride_divisor": self.center_stride_divisor,
            "points_per_decade": self.points_per_decade,
            "decades": self.decades,
            "radius_min_cells": self.radius_min_cells,
            "refine": self.refine,
        }


def _dyadic_radii(grid: Grid, spec: CarlesonSpec, r_sq_cap: float | None = None):
    """Radii 2 pi 2^-m capped at the half box width pi; floor at a few cells."""
    radii = []
    m = 1
    r_floor = spec.radius_min_cells * grid.dx / spec.refine
    while True:
        R = TWO_PI * 2.0 ** (-m)
        if R < r_floor:
            break
        if r_sq_cap is None or R * R <= r_sq_cap * (1 + 1e-12):
            radii.append(R)
        m += 1
    if not radii and r_sq_cap is not None:
        radii = [float(np.sqrt(r_sq_cap))]
    return radii


def _ball_kernel_fft(grid: Grid, R: float) -> np.ndarray:
    x1 = grid.axis_points()
    d1 = np.minimum(x1, TWO_PI - x1)
    dist_sq = (d1[:, None, None] ** 2 + d1[None, :, None] ** 2
               + d1[None, None, :] ** 2)
    ball = (dist_sq <= R * R).astype(np.float64)
    return _fft.fftn(ball, workers=get_fft_workers())


def _ball_average_field(grid: Grid, G: np.ndarray, R: float) -> np.ndarray:
    """(1/|B_R|) * integral of G over the ball of radius R around each point."""
    conv = _fft.ifftn(_fft.fftn(G, workers=get_fft_workers()) * _ball_kernel_fft(grid, R),
                      workers=get_fft_workers()).real * grid.cell_volume
    vol = 4.0 / 3.0 * np.pi * R**3
    return conv / vol


def _strided_max(grid: Grid, values: np.ndarray, spec: CarlesonSpec) -> float:
    stride = max(1, grid.n // (spec.center_stride_divisor * spec.refine))
    return float(np.max(values[::stride, ::stride, ::stride]))


def bmo_minus1_norm(u0: SpectralField, spec: CarlesonSpec = CarlesonSpec()) -> float:
    """Discrete Carleson norm of the heat extension (max Carleson average).

    sup over strided centres and dyadic radii (capped at the half box width)
    of (1/|B(0,R)|) int_0^{R^2} int_{B(x,R)} |e^{t Lap} u0|^2.
    """
    grid = u0.grid
    best = 0.0
    for R in _dyadic_radii(grid, spec):
        tau = R * R
        n_pts = spec.points_per_decade * spec.decades * spec.refine + 1
        ts = np.concatenate([[0.0],
                             np.geomspace(tau * 10.0 ** (-spec.decades), tau, n_pts)])
        G = np.zeros((grid.n,) * 3)
        prev_vals = np.sum(u0.to_physical() ** 2, axis=0)
        prev_t = 0.0
        for t in ts[1:]:
            vals = np.sum(apply_heat(u0, t).to_physical() ** 2, axis=0)
            G += 0.5 * (t - prev_t) * (prev_vals + vals)
            prev_t, prev_vals = t, vals
        best = max(best, _strided_max(grid, _ball_average_field(grid, G, R), spec))
    return best


def path_norm_parts(traj, spec: CarlesonSpec = CarlesonSpec()) -> dict:
    """sup-term and Carleson term of the path norm, from trajectory snapshots."""
    times = np.asarray(traj.times, dtype=np.float64)
    fields = list(traj.fields)
    if len(fields) == 0:
        raise ValueError("empty trajectory")
    grid = fields[0].grid
    T = float(times[-1])

    sup_term = 0.0
    sq_fields = []
    for t, f in zip(times, fields):
        vals = f.to_physical()
        sq = np.sum(vals**2, axis=0)
        sq_fields.append(sq)
        if t > 0:
            sup_term = max(sup_term, np.sqrt(t) * float(np.sqrt(np.max(sq))))

    carleson = 0.0
    for R in _dyadic_radii(grid, spec, r_sq_cap=T):
        tau = R * R
        keep = times <= tau * (1 + 1e-12)
        if np.count_nonzero(keep) < 2:
            continue
        G = np.zeros((grid.n,) * 3)
        idx = np.nonzero(keep)[0]
        for a, b in zip(idx[:-1], idx[1:]):
            G += 0.5 * (times[b] - times[a]) * (sq_fields[a] + sq_fields[b])
        avg = _ball_average_field(grid, G, R)
        carleson = max(carleson, np.sqrt(max(0.0, _strided_max(grid, avg, spec))))
    return {"sup_term": sup_term, "carleson_term": carleson,
            "value": sup_term + carleson, "T": T, "mesh": spec.describe()}


def path_norm_E_T(traj, spec: CarlesonSpec = CarlesonSpec()) -> float:
    """Koch-Tataru path norm: sup_t sqrt(t)||u||_inf plus the Carleson term."""
    return path_norm_parts(traj, spec)["value"]


# ---------------------------------------------------------------------------
# inequality-ratio probes
# ---------------------------------------------------------------------------


def _dyadic_times(t_max: float = 4.0, octaves: int = 24) -> np.ndarray:
    return t_max * 2.0 ** (-np.arange(octaves + 1, dtype=np.float64))


def probe_interpolation(f: SpectralField, s1: float, s2: float, theta: float,
                        p: float, bank: LittlewoodPaleyBank | None = None) -> float:
    """LHS/RHS for the convexity estimate between Bdot^{s1}_{p,inf} and Bdot^{s2}_{p,inf}."""
    if not s1 < s2:
        raise ValueError("need s1 < s2")
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    bank = bank or default_bank(f.grid)
    s_mid = theta * s1 + (1.0 - theta) * s2
    lhs = besov_norm(f, BesovParams(s_mid, p, 1), bank).value
    n1 = besov_norm(f, BesovParams(s1, p, np.inf), bank).value
    n2 = besov_norm(f, BesovParams(s2, p, np.inf), bank).value
    rhs = n1**theta * n2 ** (1.0 - theta)
    return lhs / rhs if rhs > 0 else 0.0


def probe_product(f: SpectralField, g: SpectralField, s: float, p: float, q: float,
                  bank: LittlewoodPaleyBank | None = None) -> float:
    """LHS/RHS for ||fg||_{B^s_{p,q}} <= C(||g||_inf ||f||_B + ||f||_inf ||g||_B)."""
    if not (0.0 < s < 3.0 / p):
        raise ValueError("the product estimate needs 0 < s < 3/p")
    bank = bank or default_bank(f.grid)
    grid = f.grid
    prod = np.stack([multiply_exact(grid, f.coeffs[c], g.coeffs[c])
                     for c in range(f.components)])
    prod[:, 0, 0, 0] = 0.0  # dyadic blocks never see the mean
    fg = SpectralField(grid, prod)
    params = BesovParams(s, p, q)
    lhs = besov_norm(fg, params, bank).value
    rhs = (linf_norm(g) * besov_norm(f, params, bank).value
           + linf_norm(f) * besov_norm(g, params, bank).value)
    return lhs / rhs if rhs > 0 else 0.0


def _heat_series(u: SpectralField, T: float, n_pts: int = 33):
    ts = np.concatenate([[0.0], np.geomspace(T / 256.0, T, n_pts - 1)])
    fields = [apply_heat(u, t) for t in ts]

    class _Series:
        times = ts

    s = _Series()
    s.fields = fields
    return s


def probe_chemin_lerner_heat(u: SpectralField, r: float, s: float, p: float,
                             q: float, T: float,
                             bank: LittlewoodPaleyBank | None = None) -> float:
    """||e^{t Lap} u||_{Ltilde^r_T B^{s+2/r}_{p,q}} / ||u||_{B^s_{p,q}}."""
    if r < 1:
        raise ValueError("r must lie in [1, inf]")
    bank = bank or default_bank(u.grid)
    traj = _heat_series(u, T)
    lhs = chemin_lerner_norm(traj, r, BesovParams(s + 2.0 / r, p, q), bank).value
    rhs = besov_norm(u, BesovParams(s, p, q), bank).value
    return lhs / rhs if rhs > 0 else 0.0


def probe_sobolev_semigroup(u: SpectralField, alpha: float,
                            ts: np.ndarray | None = None) -> float:
    """sup_t t^{alpha/2} ||e^{t Lap} u||_{Hdot^alpha} / ||u||_2."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if ts is None:
        ts = _dyadic_times()
    denom = u.l2_norm()
    if denom == 0:
        return 0.0
    best = max(t ** (alpha / 2.0) * sobolev_norm(apply_heat(u, t), alpha)
               for t in ts)
    return best / denom


def probe_heat_characterization(f: SpectralField, s: float, p: float,
                                bank: LittlewoodPaleyBank | None = None,
                                ts: np.ndarray | None = None) -> dict:
    """Both directions of the heat characterization of Bdot^s_{p,inf}, s < 0."""
    if s >= 0:
        raise ValueError("the heat characterization needs s < 0")
    bank = bank or default_bank(f.grid)
    if ts is None:
        ts = _dyadic_times()
    heat_sup = max(t ** (-s / 2.0) * lp_norm(apply_heat(f, t), p) for t in ts)
    bnorm = besov_norm(f, BesovParams(s, p, np.inf), bank).value
    return {
        "heat_sup": heat_sup,
        "besov": bnorm,
        "ratio_heat_over_besov": heat_sup / bnorm if bnorm > 0 else 0.0,
        "ratio_besov_over_heat": bnorm / heat_sup if heat_sup > 0 else 0.0,
    }


def inequality_probe_suite(grid: Grid, seed: int = 0, n_fields: int = 50,
                           bank: LittlewoodPaleyBank | None = None) -> dict:
    """Run every probe over random fields; collect ratios and invariance gaps.

    Each probe's LHS and RHS are homogeneous of the same degree, so the
    ratio must be exactly amplitude-invariant; the suite records the largest
    relative deviation under a 17x amplitude rescale, plus ratio statistics.
    """
    from .datagen import random_field

    bank = bank or default_bank(grid)
    probes = {
        "interpolation": lambda h: probe_interpolation(h, s1=-1.0, s2=0.5,
                                                       theta=0.4, p=4.0, bank=bank),
        "product": lambda h: probe_product(
            h, random_field(grid, seed=hash(("g", id(bank))) % 2**31,
                            components=h.components), s=0.5, p=4.0, q=2.0, bank=bank),
        "chemin_lerner_heat": lambda h: probe_chemin_lerner_heat(
            h, r=2.0, s=-0.5, p=4.0, q=np.inf, T=1.0, bank=bank),
        "sobolev_semigroup": lambda h: probe_sobolev_semigroup(h, alpha=0.75),
        "heat_char_upper": lambda h: probe_heat_characterization(
            h, s=-0.5, p=4.0, bank=bank)["ratio_heat_over_besov"],
        "heat_char_lower": lambda h: probe_heat_characterization(
            h, s=-0.5, p=4.0, bank=bank)["ratio_besov_over_heat"],
    }
    out = {}
    for name, fn in probes.items():
        ratios = []
        inv_gap = 0.0
        for i in range(n_fields):
            h = random_field(grid, seed=seed + 1000 * i + 7, components=3)
            r1 = fn(h)
            ratios.append(r1)
            if i % 10 == 0:
                r2 = fn(h * 17.0)
                inv_gap = max(inv_gap, abs(r2 - r1) / max(abs(r1), 1e-300))
        ratios = np.array(ratios)
        med = float(np.median(ratios))
        out[name] = {
            "ratios": ratios.tolist(),
            "median": med,
            "max": float(np.max(ratios)),
            "max_over_median": float(np.max(ratios) / med) if med > 0 else np.inf,
            "amplitude_invariance_gap": inv_gap,
        }
    return out
