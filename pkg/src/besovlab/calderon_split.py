"""Initial-data splitting by per-block amplitude thresholding.

Given a rough divergence-free datum in Bdot^s_{q,q} (s in (-1+2/q, 0), q > 3)
the exponent chain selects p, delta_hat, theta, alpha_hat, delta; each dyadic
block is then cut in physical space at the level

    N(j, eps) = eps * 2^(j (s q - s1 p)/(p - q)),      s1 = -1 + 3/p + delta,

the unique power law that makes both weighted block estimates telescope.
Small values resum into the subcritical Besov piece (the drift datum u0^2 of
the stability experiment), large values into the Sobolev piece (the energy
datum u0^1).  The chi block (lowest frequencies) rides with the Besov piece
so a threshold above every sample reproduces the trivial split u1 = u0.
Both pieces are Leray-projected; the cut is additive, so reconstruction is
exact before and after projection.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .littlewood_paley import LittlewoodPaleyBank, default_bank, s_j_coeffs
from .norms import BesovParams, besov_norm, sobolev_norm
from .spectral_core import (
    Grid,
    SpectralField,
    coeffs_to_physical,
    leray_project_coeffs,
    physical_to_coeffs,
)


@dataclass(frozen=True)
class SplitParams:
    """The exponent bundle of the splitting, plus the threshold knob eps."""

    s: float
    q: float
    p: float
    delta_hat: float
    theta: float
    alpha_hat: float
    delta: float
    epsilon: float = 1.0

    def __post_init__(self):
        if not self.q > 3:
            raise ValueError("q must exceed 3")
        if not (-1.0 + 2.0 / self.q < self.s < 0.0):
            raise ValueError("s must lie in (-1 + 2/q, 0)")
        if not self.p > max(self.q, 4.0):
            raise ValueError("p must exceed max(q, 4)")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if not self.delta_hat > 0:
            raise ValueError("delta_hat must be positive")
        if not 0.0 < self.alpha_hat < min(1.5, self.delta_hat * (1 - self.theta) / self.theta):
            raise ValueError("alpha_hat outside (0, min(3/2, delta_hat (1-theta)/theta))")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.delta < 1.0 - 3.0 / self.p:
            raise ValueError("delta must stay below 1 - 3/p")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        # the defining index relation, to floating precision
        lhs = (1.0 - 2.0 / self.p) / (1.0 - 2.0 / self.q) * self.s
        rhs = -1.0 + 3.0 / self.p + self.delta_hat
        if abs(lhs - rhs) > 1e-12:
            raise ValueError("index relation violated by more than 1e-12")

    @property
    def eps_tilde(self) -> float:
        return self.s + 1.0 - 2.0 / self.q

    @property
    def s1(self) -> float:
        return -1.0 + 3.0 / self.p + self.delta

    @property
    def threshold_exponent(self) -> float:
        return (self.s * self.q - self.s1 * self.p) / (self.p - self.q)

    def threshold(self, j: int) -> float:
        return self.epsilon * 2.0 ** (j * self.threshold_exponent)

    def with_epsilon(self, epsilon: float) -> "SplitParams":
        return replace(self, epsilon=float(epsilon))

    def describe(self) -> dict:
        return {
            "s": self.s, "q": self.q, "p": self.p,
            "eps_tilde": self.eps_tilde,
            "delta_hat": self.delta_hat, "theta": self.theta,
            "alpha_hat": self.alpha_hat, "delta": self.delta,
            "s1": self.s1, "epsilon": self.epsilon,
            "threshold_exponent": self.threshold_exponent,
        }


def _delta_hat_of(s: float, q: float, p: float) -> float:
    return (1.0 - 2.0 / p) / (1.0 - 2.0 / q) * s + 1.0 - 3.0 / p


def select_parameters(s: float, q: float, alpha_fraction: float = 0.5,
                      p: float | None = None, double_margin: bool = True,
                      epsilon: float = 1.0) -> SplitParams:
    """Resolve the full exponent chain from (s, q).

    Default p: the smallest even integer above max(q, 4) with delta_hat > 0,
    doubled once for margin; pass p explicitly to pin a specific chain (the
    acceptance values use (s, q, p) = (-0.4, 4, 8)).
    """
    if not q > 3:
        raise ValueError("q must exceed 3")
    if not (-1.0 + 2.0 / q < s < 0.0):
        raise ValueError(f"s must lie in (-1 + 2/q, 0) = ({-1 + 2 / q:.6g}, 0)")
    if not 0.0 < alpha_fraction < 1.0:
        raise ValueError("alpha_fraction must lie in (0, 1)")
    if p is None:
        cand = 2 * int(np.floor(max(q, 4.0) / 2)) + 2
        while _delta_hat_of(s, q, cand) <= 0:
            cand += 2
        if double_margin:
            cand *= 2
        p = float(cand)
    p = float(p)
    delta_hat = _delta_hat_of(s, q, p)
    if delta_hat <= 0:
        raise ValueError(f"delta_hat = {delta_hat:.6g} <= 0 at p = {p}")
    theta = 1.0 - (1.0 - 2.0 / q) / (1.0 - 2.0 / p)
    alpha_hat = alpha_fraction * min(1.5, delta_hat * (1.0 - theta) / theta)
    delta = delta_hat - theta * alpha_hat / (1.0 - theta)
    return SplitParams(s=s, q=q, p=p, delta_hat=delta_hat, theta=theta,
                       alpha_hat=alpha_hat, delta=delta, epsilon=epsilon)


@dataclass
class SplitResult:
    """The two pieces (projected), their raw pre-projection versions, and
    the measured norms against the telescoped bounds."""

    u1: SpectralField          # Besov piece, the drift datum u0^2
    u2: SpectralField          # Sobolev piece, the energy datum u0^1
    u1_raw: SpectralField
    u2_raw: SpectralField
    u0: SpectralField
    params: SplitParams
    verified_bounds: dict


def threshold_split(u0: SpectralField, params: SplitParams,
                    bank: LittlewoodPaleyBank | None = None) -> SplitResult:
    """Cut each dyadic block of u0 at N(j, eps), componentwise in physical
    space; resum small values into u1, large into u2; Leray-project both."""
    bank = bank or default_bank(u0.grid)
    grid = u0.grid
    if u0.components != 3:
        raise ValueError("the splitting expects a 3-component datum")
    if u0.divergence_max() > 1e-8 * (np.max(np.abs(u0.coeffs)) + 1e-300):
        raise ValueError("datum must be divergence-free")

    small_sum = u0.coeffs * bank.chi_weights(0)  # chi block rides with u1
    large_sum = np.zeros_like(u0.coeffs)
    for j in range(bank.j_min, bank.j_cut + 1):
        block = u0.coeffs * bank.phi_weights(j)
        phys = coeffs_to_physical(grid, block)
        level = params.threshold(j)
        small_mask = np.abs(phys) < level
        small = physical_to_coeffs(grid, phys * small_mask)
        small_sum += small
        large_sum += block - small
    # the per-block cut means cancel in the resummation (u0 is mean-free)
    small_sum[:, 0, 0, 0] = 0.0
    large_sum[:, 0, 0, 0] = 0.0

    u1_raw = SpectralField(grid, small_sum)
    u2_raw = SpectralField(grid, large_sum)
    u1 = SpectralField(grid, leray_project_coeffs(grid, small_sum))
    u2 = SpectralField(grid, leray_project_coeffs(grid, large_sum))

    s1 = params.s1
    u0_besov = besov_norm(u0, BesovParams(params.s, params.q, params.q), bank).value
    u1_besov = besov_norm(u1, BesovParams(s1, params.p, params.p), bank).value
    u2_sobolev = sobolev_norm(u2, params.alpha_hat)
    bounds = {
        "u0_l2": u0.l2_norm(),
        "u0_besov_sqq": u0_besov,
        "u1_l2": u1.l2_norm(),
        "u2_l2": u2.l2_norm(),
        "u1_besov_s1pp": u1_besov,
        "u2_sobolev_alpha_hat": u2_sobolev,
        "u1_bound_value": u1_besov**params.p,
        "u1_bound_rhs_unit": params.epsilon ** (params.p - params.q) * u0_besov**params.q,
        "u2_bound_value": u2_sobolev**2,
        "u2_bound_rhs_unit": params.epsilon ** (2.0 - params.q) * u0_besov**params.q,
        "epsilon": params.epsilon,
    }
    return SplitResult(u1=u1, u2=u2, u1_raw=u1_raw, u2_raw=u2_raw, u0=u0,
                       params=params, verified_bounds=bounds)


def verify_split(result: SplitResult, params: SplitParams | None = None,
                 bank: LittlewoodPaleyBank | None = None) -> dict:
    """Per-result checks: exact reconstruction (hard error on failure),
    divergence-freeness, and the L2 bounds with their fitted constants."""
    params = params or result.params
    u0 = result.u0
    scale = u0.l2_norm()
    recon_raw = (result.u1_raw + result.u2_raw - u0).l2_norm()
    recon_proj = (result.u1 + result.u2 - u0).l2_norm()
    if recon_raw > 1e-12 * max(scale, 1e-300):
        raise RuntimeError(
            f"split reconstruction failed: residual {recon_raw:.3e} (data corruption)")
    cmax = np.max(np.abs(u0.coeffs)) + 1e-300
    report = {
        "reconstruction_residual_raw": recon_raw,
        "reconstruction_residual_projected": recon_proj,
        "u1_divergence_max": result.u1.divergence_max() / cmax,
        "u2_divergence_max": result.u2.divergence_max() / cmax,
        "l2_fit_C_u1": result.verified_bounds["u1_l2"] / max(scale, 1e-300),
        "l2_fit_C_u2": result.verified_bounds["u2_l2"] / max(scale, 1e-300),
        "bounds": dict(result.verified_bounds),
    }
    return report


def epsilon_sweep(u0: SpectralField, params: SplitParams, epsilons,
                  bank: LittlewoodPaleyBank | None = None) -> dict:
    """Sweep the threshold knob and fit the two power laws.

    Fits log2 of ||u1||^p_{B^{s1}_{p,p}} and ||u2||^2_{Hdot^alpha_hat}
    against log2 eps; the telescoped bounds predict slopes p - q and 2 - q.
    Also records the monotone decrease of ||u2||_2 in eps.
    """
    bank = bank or default_bank(u0.grid)
    epsilons = sorted(float(e) for e in epsilons)
    if len(epsilons) < 3:
        raise ValueError("need at least 3 epsilons for a slope fit")
    rows = []
    for eps in epsilons:
        res = threshold_split(u0, params.with_epsilon(eps), bank)
        b = res.verified_bounds
        rows.append({
            "epsilon": eps,
            "u1_bound_value": b["u1_bound_value"],
            "u2_bound_value": b["u2_bound_value"],
            "u1_l2": b["u1_l2"],
            "u2_l2": b["u2_l2"],
            "ratio_u1": b["u1_bound_value"] / max(b["u1_bound_rhs_unit"], 1e-300),
            "ratio_u2": b["u2_bound_value"] / max(b["u2_bound_rhs_unit"], 1e-300),
        })
    x = np.log2(epsilons)
    y1 = np.log2([r["u1_bound_value"] for r in rows])
    y2 = np.log2([r["u2_bound_value"] for r in rows])
    slope_u1 = float(np.polyfit(x, y1, 1)[0])
    slope_u2 = float(np.polyfit(x, y2, 1)[0])
    u2_l2 = [r["u2_l2"] for r in rows]
    return {
        "rows": rows,
        "slope_u1": slope_u1,
        "slope_u2": slope_u2,
        "target_slope_u1": params.p - params.q,
        "target_slope_u2": 2.0 - params.q,
        "u2_l2_monotone_nonincreasing": bool(
            all(a >= b - 1e-12 for a, b in zip(u2_l2[:-1], u2_l2[1:]))),
        "params": params.describe(),
    }
