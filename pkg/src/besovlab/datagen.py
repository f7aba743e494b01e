"""Deterministic field generators shared by the solver and the experiments.

All generators are seeded; the same seed reproduces the same field bit for
bit.  Rough initial data is synthesized with prescribed per-shell block
norms since no reference datum exists for the periodic box.
"""

from __future__ import annotations

import numpy as np

from .littlewood_paley import LittlewoodPaleyBank, default_bank
from .spectral_core import Grid, SpectralField, leray_project_coeffs

TWO_PI = 2.0 * np.pi


def _hermitize(c: np.ndarray) -> np.ndarray:
    flipped = np.conj(np.roll(c[..., ::-1, ::-1, ::-1], shift=1, axis=(-3, -2, -1)))
    return 0.5 * (c + flipped)


def random_field(grid: Grid, seed: int, components: int = 3,
                 kmin: float = 1.0, kmax: float | None = None,
                 amplitude=None, solenoidal: bool = True) -> SpectralField:
    """Random real field with complex-Gaussian coefficients in a shell band.

    amplitude may be a callable |k| -> weight; default flat.  With
    solenoidal=True (3 components) the field is Leray-projected.
    """
    rng = np.random.default_rng(seed)
    n = grid.n
    shape = (components, n, n, n)
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    if kmax is None:
        kmax = grid.dealias_kmax
    band = (grid.k_abs >= kmin) & (grid.k_abs <= kmax)
    c *= band
    if amplitude is not None:
        w = np.zeros_like(grid.k_abs)
        w[band] = amplitude(grid.k_abs[band])
        c *= w
    c = _hermitize(c)
    c[:, 0, 0, 0] = 0.0
    if solenoidal and components == 3:
        c = leray_project_coeffs(grid, c)
    f = SpectralField(grid, c)
    nrm = f.l2_norm()
    if nrm > 0:
        f = f * (1.0 / nrm)
    return f


def abc_flow(grid: Grid, a: float = 1.0, b: float = 1.0, c: float = 1.0) -> SpectralField:
    """ABC flow: a Beltrami field with curl u = u (unit |k| modes)."""
    x = grid.axis_points()
    X = x[:, None, None]
    Y = x[None, :, None]
    Z = x[None, None, :]
    shape = (grid.n,) * 3
    vals = np.empty((3,) + shape)
    vals[0] = a * np.sin(Z) + c * np.cos(Y)
    vals[1] = b * np.sin(X) + a * np.cos(Z)
    vals[2] = c * np.sin(Y) + b * np.cos(X)
    return SpectralField.from_physical(grid, vals)


def besov_shell_data(grid: Grid, s: float, q: float, amplitude: float = 1.0,
                     seed: int = 0, bank: LittlewoodPaleyBank | None = None,
                     normalize_blocks: bool = True) -> SpectralField:
    """Random divergence-free datum with ||Delta_j u||_Lq ~ amplitude 2^(-j s).

    Per-shell coefficient amplitudes follow a * 2^(-j (s + 3/2 - 3/q)) with
    random phases; with normalize_blocks the measured block q-norms are
    rescaled onto the target power law in one pass.
    """
    bank = bank or default_bank(grid)
    rng = np.random.default_rng(seed)
    n = grid.n
    c = np.zeros((3, n, n, n), dtype=np.complex128)
    for j in range(bank.j_min, bank.j_max + 1):
        shell = (rng.standard_normal((3, n, n, n))
                 + 1j * rng.standard_normal((3, n, n, n)))
        w = bank.phi_weights(j)
        shell *= w * amplitude * 2.0 ** (-j * (s + 1.5 - 3.0 / q))
        c += shell
    c = _hermitize(c)
    c[:, 0, 0, 0] = 0.0
    c = leray_project_coeffs(grid, c)
    field = SpectralField(grid, c)
    if normalize_blocks:
        from .norms import lp_norm  # local import to avoid a cycle
        c = field.coeffs.copy()
        for j in range(bank.j_min, bank.j_max + 1):
            block = SpectralField(grid, field.coeffs * bank.phi_weights(j))
            measured = lp_norm(block, q)
            target = amplitude * 2.0 ** (-j * s)
            if measured > 0:
                # reweight only this block's annulus content
                lo = 0.75 * 2.0**j
                hi = (8.0 / 3.0) * 2.0**j
                own = (grid.k_abs >= lo) & (grid.k_abs <= hi)
                scale = np.where(own, target / measured, 1.0)
                c *= scale
        c = leray_project_coeffs(grid, c)
        c[:, 0, 0, 0] = 0.0
        field = SpectralField(grid, c)
    return field


def pareto_blob_data(grid: Grid, tail_index: float, seed: int = 0,
                     bank: LittlewoodPaleyBank | None = None,
                     s: float = -0.4, amplitude: float = 1.0,
                     blocks: tuple | None = None, base_count: int = 640,
                     octaves: int = 5, width_factor: float = 0.55) -> SpectralField:
    """Divergence-free field of sparse solenoidal blobs with power-law heights.

    Each used block j hosts blobs of physical width ~ width_factor / 2^j;
    blob counts per height octave k follow 2^(-q k) (stratified, with the
    fractional remainder carried by a coin flip), so the block's amplitude
    level sets obey mu(lambda) ~ lambda^(-q) over several octaves.  That
    level-set law is exactly what makes the threshold sweep of the Calderon
    split trace its two power laws with measurable slopes.  Only blocks fine
    enough to keep the blobs spatially sparse are populated (default: j >= 2
    up to the bank's Besov range).  Blocks are rescaled onto
    ||Delta_j u||_{L^q} ~ amplitude * 2^(-j s).
    """
    bank = bank or default_bank(grid)
    rng = np.random.default_rng(seed)
    n = grid.n
    q = tail_index
    from .norms import lp_norm

    if blocks is None:
        blocks = tuple(range(min(2, bank.j_max), bank.j_max + 1))
    keep = np.abs(grid.k1) < n // 2
    nyq_free = keep[:, None, None] & keep[None, :, None] & keep[None, None, :]

    total = np.zeros((3, n, n, n), dtype=np.complex128)
    j0 = blocks[0]
    for j in blocks:
        # count grows ~2^(1.3 j) so the threshold law and the block peaks
        # drift together; kernels shrink with j, keeping spikes sparse
        m_j = base_count * 2.0 ** (1.3 * (j - j0))
        deltas = np.zeros((3, n, n, n))
        for k in range(octaves):
            count_real = m_j * 2.0 ** (-q * k)
            count = int(count_real) + (1 if rng.random() < count_real % 1.0 else 0)
            if count == 0:
                continue
            # exact conditional Pareto density within the octave [2^k, 2^(k+1))
            u = rng.random(count)
            heights = 2.0**k * (1.0 - u * (1.0 - 2.0**(-q))) ** (-1.0 / q)
            signs = rng.choice([-1.0, 1.0], size=count)
            cells = rng.integers(0, n, size=(count, 3))
            orient = rng.integers(0, 3, size=count)
            np.add.at(deltas, (orient, cells[:, 0], cells[:, 1], cells[:, 2]),
                      signs * heights)
        dc = np.fft.fftn(deltas, axes=(1, 2, 3)) / n**3
        # spikes band-passed by phi_j itself; blob field = curl of the
        # filtered potential, Nyquist planes dropped so the curl is exactly
        # divergence-free
        A = dc * (bank.phi_weights(j) * nyq_free)
        blob = np.empty_like(A)
        blob[0] = 1j * (grid.ky * A[2] - grid.kz * A[1])
        blob[1] = 1j * (grid.kz * A[0] - grid.kx * A[2])
        blob[2] = 1j * (grid.kx * A[1] - grid.ky * A[0])
        blob[:, 0, 0, 0] = 0.0
        block = SpectralField(grid, blob * bank.phi_weights(j))
        measured = lp_norm(block, q)
        if measured > 0:
            blob *= amplitude * 2.0 ** (-j * s) / measured
        total += blob
    total = _hermitize(total)
    total[:, 0, 0, 0] = 0.0
    return SpectralField(grid, total)


def aligned_perturbation(grid: Grid, datum: SpectralField,
                         bank: LittlewoodPaleyBank | None = None) -> SpectralField:
    """Unit-norm perturbation aligned with the datum's top dyadic shell."""
    bank = bank or default_bank(grid)
    top = SpectralField(grid, datum.coeffs * bank.phi_weights(bank.j_max))
    nrm = top.l2_norm()
    if nrm == 0:
        raise ValueError("datum has no content in its top shell")
    return top * (1.0 / nrm)
