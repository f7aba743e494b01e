"""Frequency-space analysis toolkit for periodic-box Navier-Stokes experiments."""

from .spectral_core import (
    Grid,
    SpectralField,
    apply_heat,
    duhamel_bilinear,
    leray_project,
    nonlinear_term,
    pressure_from_velocity,
    set_fft_workers,
)
from .littlewood_paley import (
    LittlewoodPaleyBank,
    build_bank,
    default_bank,
    delta_j,
    s_j,
)
from .norms import (
    BesovParams,
    CarlesonSpec,
    NormReport,
    besov_norm,
    bmo_minus1_norm,
    chemin_lerner_norm,
    lp_norm,
    path_norm_E_T,
    sobolev_norm,
)

__version__ = "0.1.0"
