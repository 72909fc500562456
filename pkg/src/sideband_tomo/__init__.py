"""Spectral homodyne tomography of two-mode squeezed thermal sideband states."""

from .gaussian import (
    GaussianTwoModeState,
    ModalBasis,
    TmstParams,
    change_basis,
    check_physicality,
    mode_mixing_matrix,
    noise_reduction_db,
    ppt_min_symplectic_eigenvalue,
    purity,
    sideband_energies,
    symplectic_eigenvalues,
    tmst_state,
    total_fluctuation_photons,
)
from .reconstruction import TraceSet, bootstrap_errors, reconstruct
from .sideband import CavityModel, PdhReadout, QuadratureSpec, cavity_transmission
from .traces import HomodyneTrace, RawConfig, TraceConfig, synthesize_dual, synthesize_trace

__version__ = "0.1.0"

__all__ = [
    "CavityModel",
    "GaussianTwoModeState",
    "HomodyneTrace",
    "ModalBasis",
    "PdhReadout",
    "QuadratureSpec",
    "RawConfig",
    "TmstParams",
    "TraceConfig",
    "TraceSet",
    "bootstrap_errors",
    "cavity_transmission",
    "change_basis",
    "check_physicality",
    "mode_mixing_matrix",
    "noise_reduction_db",
    "ppt_min_symplectic_eigenvalue",
    "purity",
    "reconstruct",
    "sideband_energies",
    "symplectic_eigenvalues",
    "synthesize_dual",
    "synthesize_trace",
    "tmst_state",
    "total_fluctuation_photons",
]
