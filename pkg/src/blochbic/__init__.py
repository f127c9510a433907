"""Reaction-matrix scattering for a Gaussian lattice strip.

A 2D potential that is periodic along x and localized along z scatters
waves into Bloch channels labelled by conserved lattice momentum.  This
package builds the per-channel reaction-region eigenbasis, assembles
reaction/K/S matrices with evanescent modes, locates bound states in the
continuum through the below-threshold determinant condition, and tracks
quasibound-state poles on the second energy sheet.
"""

__version__ = "0.1.0"

from .bloch import (
    BlochChannel,
    ChannelMode,
    ModeSet,
    RegionConfig,
    asymptotic_band_energy,
    enumerate_modes,
    mode_wavenumber,
)
from .continuum import (
    ContinuumResult,
    LifetimeFit,
    Pole,
    bic_line,
    bound_state_wavefunction,
    det_hbd,
    find_poles,
    lifetime_scaling,
    scan_bics,
)
from .potential import LatticeConfig, channel_matrix_element, potential_value, theta3
from .reaction import (
    ChannelEigenBasis,
    StateTag,
    build_channel_hamiltonian,
    classify_states,
    solve_channel,
    wavefunction_grid,
    x_parity,
)
from .scattering import (
    ScatteringBlocks,
    reaction_matrix,
    reflection_coefficients,
    s_matrix,
    unitarity_defect,
)
from .validation import (
    SquareWellConfig,
    fd_eigen_oracle,
    square_well_exact,
    square_well_series,
)

__all__ = [
    "__version__",
    "BlochChannel",
    "ChannelEigenBasis",
    "ChannelMode",
    "ContinuumResult",
    "LatticeConfig",
    "LifetimeFit",
    "ModeSet",
    "Pole",
    "RegionConfig",
    "ScatteringBlocks",
    "SquareWellConfig",
    "StateTag",
    "asymptotic_band_energy",
    "bic_line",
    "bound_state_wavefunction",
    "build_channel_hamiltonian",
    "channel_matrix_element",
    "classify_states",
    "det_hbd",
    "enumerate_modes",
    "fd_eigen_oracle",
    "find_poles",
    "lifetime_scaling",
    "mode_wavenumber",
    "potential_value",
    "reaction_matrix",
    "reflection_coefficients",
    "s_matrix",
    "scan_bics",
    "solve_channel",
    "square_well_exact",
    "square_well_series",
    "theta3",
    "unitarity_defect",
    "wavefunction_grid",
    "x_parity",
]
