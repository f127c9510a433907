"""Channel kinematics: Bloch momenta, transverse modes, asymptotic bands.

A lattice of ``N`` unit cells with periodic boundary conditions supports the
discrete Bloch momenta ``K_l = l pi / (N a)``.  Within one channel the
transverse modes are labelled by an integer ``nu``; mode ``nu`` carries
lattice momentum ``K + nu pi / a`` and z momentum

    k_nu(E) = sqrt(2 E - (K + nu pi / a)^2),

real for propagating modes and ``+i q`` (decaying outward) for evanescent
ones.  Resonance poles live on the second sheet, reached by flipping the
branch of the square root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RegionConfig",
    "BlochChannel",
    "ChannelMode",
    "ModeSet",
    "mode_wavenumber",
    "enumerate_modes",
    "asymptotic_band_energy",
    "band_structure",
]


@dataclass(frozen=True)
class RegionConfig:
    """Reaction-region geometry and basis truncation.

    ``half_width`` is the z extent L of the region (the potential tail beyond
    must be negligible); ``fourier_cutoff`` M keeps lattice harmonics
    nu in [-M, M]; ``transverse_cutoff`` keeps cosines n in [0, n_max].
    """

    half_width: float = 3.0
    cell_count: int = 1
    fourier_cutoff: int = 8
    transverse_cutoff: int = 40

    def __post_init__(self):
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")
        if self.cell_count < 1 or self.fourier_cutoff < 1 or self.transverse_cutoff < 1:
            raise ValueError("cell_count, fourier_cutoff, transverse_cutoff must be >= 1")

    @property
    def basis_size(self) -> int:
        return (2 * self.fourier_cutoff + 1) * (self.transverse_cutoff + 1)


@dataclass(frozen=True)
class BlochChannel:
    """One scattering channel of the periodic lattice.

    Either build from integer index ``l`` in [0, N) via :meth:`from_index`,
    or pin the momentum directly with :meth:`from_momentum` (used for
    continuous sweeps).  ``momentum`` always lies in [0, pi/a).
    """

    momentum: float
    half_cell: float = 1.0
    index: int | None = None
    cell_count: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.momentum < math.pi / self.half_cell:
            raise ValueError("Bloch momentum outside [0, pi/a)")

    @classmethod
    def from_index(cls, index: int, cell_count: int, half_cell: float = 1.0):
        if not 0 <= index < cell_count:
            raise ValueError("channel index must lie in [0, cell_count)")
        k = index * math.pi / (cell_count * half_cell)
        return cls(momentum=k, half_cell=half_cell, index=index, cell_count=cell_count)

    @classmethod
    def from_momentum(cls, momentum: float, half_cell: float = 1.0):
        return cls(momentum=momentum, half_cell=half_cell)

    def lattice_momentum(self, nu: int) -> float:
        """Total lattice momentum of transverse mode nu."""
        return self.momentum + nu * math.pi / self.half_cell

    def threshold(self, nu: int) -> float:
        """Energy at which mode nu starts to propagate."""
        return 0.5 * self.lattice_momentum(nu) ** 2


@dataclass(frozen=True)
class ChannelMode:
    index: int
    wavenumber: complex
    propagating: bool

    @property
    def decay_rate(self) -> float:
        """q such that k = i q when evanescent, else 0."""
        return float(self.wavenumber.imag) if not self.propagating else 0.0


@dataclass(frozen=True)
class ModeSet:
    energy: float
    channel: BlochChannel
    modes: tuple[ChannelMode, ...]

    def __iter__(self):
        return iter(self.modes)

    def __len__(self):
        return len(self.modes)

    @property
    def indices(self):
        return np.array([m.index for m in self.modes])

    @property
    def wavenumbers(self):
        return np.array([m.wavenumber for m in self.modes])

    @property
    def propagating_mask(self):
        return np.array([m.propagating for m in self.modes])

    @property
    def n_propagating(self) -> int:
        return int(self.propagating_mask.sum())


def mode_wavenumber(energy, channel: BlochChannel, nu: int, sheet: str = "physical") -> complex:
    """z wavenumber of mode nu at (possibly complex) energy.

    Physical sheet: real k >= 0 when propagating, +i q when evanescent, and
    the Im k >= 0 continuation for complex energy.  The second sheet carries
    the opposite branch; for real energy above threshold both sheets share
    the boundary value k > 0.
    """
    if sheet not in ("physical", "second"):
        raise ValueError(f"unknown sheet {sheet!r}")
    kap = channel.lattice_momentum(nu)
    w = kap * kap - 2.0 * complex(energy)
    if w.imag == 0.0:
        if w.real >= 0.0:  # evanescent: the sheets carry opposite decay
            q = math.sqrt(w.real)
            return complex(0.0, q) if sheet == "physical" else complex(0.0, -q)
        # propagating: the sheets meet on the cut, shared value k > 0
        return complex(math.sqrt(-w.real))
    k = 1j * np.sqrt(w)  # Im k > 0 branch away from the real axis
    return complex(k) if sheet == "physical" else complex(-k)


def enumerate_modes(energy: float, channel: BlochChannel, mode_cutoff: int) -> ModeSet:
    """Classify modes nu in [-cutoff, cutoff] at real energy, ascending nu."""
    if mode_cutoff < 0:
        raise ValueError("mode_cutoff must be >= 0")
    modes = []
    for nu in range(-mode_cutoff, mode_cutoff + 1):
        k = mode_wavenumber(energy, channel, nu, "physical")
        modes.append(ChannelMode(index=nu, wavenumber=k, propagating=k.imag == 0.0))
    return ModeSet(energy=float(energy), channel=channel, modes=tuple(modes))


def asymptotic_band_energy(momentum: float, nu: int, half_cell: float = 1.0) -> float:
    """Band edge E = (K + nu pi/a)^2 / 2 of the asymptotic region (k_z = 0)."""
    return 0.5 * (momentum + nu * math.pi / half_cell) ** 2


def band_structure(momenta, nu_values, half_cell: float = 1.0):
    """(K, nu, E) rows for the asymptotic band edges."""
    rows = []
    for K in momenta:
        for nu in nu_values:
            rows.append((float(K), int(nu), asymptotic_band_energy(K, nu, half_cell)))
    return rows
