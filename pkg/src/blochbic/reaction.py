"""Reaction-region eigenproblem per Bloch channel.

Inside the strip |z| <= L the channel Hamiltonian is expanded over the
product basis of lattice harmonics ``exp(i (K + nu pi/a) x) / sqrt(2a)`` and
zero-slope cosines ``xi_n(z)``.  The kinetic part is diagonal,

    T(nu, n) = ((K + nu pi/a)^2 + (n pi / 2L)^2) / 2,

and the potential block comes from :mod:`blochbic.potential`.  Diagonalizing
gives the eigenvalues and the surface amplitudes

    Phi_j,nu(z) = sum_n C[j, nu, n] xi_n(z)  at  z = -L and z = +L,

which are all the scattering machinery ever needs from the interior.

The region supports two kinds of states: *localized* ones pinned to the
potential whose energies ignore the box size L, and *extended* ones that
discretize the continuum and march with L.  ``classify_states`` separates
them by tracking each state across an L sweep (overlap of transverse density
profiles, refined by x parity when available) and thresholding |dE/dL|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .bloch import BlochChannel, RegionConfig
from .errors import EigensolverError, TrackingError
from .potential import LatticeConfig, potential_block, transverse_basis

__all__ = [
    "ChannelEigenBasis",
    "StateTag",
    "build_channel_hamiltonian",
    "solve_channel",
    "x_parity",
    "classify_states",
    "wavefunction_grid",
]


@dataclass(frozen=True)
class ChannelEigenBasis:
    """Eigenpairs and surface data of one channel's reaction region.

    ``coefficients`` has shape (n_states, 2M+1, n_max+1); ``surface_bottom``
    and ``surface_top`` have shape (n_states, 2M+1) and hold Phi_j,nu(-L) and
    Phi_j,nu(+L).  ``localized_mask`` is attached by ``classify_states``.
    """

    lattice: LatticeConfig
    region: RegionConfig
    channel: BlochChannel
    eigenvalues: np.ndarray
    coefficients: np.ndarray
    surface_bottom: np.ndarray
    surface_top: np.ndarray
    localized_mask: np.ndarray | None = None
    # n -> infinity limit of the diagonal potential element; shifts the
    # analytic continuation of the eigenstate sum beyond the basis cutoff
    tail_offset: float = 0.0

    @property
    def nu_values(self):
        M = self.region.fourier_cutoff
        return np.arange(-M, M + 1)

    def nu_column(self, nu: int) -> int:
        M = self.region.fourier_cutoff
        if not -M <= nu <= M:
            raise ValueError(f"mode {nu} outside basis cutoff {M}")
        return nu + M

    def with_localized(self, mask) -> "ChannelEigenBasis":
        return replace(self, localized_mask=np.asarray(mask, dtype=bool))


@dataclass(frozen=True)
class StateTag:
    index: int
    energy: float
    localized: bool
    parity: str  # "even" | "odd" | "none"


def build_channel_hamiltonian(cfg: LatticeConfig, region: RegionConfig, channel: BlochChannel):
    """Dense channel Hamiltonian over the (nu, n) basis, nu-major layout."""
    M = region.fourier_cutoff
    n_max = region.transverse_cutoff
    nb = n_max + 1
    H = potential_block(cfg, region)
    kin_z = 0.5 * (np.arange(nb) * math.pi / (2 * region.half_width)) ** 2
    for iv, nu in enumerate(range(-M, M + 1)):
        kin_x = 0.5 * channel.lattice_momentum(nu) ** 2
        idx = np.arange(iv * nb, (iv + 1) * nb)
        H[idx, idx] += kin_x + kin_z
    return H


def _asymptotic_diagonal(cfg: LatticeConfig, region: RegionConfig) -> float:
    """n -> infinity limit of <nu,n|V|nu,n>: the z-average of each Gaussian line.

    The squared cosine averages to 1/2L against the slowly varying profile,
    leaving (1/2L) times the profile integral over the region (an erf).
    """
    L = region.half_width
    sig = cfg.gauss_width
    pref = cfg.half_cell / math.sqrt(2.0 * math.pi) / sig

    def profile_integral(center):
        s = math.sqrt(2.0) * sig
        return pref * sig * math.sqrt(math.pi / 2.0) * (
            math.erf((L - center) / s) + math.erf((L + center) / s)
        )

    val = -(cfg.well_depth / 2.0) * profile_integral(0.0) / (2 * L)
    if cfg.asymmetry != 0.0:
        val -= cfg.asymmetry * (cfg.well_depth / 2.0) * profile_integral(-cfg.offset_z) / (2 * L)
    return val


def solve_channel(
    cfg: LatticeConfig,
    region: RegionConfig,
    channel: BlochChannel,
    energy_ceiling: float | None = None,
) -> ChannelEigenBasis:
    """Diagonalize the channel Hamiltonian and collect surface amplitudes."""
    H = build_channel_hamiltonian(cfg, region, channel)
    try:
        lam, vec = scipy.linalg.eigh(H)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise EigensolverError(str(exc), H.shape[0]) from exc
    if energy_ceiling is not None:
        keep = lam <= energy_ceiling
        lam, vec = lam[keep], vec[:, keep]
    M = region.fourier_cutoff
    nb = region.transverse_cutoff + 1
    coeff = np.ascontiguousarray(vec.T.reshape(lam.size, 2 * M + 1, nb))
    xi_b = transverse_basis(region.transverse_cutoff, -region.half_width, region.half_width)[:, 0]
    xi_t = transverse_basis(region.transverse_cutoff, region.half_width, region.half_width)[:, 0]
    return ChannelEigenBasis(
        lattice=cfg,
        region=region,
        channel=channel,
        eigenvalues=lam,
        coefficients=coeff,
        surface_bottom=coeff @ xi_b,
        surface_top=coeff @ xi_t,
        tail_offset=_asymptotic_diagonal(cfg, region),
    )


def x_parity(coefficients: np.ndarray, tol: float = 1e-8) -> str:
    """Parity of a state under x -> -x, i.e. nu -> -nu on the coefficients.

    Only meaningful for a symmetric cell at the zone center.  The global
    phase is fixed first (largest coefficient made real positive) so the
    comparison is phase-free.
    """
    c = np.asarray(coefficients)
    peak = np.unravel_index(np.argmax(np.abs(c)), c.shape)
    phase = c[peak] / abs(c[peak])
    c = c / phase
    flipped = c[::-1]
    scale = np.abs(c).max()
    if np.abs(c - flipped).max() <= tol * scale:
        return "even"
    if np.abs(c + flipped).max() <= tol * scale:
        return "odd"
    return "none"


def _transverse_density(basis: ChannelEigenBasis, j: int, z: np.ndarray) -> np.ndarray:
    """|psi|^2 integrated over the unit cell, as a function of z."""
    xi = transverse_basis(basis.region.transverse_cutoff, z, basis.region.half_width)
    phi = basis.coefficients[j] @ xi  # (nu, z)
    return np.sum(np.abs(phi) ** 2, axis=0)


def _density_overlap(rho1: np.ndarray, rho2: np.ndarray) -> float:
    return float(np.dot(rho1, rho2) / math.sqrt(np.dot(rho1, rho1) * np.dot(rho2, rho2)))


def classify_states(
    cfg: LatticeConfig,
    region: RegionConfig,
    channel: BlochChannel,
    L_grid,
    energy_window,
    slope_threshold: float = 0.05,
    overlap_floor: float = 0.5,
    min_overlap_grid: int = 200,
):
    """Tag window states of the reference region as localized or extended.

    Solves the channel at every L in ``L_grid`` (the reference half_width is
    inserted if missing), chains states across the sweep by transverse
    density overlap (restricted to the same x-parity sector when the cell is
    symmetric and the channel is at the zone center), and calls a chain
    localized when |dE/dL| stays below ``slope_threshold`` everywhere.

    Returns ``(tags, sweep)``: tags for the reference-L window states, and
    the raw sweep data ``{L: eigenvalues_in_window}`` for export.
    """
    L_values = sorted(set(float(L) for L in L_grid) | {region.half_width})
    if len(L_values) < 3:
        raise ValueError("L_grid must contain at least 3 distinct points")
    e_lo, e_hi = energy_window

    symmetric = cfg.asymmetry == 0.0 and channel.momentum == 0.0
    bases = {}
    for L in L_values:
        # keep the transverse resolution (states per length) fixed across the sweep
        n_max = max(region.transverse_cutoff, int(round(region.transverse_cutoff * L / region.half_width)))
        reg_L = replace(region, half_width=L, transverse_cutoff=n_max)
        bases[L] = solve_channel(cfg, reg_L, channel)

    z_common = np.linspace(-min(L_values), min(L_values), min_overlap_grid)
    ref_L = region.half_width
    ref = bases[ref_L]
    window_idx = np.nonzero((ref.eigenvalues >= e_lo) & (ref.eigenvalues <= e_hi))[0]

    tags = []
    for j in window_idx:
        parity = x_parity(ref.coefficients[j]) if symmetric else "none"
        rho_ref = _transverse_density(ref, j, z_common)
        energies = {ref_L: ref.eigenvalues[j]}
        # walk outward from the reference L in both directions
        for direction in (+1, -1):
            rho, par = rho_ref, parity
            pos = L_values.index(ref_L)
            while 0 <= pos + direction < len(L_values):
                pos += direction
                L = L_values[pos]
                b = bases[L]
                cand = np.nonzero((b.eigenvalues >= e_lo - 1.0) & (b.eigenvalues <= e_hi + 1.0))[0]
                if symmetric:
                    cand = [c for c in cand if x_parity(b.coefficients[c]) == par]
                if len(cand) == 0:
                    raise TrackingError(f"no candidate states at L={L}")
                overlaps = []
                for c in cand:
                    overlaps.append(_density_overlap(rho, _transverse_density(b, c, z_common)))
                best = int(np.argmax(overlaps))
                if overlaps[best] < overlap_floor:
                    raise TrackingError(
                        f"state tracking ambiguous at L={L}: best overlap {overlaps[best]:.3f}"
                    )
                energies[L] = b.eigenvalues[cand[best]]
                rho = _transverse_density(b, cand[best], z_common)
        Ls = sorted(energies)
        slopes = [
            abs(energies[L2] - energies[L1]) / (L2 - L1) for L1, L2 in zip(Ls[:-1], Ls[1:])
        ]
        tags.append(
            StateTag(
                index=int(j),
                energy=float(ref.eigenvalues[j]),
                localized=max(slopes) < slope_threshold,
                parity=parity,
            )
        )

    sweep = {
        L: bases[L].eigenvalues[(bases[L].eigenvalues >= e_lo) & (bases[L].eigenvalues <= e_hi)]
        for L in L_values
    }
    return tags, sweep


def wavefunction_grid(basis: ChannelEigenBasis, j: int, x, z):
    """psi_j(x, z) over a grid; x within the lattice, z within the region."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    a = basis.lattice.half_cell
    n_cells = basis.channel.cell_count or 1
    xi = transverse_basis(basis.region.transverse_cutoff, z, basis.region.half_width)
    phi_nu = basis.coefficients[j] @ xi  # (nu, z)
    waves = np.exp(
        1j * np.outer(basis.channel.momentum + basis.nu_values * math.pi / a, x)
    )  # (nu, x)
    norm = 1.0 / math.sqrt(2 * n_cells * a)
    return norm * np.einsum("vx,vz->xz", waves, phi_nu)
