"""Reaction matrices, K matrix, and S matrix for one Bloch channel.

The reaction matrices relate boundary values to inward normal derivatives at
the two faces z = -L (bottom, B) and z = +L (top, T):

    R[a, a'](nu1, nu2; E) = (1/2) sum_j Phi_j,nu1(z_a) Phi*_j,nu2(z_a') / (E - lam_j)

with hbar^2/2m = 1/2 in atomic units.  Because the cosine basis is truncated
at n_max, the slowly converging 1/n^2 part of the eigenstate sum is missing;
``free_tail=True`` restores it analytically by treating every basis state
beyond the cutoff as potential-free, summing the remainder with digamma
functions.  For a potential that is constant in z (the square-well oracle)
the tail is exact; for the lattice it removes the leading truncation bias.

Stacking the boundary faces as (B, T) and scaling by mode wavenumbers gives
the K matrix, and the Cayley form of the S matrix:

    K = sqrt(k) R sqrt(k),      S = -U* (1 + iK)^(-1) (1 - iK) U*,

with U = diag(exp(i k_nu L)).  Evanescent modes make the full S non-unitary;
the sub-block on propagating modes is unitary to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, polygamma

from .bloch import BlochChannel, ModeSet, enumerate_modes
from .errors import PoleProximityError, SingularMatrixError
from .reaction import ChannelEigenBasis

__all__ = [
    "ScatteringBlocks",
    "resolve_state_filter",
    "reaction_matrix",
    "s_matrix",
    "reflection_coefficients",
    "unitarity_defect",
]

MODE_LABELS = {-1: "m", 0: "0", 1: "p"}


@dataclass(frozen=True)
class ScatteringBlocks:
    """Per-energy scattering data for one channel.

    ``r_bb`` .. ``r_tt`` are the four reaction-matrix blocks over the modes
    in ``modes``; ``s_full`` spans both faces and all modes (evanescent rows
    included); ``s_prop`` is the unitary propagating sub-block with face-
    major ordering (B modes ascending nu, then T modes).
    """

    energy: float
    channel: BlochChannel
    modes: ModeSet
    r_bb: np.ndarray
    r_bt: np.ndarray
    r_tb: np.ndarray
    r_tt: np.ndarray
    k_matrix: np.ndarray
    s_full: np.ndarray
    s_prop: np.ndarray


def resolve_state_filter(basis: ChannelEigenBasis, state_filter):
    """Boolean mask over basis states.

    Accepted forms: ``"all"``, ``"localized"`` (requires a classified basis),
    ``("below", ceiling)``, or an explicit boolean mask / index array.
    """
    n = basis.eigenvalues.size
    if state_filter is None or state_filter == "all":
        return np.ones(n, dtype=bool)
    if state_filter == "localized":
        if basis.localized_mask is None:
            raise ValueError("basis has no localized_mask; run classify_states first")
        return basis.localized_mask
    if isinstance(state_filter, tuple) and len(state_filter) == 2 and state_filter[0] == "below":
        return basis.eigenvalues < float(state_filter[1])
    mask = np.asarray(state_filter)
    if mask.dtype == bool:
        return mask
    out = np.zeros(n, dtype=bool)
    out[mask] = True
    return out


def _tail_plain(y: complex, n_start: int) -> complex:
    """sum_{n > n_start} 1 / (y^2 - n^2), via the digamma reflection."""
    if abs(y) < 1e-8:
        return complex(-polygamma(1, n_start + 1))
    return complex((digamma(n_start + 1 - y) - digamma(n_start + 1 + y)) / (2.0 * y))


def _tail_alternating(y: complex, n_start: int) -> complex:
    """sum_{n > n_start} (-1)^n / (y^2 - n^2): even part minus odd part."""
    return 0.5 * _tail_plain(y / 2.0, n_start // 2) - _tail_plain(y, n_start)


def _free_tail_terms(basis: ChannelEigenBasis, energy, nu: int):
    """Diagonal tail (same-face, cross-face) of the missing n > n_max sum.

    Beyond the cutoff every basis state is treated as uncoupled, sitting at
    its kinetic energy shifted by the asymptotic diagonal potential element
    (``basis.tail_offset``); the shift is exact for a z-constant potential.
    """
    L = basis.region.half_width
    n_start = basis.region.transverse_cutoff
    kap = basis.channel.lattice_momentum(nu)
    e_eff = energy - 0.5 * kap * kap - basis.tail_offset
    y = np.sqrt(complex(8.0 * L * L * e_eff) / np.pi**2)
    scale = 4.0 * L / np.pi**2
    return scale * _tail_plain(y, n_start), scale * _tail_alternating(y, n_start)


def reaction_matrix(
    basis: ChannelEigenBasis,
    energy,
    modes: ModeSet,
    state_filter="all",
    free_tail: bool = True,
    pole_tolerance: float = 1e-12,
):
    """Four reaction-matrix blocks (BB, BT, TB, TT) over ``modes`` at ``energy``.

    ``energy`` may be complex (the eigenstate sum is rational in E); at real
    energy closer than ``pole_tolerance`` to a retained eigenvalue the sum is
    meaningless and a :class:`PoleProximityError` is raised.
    """
    keep = resolve_state_filter(basis, state_filter)
    lam = basis.eigenvalues[keep]
    if np.imag(energy) == 0:
        gaps = np.abs(lam - np.real(energy))
        if gaps.size and gaps.min() < pole_tolerance:
            bad = lam[np.argmin(gaps)]
            raise PoleProximityError(f"energy {energy} sits on eigenvalue {bad}", bad)
    cols = [basis.nu_column(m.index) for m in modes]
    den = complex(energy) - lam
    b = basis.surface_bottom[keep][:, cols]
    t = basis.surface_top[keep][:, cols]

    def block(p1, p2):
        return 0.5 * np.einsum("jm,jn->mn", p1 / den[:, None], p2.conj())

    r_bb, r_bt = block(b, b), block(b, t)
    r_tb, r_tt = block(t, b), block(t, t)
    if free_tail:
        for i, mode in enumerate(modes):
            same, cross = _free_tail_terms(basis, complex(energy), mode.index)
            r_bb[i, i] += same
            r_tt[i, i] += same
            r_bt[i, i] += cross
            r_tb[i, i] += cross
    return r_bb, r_bt, r_tb, r_tt


def s_matrix(
    basis: ChannelEigenBasis,
    energy: float,
    mode_cutoff: int = 2,
    state_filter="all",
    free_tail: bool = True,
    modes: ModeSet | None = None,
    wavenumbers=None,
) -> ScatteringBlocks:
    """Assemble the full and propagating S matrices at one energy.

    ``modes``/``wavenumbers`` may be supplied to override the physical-sheet
    classification (used for second-sheet continuation in pole searches);
    by default modes are enumerated at the real energy.
    """
    if modes is None:
        modes = enumerate_modes(float(np.real(energy)), basis.channel, mode_cutoff)
    r_bb, r_bt, r_tb, r_tt = reaction_matrix(basis, energy, modes, state_filter, free_tail)
    k = modes.wavenumbers if wavenumbers is None else np.asarray(wavenumbers)
    nm = len(modes)
    r_full = np.block([[r_bb, r_bt], [r_tb, r_tt]])
    sqrt_k = np.sqrt(np.concatenate([k, k]).astype(complex))
    k_mat = sqrt_k[:, None] * r_full * sqrt_k[None, :]
    one = np.eye(2 * nm)
    lhs = one + 1j * k_mat
    cond = np.linalg.cond(lhs)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularMatrixError("1 + iK is numerically singular", cond)
    cayley = np.linalg.solve(lhs, one - 1j * k_mat)
    u_conj = np.conj(np.exp(1j * np.concatenate([k, k]) * basis.region.half_width))
    s_full = -u_conj[:, None] * cayley * u_conj[None, :]
    pp = np.concatenate([modes.propagating_mask, modes.propagating_mask])
    s_prop = s_full[np.ix_(pp, pp)]
    return ScatteringBlocks(
        energy=float(np.real(energy)),
        channel=basis.channel,
        modes=modes,
        r_bb=r_bb,
        r_bt=r_bt,
        r_tb=r_tb,
        r_tt=r_tt,
        k_matrix=k_mat,
        s_full=s_full,
        s_prop=s_prop,
    )


def _mode_label(nu: int) -> str:
    return MODE_LABELS.get(nu, str(nu))


def reflection_coefficients(blocks: ScatteringBlocks, side: str = "bottom"):
    """Labelled amplitudes of the propagating block for waves entering one side.

    Returns ``{"R": {(out, in): amp}, "T": {(out, in): amp}}`` keyed by mode
    labels (m for nu=-1, p for nu=+1).  R collects same-side (reflection)
    entries, T the cross-side (transmission) ones.
    """
    if side not in ("bottom", "top"):
        raise ValueError("side must be 'bottom' or 'top'")
    prop = [m for m in blocks.modes if m.propagating]
    n_all = len(blocks.modes)
    n_prop = len(prop)
    # s_prop ordering: B-face modes then T-face modes
    in_off = 0 if side == "bottom" else n_prop
    refl_off = 0 if side == "bottom" else n_prop
    trans_off = n_prop if side == "bottom" else 0
    out = {"R": {}, "T": {}}
    for i_out, m_out in enumerate(prop):
        for i_in, m_in in enumerate(prop):
            key = (_mode_label(m_out.index), _mode_label(m_in.index))
            out["R"][key] = complex(blocks.s_prop[refl_off + i_out, in_off + i_in])
            out["T"][key] = complex(blocks.s_prop[trans_off + i_out, in_off + i_in])
    return out


def unitarity_defect(blocks: ScatteringBlocks) -> float:
    s = blocks.s_prop
    return float(np.abs(s.conj().T @ s - np.eye(s.shape[0])).max())
