"""Bound states in the continuum and quasibound-state poles.

Below the first propagating threshold of a channel (E < K^2/2) the nu = 0
mode is evanescent with decay rate q0 = sqrt(K^2 - 2E).  A normalizable
state must connect to purely decaying exponentials on both faces, which
through the reaction-matrix boundary relation requires

    det H_bd = 0,   H_bd = [[1 - q0 R_BB, -q0 R_BT], [-q0 R_TB, 1 - q0 R_TT]]

(the nu = 0 entries of the reaction matrices).  The same condition is the
below-threshold limit of det(1 + iK) = 0, i.e. an S-matrix pole at real
energy: a bound state.  Positive-energy roots below the channel threshold
are bound states *in the continuum*: conserved Bloch momentum leaves them
no propagating mode to decay into.

Above threshold the S matrix continues across the real axis onto the second
sheet (open modes flip the branch of their wavenumber), where quasibound
states show up as complex zeros of d(E) = det(1 + iK(E)).  Zeros are counted
by the argument principle on rectangle boundaries — after multiplying out
the known real poles of d at the retained eigenvalues, whose near-cancelling
zero/pole dipoles would otherwise hide from any finite boundary sampling —
and refined by Newton iteration on the deflated function.  Each pole gets a
residue estimate of a selected scattering amplitude so that symmetry-
decoupled states (zero residue) can be filtered per amplitude.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .bloch import BlochChannel, ChannelMode, ModeSet, mode_wavenumber
from .errors import DomainError, TrackingError
from .reaction import ChannelEigenBasis, solve_channel
from .scattering import reaction_matrix, resolve_state_filter, s_matrix

__all__ = [
    "BoundStateMatrix",
    "Pole",
    "LifetimeFit",
    "ContinuumResult",
    "det_hbd",
    "scan_bics",
    "bic_line",
    "find_poles",
    "lifetime_scaling",
    "bound_state_wavefunction",
]


@dataclass(frozen=True)
class BoundStateMatrix:
    energy: float
    channel: BlochChannel
    decay_rate: float
    matrix: np.ndarray
    det: float


@dataclass(frozen=True)
class Pole:
    energy: complex
    residue: complex
    amplitude: str


@dataclass(frozen=True)
class LifetimeFit:
    prefactor: float
    exponent: float
    residual: float
    beta_values: tuple
    widths: tuple
    poles: tuple
    lost: tuple = ()


@dataclass(frozen=True)
class ContinuumResult:
    bic_roots: tuple = ()
    poles: tuple = ()
    lifetime_fits: tuple = ()


def _hbd(basis: ChannelEigenBasis, energy: float, state_filter, free_tail: bool) -> BoundStateMatrix:
    K = basis.channel.momentum
    threshold = 0.5 * K * K
    if energy >= threshold:
        raise DomainError(
            f"E={energy} >= K^2/2={threshold}: nu=0 propagates, bound-state condition inapplicable"
        )
    q0 = math.sqrt(K * K - 2.0 * energy)
    zero_mode = ModeSet(
        energy=energy,
        channel=basis.channel,
        modes=(ChannelMode(index=0, wavenumber=complex(0, q0), propagating=False),),
    )
    r_bb, r_bt, r_tb, r_tt = reaction_matrix(basis, energy, zero_mode, state_filter, free_tail)
    h = np.array(
        [
            [1.0 - q0 * r_bb[0, 0], -q0 * r_bt[0, 0]],
            [-q0 * r_tb[0, 0], 1.0 - q0 * r_tt[0, 0]],
        ]
    )
    det = h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0]
    return BoundStateMatrix(
        energy=energy, channel=basis.channel, decay_rate=q0, matrix=h, det=float(det.real)
    )


def det_hbd(basis: ChannelEigenBasis, energy: float, state_filter="all", free_tail: bool = True) -> float:
    """Bound-state determinant at real energy below the nu=0 threshold.

    Real for any asymmetry at real energy (the off-diagonal product is
    |R_BT|^2 there); vanishes exactly at bound-state energies.
    """
    return _hbd(basis, energy, state_filter, free_tail).det


def scan_bics(
    basis: ChannelEigenBasis,
    energy_range,
    grid_points: int = 2000,
    state_filter="all",
    free_tail: bool = True,
    refine_tol: float = 1e-8,
):
    """Bracket and bisect the roots of det H_bd over an energy range.

    The scan grid is split at the retained eigenvalues (genuine poles of the
    determinant) and each pole neighbourhood is probed on a geometric
    micro-grid so roots hugging a pole are still bracketed.  Returns a list
    of ``(root, residual_det)``; emits a rescan advisory if a bracket looks
    multi-rooted after refinement.
    """
    e_lo, e_hi = float(energy_range[0]), float(energy_range[1])
    threshold = 0.5 * basis.channel.momentum ** 2
    if e_hi >= threshold:
        raise DomainError(f"energy_range must stay below K^2/2 = {threshold}")
    if e_hi <= e_lo:
        return []

    keep = resolve_state_filter(basis, state_filter)
    poles = np.sort(basis.eigenvalues[keep])
    poles = poles[(poles > e_lo) & (poles < e_hi)]

    def f(E):
        return det_hbd(basis, E, state_filter, free_tail)

    # segment grid split at determinant poles, plus geometric approaches
    points = set(np.linspace(e_lo, e_hi, grid_points))
    for p in poles:
        for k in range(4, 11):
            eps = 10.0 ** (-k)
            points.add(p - eps)
            points.add(p + eps)
    grid = np.array(
        sorted(
            pt
            for pt in points
            if e_lo <= pt <= e_hi and (poles.size == 0 or np.abs(poles - pt).min() > 1e-11)
        )
    )
    vals = np.array([f(E) for E in grid])

    roots = []
    for i in range(grid.size - 1):
        a, b = grid[i], grid[i + 1]
        fa, fb = vals[i], vals[i + 1]
        if fa == 0.0:
            roots.append((float(a), 0.0))
            continue
        if np.sign(fa) == np.sign(fb):
            continue
        if np.any((poles > a) & (poles < b)):
            continue  # sign flip across a determinant pole, not a root
        while b - a > refine_tol:
            m = 0.5 * (a + b)
            fm = f(m)
            if fm == 0.0:
                a = b = m
                break
            if np.sign(fm) == np.sign(fa):
                a, fa = m, fm
            else:
                b, fb = m, fm
        root = 0.5 * (a + b)
        res = abs(f(root))
        near_pole = poles.size and np.abs(poles - root).min() < 1e-5
        mid = f(root + 5 * refine_tol) if root + 5 * refine_tol < e_hi else res
        if res > 1e-3 * max(1.0, abs(mid)) and not near_pole:
            # a pole-pinned root is as resolved as doubles allow; anything
            # else with a large residual suggests an unresolved pair
            warnings.warn(
                f"possible unresolved root pair near E={root:.6g}; rescan with a finer grid",
                RuntimeWarning,
            )
        roots.append((float(root), float(res)))
    # deduplicate brackets that collapsed onto the same root
    out = []
    for r, res in roots:
        if not out or abs(r - out[-1][0]) > 10 * refine_tol:
            out.append((r, res))
    return out


def bic_line(
    cfg,
    region,
    momenta,
    energy_window=None,
    state_filter="all",
    free_tail: bool = True,
    grid_points: int = 800,
):
    """Positive-energy bound-state line E_BIC(K) across the zone.

    For each Bloch momentum the channel is solved and the determinant is
    scanned over (0, K^2/2); momenta without a positive root are omitted.
    """
    curve = []
    for K in momenta:
        channel = BlochChannel.from_momentum(float(K), cfg.half_cell)
        basis = solve_channel(cfg, region, channel)
        top = 0.5 * K * K - 1e-9
        lo = 1e-9 if energy_window is None else max(energy_window[0], 1e-9)
        hi = top if energy_window is None else min(energy_window[1], top)
        if hi <= lo:
            continue
        roots = scan_bics(basis, (lo, hi), grid_points, state_filter, free_tail)
        for root, _ in roots:
            curve.append((float(K), root))
    return curve


def _second_sheet_wavenumbers(basis: ChannelEigenBasis, energy: complex, nu_values, open_modes):
    return np.array(
        [
            mode_wavenumber(energy, basis.channel, nu, "second" if nu in open_modes else "physical")
            for nu in nu_values
        ]
    )


def _det_one_plus_ik(basis, energy, nu_values, open_modes, state_filter, free_tail):
    modes = ModeSet(
        energy=float(np.real(energy)),
        channel=basis.channel,
        modes=tuple(
            ChannelMode(index=nu, wavenumber=0j, propagating=(nu in open_modes)) for nu in nu_values
        ),
    )
    r_bb, r_bt, r_tb, r_tt = reaction_matrix(basis, energy, modes, state_filter, free_tail)
    k = _second_sheet_wavenumbers(basis, energy, nu_values, open_modes)
    r_full = np.block([[r_bb, r_bt], [r_tb, r_tt]])
    sqrt_k = np.sqrt(np.concatenate([k, k]))
    k_mat = sqrt_k[:, None] * r_full * sqrt_k[None, :]
    return np.linalg.det(np.eye(2 * len(nu_values)) + 1j * k_mat)


def _amplitude_entry(basis, energy, nu_values, open_modes, state_filter, free_tail, selector):
    """One entry of the face-stacked S matrix on the continued sheet."""
    k = _second_sheet_wavenumbers(basis, energy, nu_values, open_modes)
    modes = ModeSet(
        energy=float(np.real(energy)),
        channel=basis.channel,
        modes=tuple(
            ChannelMode(index=nu, wavenumber=kk, propagating=(nu in open_modes))
            for nu, kk in zip(nu_values, k)
        ),
    )
    blocks = s_matrix(
        basis,
        energy,
        state_filter=state_filter,
        free_tail=free_tail,
        modes=modes,
        wavenumbers=k,
    )
    face_out, face_in, nu_out, nu_in = selector
    nm = len(nu_values)
    row = (0 if face_out == "B" else nm) + list(nu_values).index(nu_out)
    col = (0 if face_in == "B" else nm) + list(nu_values).index(nu_in)
    return blocks.s_full[row, col]


def _adaptive_winding(f, corners, coarse: int = 48, min_step: float = 1e-13):
    """Winding number of f around the closed polyline through corners."""
    total = 0.0
    for a, b in zip(corners[:-1], corners[1:]):
        ts = list(np.linspace(0.0, 1.0, coarse))
        vals = {t: f(a + (b - a) * t) for t in ts}
        i = 0
        while i < len(ts) - 1:
            t0, t1 = ts[i], ts[i + 1]
            dphi = np.angle(vals[t1] / vals[t0])
            if abs(dphi) > 0.5 * np.pi and (t1 - t0) > min_step:
                tm = 0.5 * (t0 + t1)
                vals[tm] = f(a + (b - a) * tm)
                ts.insert(i + 1, tm)
                continue
            total += dphi
            i += 1
    return total / (2.0 * np.pi)


def find_poles(
    basis: ChannelEigenBasis,
    region_rect,
    amplitude=("B", "B", 0, 0),
    mode_cutoff: int = 1,
    state_filter="all",
    free_tail: bool = True,
    residue_floor: float = 1e-9,
    max_depth: int = 40,
    newton_tol: float = 1e-10,
):
    """Resonance poles of a scattering amplitude inside a complex rectangle.

    ``region_rect`` is (re_lo, re_hi, im_lo, im_hi) with im_hi < 0; modes
    whose threshold lies below re_hi are continued onto the second sheet.
    Zeros of the deflated determinant are counted by the argument principle,
    bisected in the real direction until isolated, Newton-refined, and kept
    when the selected amplitude has residue magnitude above
    ``residue_floor`` (symmetry-decoupled states have vanishing residue).
    """
    re_lo, re_hi, im_lo, im_hi = map(float, region_rect)
    if im_hi >= 0.0:
        raise DomainError("pole search region must lie strictly below the real axis")
    nu_values = tuple(range(-mode_cutoff, mode_cutoff + 1))
    open_modes = {nu for nu in nu_values if basis.channel.threshold(nu) < re_hi}

    keep = resolve_state_filter(basis, state_filter)
    lam_kept = np.sort(basis.eigenvalues[keep])

    def make_deflated(a, b, margin=0.1):
        # fixed deflation set per contour: the (E - lam) factors have no
        # zeros below the axis, so the winding count is unchanged
        lam_set = lam_kept[(lam_kept > a - margin) & (lam_kept < b + margin)]

        def f(E):
            v = _det_one_plus_ik(basis, E, nu_values, open_modes, state_filter, free_tail)
            for lj in lam_set:
                v = v * (E - lj)
            return v

        return f

    def count(a, b):
        corners = [
            complex(a, im_lo),
            complex(b, im_lo),
            complex(b, im_hi),
            complex(a, im_hi),
            complex(a, im_lo),
        ]
        return int(round(_adaptive_winding(make_deflated(a, b), corners)))

    found = []

    def pin_one(a, b):
        """Refine a cell known to hold exactly one zero."""
        width_tol = 1e-3 * (1.0 + abs(b))
        guard = 0
        while (b - a) > width_tol and guard < 60:
            guard += 1
            m = 0.5 * (a + b)
            nl = count(a, m)
            if nl == 1:
                b = m
            elif nl == 0:
                a = m
            else:  # count glitch; shift the cut once
                m = a + 0.6180339887 * (b - a)
                nl = count(a, m)
                if nl == 1:
                    b = m
                elif nl == 0:
                    a = m
                else:
                    break
        f = make_deflated(a, b)
        center = 0.5 * (a + b)
        ladder, im0 = [], 0.3 * abs(im_lo)
        while im0 > abs(im_hi):
            ladder.append(-im0)
            im0 /= 4.0
        ladder.append(0.5 * (im_lo + im_hi))
        pad = 10.0 * width_tol
        for start_im in ladder:
            z = _newton(f, complex(center, max(im_lo, min(im_hi, start_im))), newton_tol)
            if a - pad <= z.real <= b + pad and im_lo <= z.imag <= im_hi:
                found.append(z)
                return
        # guaranteed fallback: bisect the imaginary direction by winding
        lo, hi = im_lo, im_hi
        while hi - lo > 1e-11:
            mid = 0.5 * (lo + hi)
            corners = [
                complex(a, mid),
                complex(b, mid),
                complex(b, hi),
                complex(a, hi),
                complex(a, mid),
            ]
            if int(round(_adaptive_winding(f, corners))) == 1:
                lo = mid
            else:
                hi = mid
        found.append(_newton(f, complex(center, 0.5 * (lo + hi)), newton_tol))

    def locate(a, b, n, depth):
        if n == 0:
            return
        if n == 1:
            pin_one(a, b)
            return
        if depth >= max_depth or (b - a) < 1e-9:
            z = _newton(make_deflated(a, b), complex(0.5 * (a + b), 0.5 * (im_lo + im_hi)), newton_tol)
            found.append(z)
            warnings.warn(
                f"{n} zeros unresolved in [{a:.6g}, {b:.6g}]; refined one representative",
                RuntimeWarning,
            )
            return
        m = 0.5 * (a + b)
        n_left = count(a, m)
        if n_left + count(m, b) != n:
            # winding mismatch: retry once on a shifted cut, then give up loudly
            m = a + 0.6180339887 * (b - a)
            n_left = count(a, m)
            if n_left + count(m, b) != n:
                raise TrackingError(
                    f"winding counts inconsistent while subdividing [{a:.6g}, {b:.6g}]"
                )
        locate(a, m, n_left, depth + 1)
        locate(m, b, n - n_left, depth + 1)

    total = count(re_lo, re_hi)
    locate(re_lo, re_hi, total, 0)

    # dedupe zeros that two neighbouring cells converged onto
    found.sort(key=lambda z: z.real)
    unique = []
    for z in found:
        if not unique or abs(z - unique[-1]) > 1e-9 * (1.0 + abs(z)):
            unique.append(z)

    poles = []
    for z in unique:
        if not (re_lo <= z.real <= re_hi and im_lo <= z.imag <= im_hi):
            continue
        res = _residue(
            lambda E: _amplitude_entry(
                basis, E, nu_values, open_modes, state_filter, free_tail, amplitude
            ),
            z,
        )
        label = f"{amplitude[0]}{amplitude[1]}[{amplitude[2]},{amplitude[3]}]"
        if abs(res) > residue_floor:
            poles.append(Pole(energy=z, residue=res, amplitude=label))
    poles.sort(key=lambda p: p.energy.real)
    return poles


def _newton(f, z0: complex, tol: float, itmax: int = 200) -> complex:
    z = z0
    for _ in range(itmax):
        h = 1e-9 * (1.0 + abs(z))
        der = (f(z + h) - f(z - h)) / (2.0 * h)
        if der == 0:
            break
        step = f(z) / der
        z = z - step
        if abs(step) < tol * (1.0 + abs(z)):
            break
    return z


def _residue(g, pole: complex, radius: float = 1e-5, n_points: int = 64) -> complex:
    theta = 2.0 * np.pi * np.arange(n_points) / n_points
    ring = pole + radius * np.exp(1j * theta)
    vals = np.array([g(z) for z in ring])
    return complex(np.mean(vals * (ring - pole)))


def lifetime_scaling(
    cfg,
    region,
    channel: BlochChannel,
    beta_values,
    track_energies,
    mode_cutoff: int = 1,
    window_top: float | None = None,
    state_filter="all",
    free_tail: bool = True,
):
    """Quasibound widths versus asymmetry, fitted to -Im E = c * beta^p.

    ``track_energies`` seeds the tracked states at beta = 0; across the beta
    sweep each state is followed by eigenvector overlap and its pole by
    Newton continuation from the perturbed eigenvalue.  Betas where the
    tracked state has left the continuum (or the width collapses below
    numerical noise) are reported in ``lost`` and excluded from the fit.
    """
    beta_values = [float(b) for b in beta_values]
    if len(beta_values) < 4 or max(beta_values) / min(beta_values) < 10.0 - 1e-9:
        raise ValueError("need >= 4 beta values spanning at least a decade")
    base_cfg = type(cfg)(**{**cfg.__dict__, "asymmetry": 0.0})
    base = solve_channel(base_cfg, region, channel)
    nu_values = tuple(range(-mode_cutoff, mode_cutoff + 1))
    if window_top is None:
        window_top = min(channel.threshold(nu) for nu in (-1, 1))
    open_modes = {nu for nu in nu_values if channel.threshold(nu) < window_top}

    refs = []
    for e0 in track_energies:
        j = int(np.argmin(np.abs(base.eigenvalues - e0)))
        refs.append(base.coefficients[j].ravel())

    fits = []
    for ref in refs:
        widths, poles, lost = [], [], []
        for beta in beta_values:
            cfg_b = type(cfg)(**{**cfg.__dict__, "asymmetry": beta})
            b = solve_channel(cfg_b, region, channel)
            flat = b.coefficients.reshape(b.eigenvalues.size, -1)
            j = int(np.argmax(np.abs(flat @ ref.conj())))
            lam_j = b.eigenvalues[j]
            if lam_j <= 0.0 or lam_j >= window_top:
                lost.append(beta)
                continue
            keep = resolve_state_filter(b, state_filter)
            lam_kept = np.sort(b.eigenvalues[keep])
            lam_set = lam_kept[np.abs(lam_kept - lam_j) < 0.1]

            def deflated(E, b=b, lam_set=lam_set):
                v = _det_one_plus_ik(b, E, nu_values, open_modes, state_filter, free_tail)
                for lj in lam_set:
                    v = v * (E - lj)
                return v

            z = _newton(deflated, complex(lam_j, -1e-8), 1e-13)
            width = -z.imag
            if width <= 0.0 or abs(z.real - lam_j) > 0.1:
                lost.append(beta)
                continue
            widths.append((beta, width))
            poles.append((beta, z))
        if len(widths) < 2:
            raise TrackingError("pole tracking lost for all but one beta; no fit possible")
        if lost:
            warnings.warn(
                f"pole tracking lost at beta={lost}; fit uses the surviving points",
                RuntimeWarning,
            )
        lb = np.log([b for b, _ in widths])
        lw = np.log([w for _, w in widths])
        coeffs, res_info = np.polyfit(lb, lw, 1, full=True)[:2]
        p, logc = coeffs
        residual = float(res_info[0]) if len(res_info) else 0.0
        fits.append(
            LifetimeFit(
                prefactor=float(np.exp(logc)),
                exponent=float(p),
                residual=residual,
                beta_values=tuple(b for b, _ in widths),
                widths=tuple(w for _, w in widths),
                poles=tuple(poles),
                lost=tuple(lost),
            )
        )
    return fits


def bound_state_wavefunction(basis: ChannelEigenBasis, energy: float, x, z, state_filter="all", free_tail: bool = True):
    """Reconstruct the bound state at a determinant root on an (x, z) grid.

    The null vector of H_bd fixes the outgoing-amplitude ratio; the interior
    expansion coefficients follow from the surface couplings, and the state
    is normalized on the grid with the global phase fixed by its largest
    value.
    """
    h = _hbd(basis, energy, state_filter, free_tail)
    # null vector of the 2x2 system
    m = h.matrix
    if abs(m[0, 0]) + abs(m[0, 1]) >= abs(m[1, 0]) + abs(m[1, 1]):
        c_b, c_t = -m[0, 1], m[0, 0]
    else:
        c_b, c_t = -m[1, 1], m[1, 0]
    q0 = h.decay_rate
    keep = resolve_state_filter(basis, state_filter)
    col = basis.nu_column(0)
    lam = basis.eigenvalues[keep]
    phi_b = basis.surface_bottom[keep][:, col]
    phi_t = basis.surface_top[keep][:, col]
    # interior weight of each eigenstate from the boundary derivative data
    gamma = 0.5 * q0 * (phi_b.conj() * c_b + phi_t.conj() * c_t) / (energy - lam)
    coeff = np.tensordot(gamma, basis.coefficients[keep], axes=(0, 0))

    from .potential import transverse_basis  # local import to avoid a cycle

    xg = np.asarray(x, dtype=float)
    zg = np.asarray(z, dtype=float)
    a = basis.lattice.half_cell
    xi = transverse_basis(basis.region.transverse_cutoff, zg, basis.region.half_width)
    phi_nu = coeff @ xi
    waves = np.exp(1j * np.outer(basis.channel.momentum + basis.nu_values * np.pi / a, xg))
    psi = np.einsum("vx,vz->xz", waves, phi_nu) / math.sqrt(2 * a)
    norm = math.sqrt(np.sum(np.abs(psi) ** 2))
    if norm > 0:
        psi = psi / norm
        peak = np.unravel_index(np.argmax(np.abs(psi)), psi.shape)
        psi = psi * (abs(psi[peak]) / psi[peak])
    return psi
