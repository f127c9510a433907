"""Gaussian lattice potential built from Jacobi theta functions.

The potential describes an infinite chain of Gaussian wells along x (one
well per unit cell of width ``2a``, expressed compactly through the theta
function ``theta3``) multiplied by a single Gaussian profile along z, so the
system is periodic along the lattice and localized transversally:

    V(x, z) = -(U/2) theta3(pi x / 2a, q) * (a / (sqrt(2 pi) sigma)) * exp(-z^2 / 2 sigma^2)
              - beta * (same shape, shifted to (offset_x, -offset_z))

with nome ``q = exp(-eps^2 pi^2 / 2 a^2)``.  The second, ``beta``-weighted
line sits at irrational offsets so that any nonzero ``beta`` breaks the
reflection symmetry of the unit cell cleanly.

Everything is in atomic units (hbar = m = 1).

The module also provides the matrix elements of V in the mixed basis used by
the reaction-region eigenproblem: plane waves ``exp(i (K + nu pi/a) x)`` along
x and zero-slope cosines ``xi_n(z)`` on ``[-L, L]`` along z.  The x integral
is analytic (the theta function is its own Fourier series, with coefficient
``q^{m^2}`` at wavenumber ``m pi / a``); the z integrals are done with an
adaptive Gauss-Legendre rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from scipy.special import roots_legendre

from .errors import InvalidNomeError

__all__ = [
    "LatticeConfig",
    "theta3",
    "potential_value",
    "transverse_basis",
    "z_overlap_tables",
    "channel_matrix_element",
    "potential_block",
]


@dataclass(frozen=True)
class LatticeConfig:
    """Physical parameters of the lattice potential.

    ``offset_x`` and ``offset_z`` default to ``a*sqrt(1/17)`` and
    ``a*sqrt(1/13)``; they only matter when ``asymmetry`` is nonzero.
    ``theta_truncation`` caps the theta series; the default keeps far more
    terms than double precision can resolve.
    """

    well_depth: float = 30.0
    theta_width: float = 0.4
    gauss_width: float = 0.4
    half_cell: float = 1.0
    asymmetry: float = 0.0
    offset_x: float | None = None
    offset_z: float | None = None
    theta_truncation: int = 20

    def __post_init__(self):
        if self.well_depth <= 0:
            raise ValueError("well_depth must be positive")
        if self.theta_width <= 0 or self.gauss_width <= 0 or self.half_cell <= 0:
            raise ValueError("widths and half_cell must be positive")
        if self.asymmetry < 0:
            raise ValueError("asymmetry must be >= 0")
        if self.offset_x is None:
            object.__setattr__(self, "offset_x", self.half_cell * math.sqrt(1.0 / 17.0))
        if self.offset_z is None:
            object.__setattr__(self, "offset_z", self.half_cell * math.sqrt(1.0 / 13.0))
        # dropped theta term must be below double-precision noise
        if self.nome ** (self.theta_truncation + 1) ** 2 > 1e-14:
            raise ValueError("theta_truncation too small for this nome")

    @property
    def nome(self) -> float:
        return math.exp(-self.theta_width**2 * math.pi**2 / (2 * self.half_cell**2))


def theta3(u, q, terms: int = 20):
    """Jacobi theta function  theta3(u, q) = 1 + 2 sum_{n>=1} q^{n^2} cos(2 n u).

    Accepts scalar or array ``u``; ``q`` must lie in [0, 1).  The series is
    summed until terms fall below 1e-16 or ``terms`` is reached, which gives
    absolute accuracy far better than 1e-12 for the nomes used here.
    """
    if not 0.0 <= q < 1.0:
        raise InvalidNomeError(f"nome q={q!r} outside [0, 1)")
    u = np.asarray(u, dtype=float)
    acc = np.ones_like(u)
    for n in range(1, terms + 1):
        c = q ** (n * n)
        if c < 1e-16:
            break
        acc = acc + 2.0 * c * np.cos(2.0 * n * u)
    return acc if acc.ndim else float(acc)


def potential_value(cfg: LatticeConfig, x, z):
    """Evaluate V(x, z); broadcasts over array input."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    a, sig = cfg.half_cell, cfg.gauss_width
    q = cfg.nome
    pref = a / (math.sqrt(2.0 * math.pi) * sig)
    v = (
        -(cfg.well_depth / 2.0)
        * theta3(np.pi * x / (2 * a), q, cfg.theta_truncation)
        * pref
        * np.exp(-(z**2) / (2 * sig**2))
    )
    if cfg.asymmetry != 0.0:
        v = v - (
            cfg.asymmetry
            * (cfg.well_depth / 2.0)
            * theta3(np.pi * (x - cfg.offset_x) / (2 * a), q, cfg.theta_truncation)
            * pref
            * np.exp(-((z + cfg.offset_z) ** 2) / (2 * sig**2))
        )
    return v if v.ndim else float(v)


def transverse_basis(n_max: int, z, half_width: float):
    """Zero-slope cosine basis xi_n(z) on [-L, L], rows n = 0..n_max.

    xi_0 = sqrt(1/2L); xi_n = sqrt(1/L) cos(n pi (z + L) / 2L) for n >= 1.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    L = half_width
    out = np.empty((n_max + 1, z.size))
    out[0] = math.sqrt(1.0 / (2 * L))
    if n_max >= 1:
        n = np.arange(1, n_max + 1)[:, None]
        out[1:] = math.sqrt(1.0 / L) * np.cos(n * np.pi * (z[None, :] + L) / (2 * L))
    return out


def _gauss_nodes(npts: int, half_width: float):
    x, w = roots_legendre(npts)
    return half_width * x, half_width * w


@lru_cache(maxsize=64)
def _z_overlap_cached(n_max, half_width, center, sigma, pref, tol):
    """I[n1, n2] = pref * int_{-L}^{L} xi_n1 xi_n2 exp(-(z-center)^2 / 2 sigma^2) dz.

    Fixed Gauss-Legendre order, doubled until two consecutive rules agree to
    ``tol`` in the max norm.
    """
    npts = 200
    prev = None
    while npts <= 6400:
        z, w = _gauss_nodes(npts, half_width)
        g = pref * np.exp(-((z - center) ** 2) / (2 * sigma**2))
        xi = transverse_basis(n_max, z, half_width)
        table = (xi * (w * g)) @ xi.T
        if prev is not None and np.abs(table - prev).max() < tol:
            return table
        prev = table
        npts *= 2
    return prev


def z_overlap_tables(cfg: LatticeConfig, half_width: float, n_max: int, tol: float = 1e-12):
    """Gaussian-profile overlap tables for the symmetric and offset lines.

    Returns ``(I0, I1)`` with the Gaussian centered at z=0 and z=-offset_z
    respectively.  Integration runs over the reaction region only; with the
    default widths the tail beyond |z| = 3 contributes below 1e-12.
    """
    pref = cfg.half_cell / (math.sqrt(2.0 * math.pi) * cfg.gauss_width)
    i0 = _z_overlap_cached(n_max, half_width, 0.0, cfg.gauss_width, pref, tol)
    i1 = _z_overlap_cached(n_max, half_width, -cfg.offset_z, cfg.gauss_width, pref, tol)
    return i0, i1


def channel_matrix_element(cfg: LatticeConfig, region, nu1: int, n1: int, nu2: int, n2: int, channel=None) -> complex:
    """Potential matrix element <nu1, n1| V |nu2, n2> inside one channel.

    The element is identical in every Bloch channel: the x plane waves differ
    only through the conserved channel momentum, which cancels.  Coupling in
    the lattice direction goes through the (nu1 - nu2)-th theta Fourier
    coefficient ``q^{(nu1-nu2)^2}``; the asymmetric line additionally carries
    the phase ``exp(-i (nu1-nu2) pi offset_x / a)``.
    """
    if n1 < 0 or n2 < 0:
        raise ValueError("transverse indices must be non-negative")
    i0, i1 = z_overlap_tables(cfg, region.half_width, max(n1, n2))
    d = nu1 - nu2
    q = cfg.nome
    val = -(cfg.well_depth / 2.0) * q ** (d * d) * i0[n1, n2]
    if cfg.asymmetry != 0.0:
        phase = np.exp(-1j * d * np.pi * cfg.offset_x / cfg.half_cell)
        val = val - cfg.asymmetry * (cfg.well_depth / 2.0) * q ** (d * d) * phase * i1[n1, n2]
    return complex(val)


def potential_block(cfg: LatticeConfig, region):
    """Full potential matrix over the (nu, n) product basis.

    Index layout is nu-major: row (nu, n) sits at ``(nu + M) * (n_max + 1) + n``.
    Returns a complex Hermitian array; it is real symmetric when asymmetry=0.
    """
    M = region.fourier_cutoff
    n_max = region.transverse_cutoff
    nb = n_max + 1
    nv = 2 * M + 1
    i0, i1 = z_overlap_tables(cfg, region.half_width, n_max)
    q = cfg.nome
    out = np.zeros((nv * nb, nv * nb), dtype=complex)
    for iv in range(nv):
        for jv in range(nv):
            d = (iv - M) - (jv - M)
            blk = -(cfg.well_depth / 2.0) * q ** (d * d) * i0
            if cfg.asymmetry != 0.0:
                phase = np.exp(-1j * d * np.pi * cfg.offset_x / cfg.half_cell)
                blk = blk + (
                    -cfg.asymmetry * (cfg.well_depth / 2.0) * q ** (d * d) * phase
                ) * i1
            out[iv * nb : (iv + 1) * nb, jv * nb : (jv + 1) * nb] = blk
    return out
