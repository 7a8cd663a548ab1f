"""Direct scattering by dense Lippmann-Schwinger collocation.

The potential is piecewise constant on the active grid cells. Off-diagonal
couplings are midpoint samples ``G0(|r_i - r_j|) h^2``; the self-cell
integral of ``G0`` is replaced by its closed form over the disk of equal
area (radius ``h / sqrt(pi)``). One LU factorisation of ``I - K diag(v)``
serves every right-hand side.
"""

import logging
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy import special

from .background import RingGeometry, Wavenumber, green0, ring_self_value
from .errors import FrequencyMismatchError, SingularSystemError
from .model import AmplitudeGrid, ScattererField

log = logging.getLogger(__name__)

COND_WARN = 1.0e8


@dataclass(frozen=True)
class Incidence:
    """Point source at ``position`` on the ring, or plane wave along ``phi``."""

    kind: str
    position: Optional[tuple] = None
    phi: Optional[float] = None

    def __post_init__(self):
        if self.kind == "point":
            if self.position is None:
                raise ValueError("point source needs a position")
        elif self.kind == "plane":
            if self.phi is None:
                raise ValueError("plane wave needs a direction")
        else:
            raise ValueError(f"unknown incidence kind {self.kind!r}")

    def field(self, points, k):
        pts = np.asarray(points, dtype=float)
        if self.kind == "point":
            return green0(pts, np.asarray(self.position, dtype=float), k)
        d = np.array([np.cos(self.phi), np.sin(self.phi)])
        return np.exp(1j * k.k0 * (pts @ d))


def point_sources(geom):
    return [Incidence("point", position=tuple(p)) for p in geom.points]


def plane_waves(phis):
    return [Incidence("plane", phi=float(p)) for p in phis]


def self_cell_integral(k, h):
    """``int G0 dA`` over the disk of radius ``a = h/sqrt(pi)`` centred on the
    singularity: ``(1 - (i pi / 2) k a H1(k a)) / k^2``."""
    a = h / np.sqrt(np.pi)
    ka = k.k0 * a
    h1 = special.hankel1(1, ka)
    return (1.0 - 0.5j * np.pi * ka * h1) / k.k0**2


@lru_cache(maxsize=2)
def coupling_matrix(grid, k):
    """``K[i, j] = int_cell_j G0(r_i, r') dr'`` between active cells."""
    idx = grid.index
    nx, ny = grid.nx, grid.ny
    dx, dy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    dist = grid.h * np.hypot(dx, dy)
    dist[0, 0] = 1.0
    table = -0.25j * special.hankel1(0, k.k0 * dist) * grid.cell_area
    table[0, 0] = self_cell_integral(k, grid.h)
    ax = np.abs(idx[:, 0][:, None] - idx[:, 0][None, :])
    ay = np.abs(idx[:, 1][:, None] - idx[:, 1][None, :])
    K = table[ax, ay]
    K.setflags(write=False)
    return K


def _check_frequency(v, k):
    if not np.isclose(v.k.omega, k.omega, rtol=1e-14, atol=0) or v.k.c0 != k.c0:
        raise FrequencyMismatchError(
            f"scatterer built for omega={v.k.omega}, solver asked for omega={k.omega}"
        )


class LSSystem:
    """Factorised Lippmann-Schwinger operator ``I - K diag(v)`` for one (v, k)."""

    def __init__(self, v, k):
        _check_frequency(v, k)
        self.v = v
        self.k = k
        self.grid = v.grid
        self.K = coupling_matrix(v.grid, k)
        self.vact = v.active
        A = np.eye(self.grid.n_active, dtype=complex) - self.K * self.vact[None, :]
        anorm = np.abs(A).sum(axis=0).max()
        with warnings.catch_warnings():
            warnings.simplefilter("error", sla.LinAlgWarning)
            try:
                self.lu = sla.lu_factor(A, overwrite_a=True, check_finite=False)
            except (sla.LinAlgWarning, sla.LinAlgError) as exc:
                raise SingularSystemError(f"Lippmann-Schwinger matrix is singular: {exc}") from exc
        rcond, info = sla.lapack.zgecon(self.lu[0], anorm, norm="1")
        self.condition = np.inf if rcond == 0 else 1.0 / rcond
        # rcond alone misses tiny systems, where it is 1 whatever the scale
        scale = 1.0 + np.abs(self.K * self.vact[None, :]).sum(axis=0).max()
        pivot = np.abs(np.diag(self.lu[0])).min() / scale
        if not np.isfinite(self.condition) or min(rcond, pivot) < np.finfo(float).eps:
            raise SingularSystemError(
                f"Lippmann-Schwinger matrix is singular (cond ~ {self.condition:.3g})",
                condition=self.condition,
            )
        if self.condition > COND_WARN:
            warnings.warn(f"ill-conditioned Lippmann-Schwinger system, cond ~ {self.condition:.3g}")
        log.debug("LS system n=%d cond=%.3g", self.grid.n_active, self.condition)

    def solve(self, rhs):
        return sla.lu_solve(self.lu, rhs, check_finite=False)

    def apply(self, u):
        """``u - K diag(v) u`` (for residual checks)."""
        return u - self.K @ (self.vact[:, None] * u)


@dataclass(frozen=True, eq=False)
class InternalFields:
    """Total fields on the active cells, one column per incidence."""

    values: np.ndarray
    incident: np.ndarray
    incidences: tuple
    v: ScattererField
    k: Wavenumber
    condition: float = np.nan

    def residual(self):
        """Relative residual of ``u = u0 + K v u`` per column."""
        K = coupling_matrix(self.v.grid, self.k)
        r = self.values - self.incident - K @ (self.v.active[:, None] * self.values)
        return np.linalg.norm(r, axis=0) / np.linalg.norm(self.incident, axis=0)


def solve_internal_fields(v, incidences, k, system=None):
    """Solve the volume equation for every incidence with one factorisation."""
    incidences = tuple(incidences)
    pts = v.grid.points
    u0 = np.stack([inc.field(pts, k) for inc in incidences], axis=1)
    if not np.any(v.active):
        _check_frequency(v, k)
        return InternalFields(u0.copy(), u0, incidences, v, k, 1.0)
    if system is None:
        system = LSSystem(v, k)
    u = system.solve(u0)
    return InternalFields(u, u0, incidences, v, k, system.condition)


@dataclass(frozen=True, eq=False)
class BoundaryFields:
    """Ring measurements ``G[m, n] = G(y_m, x_n)``; receiver m, source n.

    ``G_sc = G - G0`` is stored exactly. The diagonal of ``G0`` (coincident
    emitter and receiver) holds the arc-averaged value from
    :func:`~tomolab.background.ring_self_value`.
    """

    G_sc: np.ndarray
    G0: np.ndarray
    k: Wavenumber
    geom: RingGeometry

    @property
    def G(self):
        return self.G0 + self.G_sc

    @property
    def omega(self):
        return self.k.omega

    def with_scattered(self, G_sc):
        return BoundaryFields(np.asarray(G_sc, dtype=complex), self.G0, self.k, self.geom)


def ring_green_matrix(k, geom):
    """Sampled ``G0(y_m, y_n)`` with the arc-averaged self value on the diagonal."""
    pts = geom.points
    M = geom.M
    G0 = np.empty((M, M), dtype=complex)
    off = ~np.eye(M, dtype=bool)
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.linalg.norm(diff, axis=-1)[off]
    G0[off] = -0.25j * special.hankel1(0, k.k0 * d)
    G0[np.eye(M, dtype=bool)] = ring_self_value(k, geom)
    return G0


def boundary_fields(v, internal, k, geom):
    """Ring values of the point-source responses from the surface equation."""
    _check_frequency(v, k)
    if internal.values.shape[1] != geom.M:
        raise ValueError("internal fields must hold one column per ring source")
    grid = v.grid
    Gyr = green0(geom.points[:, None, :], grid.points[None, :, :], k)
    G_sc = (Gyr * (v.active * grid.cell_area)[None, :]) @ internal.values
    return BoundaryFields(G_sc, ring_green_matrix(k, geom), k, geom)


def scattering_amplitude_direct(v, internal, phis, phis_prime, k):
    """``f(k, l) = (2 pi)^-2 sum_r exp(-i l.r) v(r) u(r, k) h^2``."""
    _check_frequency(v, k)
    phis = np.asarray(phis, dtype=float)
    phis_prime = np.asarray(phis_prime, dtype=float)
    if internal.values.shape[1] != phis.size:
        raise ValueError("internal fields must hold one plane wave per incident angle")
    pts = v.grid.points
    ell = np.stack([np.cos(phis_prime), np.sin(phis_prime)], axis=-1)
    EL = np.exp(-1j * k.k0 * (pts @ ell.T))
    src = (v.active * v.grid.cell_area)[:, None] * internal.values
    f = (src.T @ EL) / (2.0 * np.pi) ** 2
    return AmplitudeGrid(phis, phis_prime, f, k)


def simulate_ring(v, geom, k=None, system=None):
    """Measurements for all ``M`` ring sources: solve, then evaluate on the ring."""
    k = v.k if k is None else k
    internal = solve_internal_fields(v, point_sources(geom), k, system=system)
    return boundary_fields(v, internal, k, geom)


def forward_amplitude(v, phis, phis_prime=None, k=None, system=None):
    """Scattering amplitude of ``v`` on the given angle grid via the volume integral."""
    k = v.k if k is None else k
    phis = np.asarray(phis, dtype=float)
    phis_prime = phis if phis_prime is None else phis_prime
    internal = solve_internal_fields(v, plane_waves(phis), k, system=system)
    return scattering_amplitude_direct(v, internal, phis, phis_prime, k)


def scattered_field(v, internal, points, k):
    """Scattered field ``sum_r G0(z, r) v(r) u(r) h^2`` at exterior ``points``."""
    Gzr = green0(np.asarray(points)[:, None, :], v.grid.points[None, :, :], k)
    return (Gzr * (v.active * v.grid.cell_area)[None, :]) @ internal.values
