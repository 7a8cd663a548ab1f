"""Homogeneous background: cylinder functions, the 2D free-space Green's
function and its angular spectra on a circle of transducers.

Time dependence is ``exp(-i omega t)`` throughout, so outgoing waves use the
Hankel function of the first kind.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, special

from .errors import CylinderOverflowError, DomainError, SingularityError

Q_MAX = 64
X_MAX = 1.0e4
EPS_SEP = 1.0e-12


@dataclass(frozen=True)
class Wavenumber:
    """Background wavenumber ``k0 = omega / c0``."""

    omega: float
    c0: float = 1.0
    k0: float = field(init=False)

    def __post_init__(self):
        if not (self.omega > 0 and np.isfinite(self.omega)):
            raise ValueError(f"omega must be positive and finite, got {self.omega}")
        if not (self.c0 > 0 and np.isfinite(self.c0)):
            raise ValueError(f"c0 must be positive and finite, got {self.c0}")
        object.__setattr__(self, "k0", self.omega / self.c0)

    @classmethod
    def from_wavelength(cls, wavelength, c0=1.0):
        return cls(omega=2.0 * np.pi * c0 / wavelength, c0=c0)

    @property
    def wavelength(self):
        return 2.0 * np.pi / self.k0

    def scaled(self, factor):
        """Same medium at ``factor`` times the frequency."""
        return Wavenumber(omega=self.omega * factor, c0=self.c0)


@dataclass(frozen=True)
class RingGeometry:
    """``M`` equispaced transducers on a circle of radius ``R0``."""

    R0: float
    M: int

    def __post_init__(self):
        if not (self.R0 > 0 and np.isfinite(self.R0)):
            raise ValueError(f"R0 must be positive and finite, got {self.R0}")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")

    @property
    def dphi(self):
        return 2.0 * np.pi / self.M

    @property
    def angles(self):
        return self.dphi * np.arange(self.M)

    @property
    def points(self):
        a = self.angles
        return self.R0 * np.stack([np.cos(a), np.sin(a)], axis=-1)

    @property
    def nyquist(self):
        """Largest harmonic order resolved without aliasing, ``M/2 - 1``."""
        return self.M // 2 - 1


def _check_order(q, q_max):
    q = np.asarray(q)
    if np.any(q != np.round(q)):
        raise ValueError("cylinder function order must be an integer")
    if np.any(np.abs(q) > q_max):
        raise ValueError(f"|q| exceeds Q_max={q_max}")
    return q.astype(int)


def cylinder_functions(q, x, q_max=Q_MAX):
    """Bessel functions of the first and second kind, ``(J_q(x), Y_q(x))``.

    Vectorised over broadcastable ``q`` and ``x``. Raises
    :class:`DomainError` for ``x <= 0`` or ``x > 1e4`` and
    :class:`CylinderOverflowError` when ``Y_q`` is not representable.
    """
    q = _check_order(q, q_max)
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise DomainError("cylinder functions need 0 < x")
    if np.any(x > X_MAX):
        raise DomainError(f"cylinder functions need x <= {X_MAX:g}")
    j = special.jv(q, x)
    y = special.yv(q, x)
    if np.any(~np.isfinite(y)):
        raise CylinderOverflowError(f"Y_q(x) overflows for some |q| <= {np.abs(q).max()}")
    if np.ndim(j) == 0:
        return float(j), float(y)
    return j, y


def hankel1(q, x, q_max=Q_MAX):
    j, y = cylinder_functions(q, x, q_max)
    return j + 1j * y


def green0(r, x, k):
    """Free-space Green's function ``-(i/4) H0(k |r - x|)``.

    ``r`` and ``x`` are points (or broadcastable arrays of points, last axis
    of length 2). Satisfies ``(lap + k0^2) G0 = delta``.
    """
    d = np.linalg.norm(np.asarray(r, dtype=float) - np.asarray(x, dtype=float), axis=-1)
    if np.any(d < EPS_SEP):
        raise SingularityError("green0 evaluated at coincident points; use the self-cell rule")
    kd = k.k0 * d
    return -0.25j * (special.j0(kd) + 1j * special.y0(kd))


def green0_double_spectrum(q, k, geom, q_max=Q_MAX):
    """Diagonal value ``g(q) = -(i/4) H_q(k0 R0) J_q(k0 R0)`` of the double
    angular spectrum of ``G0`` on the ring (nonzero only at ``q_x = -q_y``)."""
    j, y = cylinder_functions(q, k.k0 * geom.R0, q_max)
    return -0.25j * (j + 1j * y) * j


def planewave_spectrum(q, phi, k, geom, q_max=Q_MAX):
    """Angular spectrum ``i^q J_q(k0 R0) exp(-i q phi)`` of ``exp(i k.y)`` on
    the ring, for a plane wave travelling in direction ``phi``."""
    q = _check_order(q, q_max)
    j, _ = cylinder_functions(q, k.k0 * geom.R0, q_max)
    return (1j ** (q % 4)) * j * np.exp(-1j * q * np.asarray(phi, dtype=float))


def ring_self_value(k, geom):
    """Arc average of ``G0(y, y')`` over one transducer spacing centred on ``y``.

    Used as the finite diagonal of sampled ring matrices, where the point
    value is infinite.
    """
    half = 0.5 * geom.dphi

    def chord(s):
        return 2.0 * geom.R0 * np.sin(0.5 * abs(s))

    def part(fn):
        val, _ = integrate.quad(lambda s: fn(k.k0 * chord(s)), 0.0, half, limit=200)
        return val / half

    return -0.25j * (part(special.j0) + 1j * part(special.y0))


@dataclass(frozen=True)
class RingSpectra:
    """Cached analytic spectra for one (wavenumber, ring) pair, ``|q| <= Q``."""

    k: Wavenumber
    geom: RingGeometry
    Q: int

    @cached_property
    def orders(self):
        return np.arange(-self.Q, self.Q + 1)

    @cached_property
    def g(self):
        return green0_double_spectrum(self.orders, self.k, self.geom)

    def planewave(self, phis):
        """Matrix ``[q, phi]`` of plane-wave spectra."""
        return planewave_spectrum(self.orders[:, None], np.asarray(phis)[None, :], self.k, self.geom)
