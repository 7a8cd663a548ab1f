"""Grids, scatterer fields, the Gaussian phantoms and the conversion between
scattering potential and sound-speed contrast.

The scattering potential is ``v(r, omega) = omega^2 (1/c0^2 - 1/c(r)^2)``.
"""

import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np

from .background import Wavenumber
from .errors import (
    FrequencyMismatchError,
    GridMismatchError,
    NonphysicalScattererError,
    PhantomDomainError,
)

Point = Tuple[float, float]


@dataclass(frozen=True)
class Grid2D:
    """Cartesian grid of square cells of side ``h``.

    ``origin`` is the centre of cell ``(0, 0)``; cell ``(ix, iy)`` sits at
    ``origin + h * (ix, iy)``. When ``radius`` is set only cells whose centre
    lies within that distance of ``center`` take part in the computation
    (the scattering domain); the rest carry zeros.
    """

    origin: Point
    nx: int
    ny: int
    h: float
    radius: Optional[float] = None
    center: Point = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs at least one cell per axis")
        if not self.h > 0:
            raise ValueError(f"cell size must be positive, got {self.h}")
        if self.radius is not None and not self.radius > 0:
            raise ValueError("mask radius must be positive")
        if not self.mask.any():
            raise ValueError("grid mask selects no cells")

    @classmethod
    def centered(cls, n, h, radius=None):
        """``n x n`` cells centred on the origin."""
        o = -0.5 * (n - 1) * h
        return cls(origin=(o, o), nx=n, ny=n, h=h, radius=radius)

    @classmethod
    def default(cls, wavelength=8.0):
        """60 x 60 cells of ``wavelength/8`` masked to a disk of ``3.5`` wavelengths."""
        return cls.centered(60, wavelength / 8.0, radius=3.5 * wavelength)

    @cached_property
    def xs(self):
        return self.origin[0] + self.h * np.arange(self.nx)

    @cached_property
    def ys(self):
        return self.origin[1] + self.h * np.arange(self.ny)

    @cached_property
    def mask(self):
        X, Y = np.meshgrid(self.xs, self.ys, indexing="ij")
        if self.radius is None:
            return np.ones((self.nx, self.ny), dtype=bool)
        return np.hypot(X - self.center[0], Y - self.center[1]) <= self.radius

    @cached_property
    def index(self):
        """Integer ``(ix, iy)`` of every active cell, row-major order."""
        return np.argwhere(self.mask)

    @cached_property
    def points(self):
        """Centres of the active cells, shape ``(N, 2)``."""
        ix, iy = self.index.T
        return np.stack([self.xs[ix], self.ys[iy]], axis=-1)

    @property
    def n_active(self):
        return len(self.index)

    @property
    def cell_area(self):
        return self.h * self.h

    @property
    def max_extent(self):
        """Largest distance from the origin reached by any active cell."""
        corners = np.abs(self.points) + 0.5 * self.h
        return float(np.max(np.hypot(corners[:, 0], corners[:, 1])))

    def scatter(self, active_values):
        """Place active-cell values into a full ``(nx, ny)`` array."""
        a = np.asarray(active_values)
        out = np.zeros((self.nx, self.ny), dtype=a.dtype)
        out[self.mask] = a
        return out

    def gather(self, full_values):
        return np.asarray(full_values)[self.mask]

    def check_inside_ring(self, R0):
        if self.max_extent >= R0:
            raise ValueError(
                f"grid reaches {self.max_extent:.3f} l.s.u. from the centre, "
                f"not strictly inside the ring of radius {R0}"
            )

    def check_resolution(self, k_max):
        lam = 2.0 * np.pi / k_max
        if self.h > lam / 4:
            warnings.warn(
                f"cell size {self.h} exceeds a quarter of the shortest wavelength {lam:.3f}",
                stacklevel=2,
            )


@dataclass(frozen=True, eq=False)
class ScattererField:
    """Scattering potential on a grid, ``values[ix, iy]`` in 1/l.s.u.^2.

    ``k`` is the wavenumber the potential refers to (``v`` scales with
    ``omega^2`` for a fixed sound-speed map).
    """

    grid: Grid2D
    values: np.ndarray
    k: Wavenumber

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.grid.nx, self.grid.ny):
            raise GridMismatchError(
                f"values shape {vals.shape} does not match grid {(self.grid.nx, self.grid.ny)}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("scatterer values must be finite")
        vals = np.where(self.grid.mask, vals, 0.0)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid, k):
        return cls(grid, np.zeros((grid.nx, grid.ny), dtype=complex), k)

    @classmethod
    def from_active(cls, grid, active_values, k):
        return cls(grid, grid.scatter(np.asarray(active_values, dtype=complex)), k)

    @property
    def omega(self):
        return self.k.omega

    @property
    def active(self):
        return self.grid.gather(self.values)

    def at_frequency(self, k):
        """Same sound-speed map at another frequency: ``v`` scales as ``omega^2``."""
        if k.c0 != self.k.c0:
            raise FrequencyMismatchError("background sound speed differs")
        return ScattererField(self.grid, self.values * (k.omega / self.k.omega) ** 2, k)

    def normalized(self):
        """``v / omega^2``, frequency independent for pure sound-speed scatterers."""
        return self.values / self.k.omega**2

    def cross_section(self, y=0.0):
        """Values along the grid row closest to ``y``; returns ``(x, v)``."""
        iy = int(np.argmin(np.abs(self.grid.ys - y)))
        return self.grid.xs.copy(), self.values[:, iy].copy()


@dataclass(frozen=True)
class PhantomSpec:
    """Sum of Gaussian blobs ``A0 k0^2 sum_i w_i exp(-|r - c_i|^2 / s_i^2)``.

    ``squared_distance=False`` reproduces the literal printed exponent
    ``exp(-|r - c_i| / s_i^2)``.
    """

    A0: float
    centers: Tuple[Point, ...]
    widths: Tuple[float, ...]
    weights: Tuple[float, ...]
    variant: str = "custom"
    squared_distance: bool = True

    def __post_init__(self):
        n = len(self.centers)
        if not (len(self.widths) == n == len(self.weights)):
            raise ValueError("centers, widths and weights must have equal length")
        if any(not s > 0 for s in self.widths):
            raise ValueError("blob widths must be positive")

    @classmethod
    def two_blob(cls, A0, wavelength=8.0, **kw):
        lam = wavelength
        return cls(
            A0=A0,
            centers=((-10.0 / 8.0 * lam, 0.0), (0.0, 0.0)),
            widths=(0.8 * lam, 1.2 * lam),
            weights=(1.0, -0.5),
            variant="two-blob",
            **kw,
        )

    @classmethod
    def four_blob(cls, A0, wavelength=8.0, extra_weights=(-0.5, 0.5), **kw):
        lam = wavelength
        base = cls.two_blob(A0, wavelength)
        return cls(
            A0=A0,
            centers=base.centers + ((-11.0 / 8.0 * lam, 0.0), (0.25 * lam, 0.0)),
            widths=base.widths + (0.4 * lam, 0.4 * lam),
            weights=base.weights + tuple(extra_weights),
            variant="four-blob",
            **kw,
        )

    def shape(self, points):
        """Dimensionless profile (without ``A0 k0^2``) at ``points``."""
        pts = np.asarray(points, dtype=float)
        out = np.zeros(pts.shape[:-1])
        for c, s, w in zip(self.centers, self.widths, self.weights):
            d2 = np.sum((pts - np.asarray(c)) ** 2, axis=-1)
            d = d2 if self.squared_distance else np.sqrt(d2)
            out += w * np.exp(-d / s**2)
        return out

    def to_dict(self):
        return {
            "A0": self.A0,
            "centers": [list(c) for c in self.centers],
            "widths": list(self.widths),
            "weights": list(self.weights),
            "variant": self.variant,
            "squared_distance": self.squared_distance,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["centers"] = tuple(tuple(float(x) for x in c) for c in d["centers"])
        d["widths"] = tuple(float(x) for x in d["widths"])
        d["weights"] = tuple(float(x) for x in d["weights"])
        return cls(**d)


def _check_blob_support(spec, grid, level=1e-3):
    if grid.radius is None:
        reach = lambda c: min(  # noqa: E731
            c[0] - (grid.xs[0] - grid.h / 2),
            grid.xs[-1] + grid.h / 2 - c[0],
            c[1] - (grid.ys[0] - grid.h / 2),
            grid.ys[-1] + grid.h / 2 - c[1],
        )
    else:
        reach = lambda c: grid.radius - np.hypot(c[0] - grid.center[0], c[1] - grid.center[1])  # noqa: E731
    for c, s, w in zip(spec.centers, spec.widths, spec.weights):
        if w == 0 or spec.A0 == 0:
            continue
        d = reach(c)
        if d <= 0:
            raise PhantomDomainError(f"blob centre {c} lies outside the scattering domain")
        tail = d * d if spec.squared_distance else d
        if abs(w) * np.exp(-tail / s**2) > level:
            raise PhantomDomainError(
                f"blob at {c} (width {s}) exceeds {level:g} of its amplitude at the domain edge"
            )


def build_phantom(spec, k, grid):
    """Sample the phantom potential on ``grid`` at wavenumber ``k``."""
    _check_blob_support(spec, grid)
    vals = spec.A0 * k.k0**2 * spec.shape(grid.points)
    return ScattererField.from_active(grid, vals, k)


def v_to_speed_contrast(v):
    """Relative sound-speed contrast ``(c - c0)/c0`` per cell (real part of ``v``)."""
    rad = 1.0 - np.real(v.values) / v.k.k0**2
    if np.any(rad <= 0):
        raise NonphysicalScattererError("1/c0^2 - v/omega^2 must stay positive")
    return rad**-0.5 - 1.0


def speed_contrast_to_v(contrast, grid, k):
    """Inverse of :func:`v_to_speed_contrast`."""
    c = np.asarray(contrast, dtype=float)
    if np.any(c <= -1):
        raise NonphysicalScattererError("sound speed must stay positive")
    return ScattererField(grid, k.k0**2 * (1.0 - (1.0 + c) ** -2), k)


@dataclass(frozen=True, eq=False)
class AmplitudeGrid:
    """Scattering amplitude ``values[i, j] = f(phis[i], phis_prime[j])``.

    ``phis`` are incident directions (wave vector ``k``), ``phis_prime`` the
    scattered directions (``l``); both have length ``k0``.
    """

    phis: np.ndarray
    phis_prime: np.ndarray
    values: np.ndarray
    k: Wavenumber
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        p = np.asarray(self.phis, dtype=float)
        pp = np.asarray(self.phis_prime, dtype=float)
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (p.size, pp.size):
            raise GridMismatchError(f"values shape {vals.shape} != {(p.size, pp.size)}")
        for name, a in (("phis", p), ("phis_prime", pp)):
            if np.any(a < 0) or np.any(a >= 2 * np.pi):
                raise ValueError(f"{name} must lie in [0, 2pi)")
        object.__setattr__(self, "phis", p)
        object.__setattr__(self, "phis_prime", pp)
        object.__setattr__(self, "values", vals)

    @property
    def omega(self):
        return self.k.omega

    def with_values(self, values):
        return replace(self, values=np.asarray(values, dtype=complex))

    def same_support(self, other):
        return (
            self.phis.shape == other.phis.shape
            and self.phis_prime.shape == other.phis_prime.shape
            and np.allclose(self.phis, other.phis, rtol=0, atol=1e-12)
            and np.allclose(self.phis_prime, other.phis_prime, rtol=0, atol=1e-12)
            and np.isclose(self.k.omega, other.k.omega, rtol=1e-14, atol=0)
        )

    def check_same_support(self, other):
        if not self.same_support(other):
            raise GridMismatchError("amplitude grids differ in angles or frequency")

    def spatial_frequencies(self):
        """``xi = k - l`` for every sample, shape ``(n_phi, n_phi_prime, 2)``."""
        k0 = self.k.k0
        P = self.phis[:, None]
        Pp = self.phis_prime[None, :]
        return np.stack(
            [k0 * (np.cos(P) - np.cos(Pp)), k0 * (np.sin(P) - np.sin(Pp))], axis=-1
        )
