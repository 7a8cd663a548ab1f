"""Discrepancies, amplitude norm, phase shift, noise injection,
multifrequency averaging and profile feature matching."""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.signal import find_peaks

from .errors import GridMismatchError, ZeroDenominatorError
from .model import ScattererField


def _l2(values, weight=1.0):
    return float(np.sqrt(weight * np.sum(np.abs(values) ** 2)))


def solution_discrepancy(v_hat, v_true):
    """Relative L2 error ``||v_hat - v|| / ||v||`` over the grid cells."""
    if v_hat.grid != v_true.grid:
        raise GridMismatchError("solution discrepancy needs both fields on one grid")
    w = v_true.grid.cell_area
    den = _l2(v_true.values, w)
    if den == 0:
        raise ZeroDenominatorError("reference scatterer is identically zero")
    return _l2(v_hat.values - v_true.values, w) / den


def data_discrepancy(f_hat, f_meas):
    """Relative L2 misfit of two amplitude grids with uniform angular weights."""
    f_meas.check_same_support(f_hat)
    den = _l2(f_meas.values)
    if den == 0:
        raise ZeroDenominatorError("measured amplitude is identically zero")
    return _l2(f_hat.values - f_meas.values) / den


def amplitude_norm(f):
    """``sqrt(int int |f|^2 dphi dphi')`` with the uniform rule on ``[0, 2pi)^2``."""
    w = (2.0 * np.pi / f.phis.size) * (2.0 * np.pi / f.phis_prime.size)
    return _l2(f.values, w)


def phase_shift(contrast, grid, k, path, sign=None, step=None):
    """Extra phase ``k0 int (dc/c0) / (1 + dc/c0) dl`` along a straight path.

    ``contrast`` is the full ``(nx, ny)`` array of ``dc/c0`` (zeros outside
    the scattering domain); it is interpolated bilinearly. ``sign`` may be
    ``"positive"`` or ``"negative"`` to integrate only that part of the
    integrand, which is how the per-segment shifts of a two-signed profile
    are quoted. The composite trapezoid rule uses a step of at most
    ``step`` (default ``h/2``).
    """
    c = np.asarray(contrast, dtype=float)
    if c.shape != (grid.nx, grid.ny):
        raise GridMismatchError("contrast array does not match grid")
    step = 0.5 * grid.h if step is None else step
    a = np.asarray(path[0], dtype=float)
    b = np.asarray(path[1], dtype=float)
    length = float(np.linalg.norm(b - a))
    if length == 0:
        return 0.0
    n = max(1, int(np.ceil(length / step - 1e-12)))
    t = np.linspace(0.0, 1.0, n + 1)
    pts = a[None, :] + t[:, None] * (b - a)[None, :]
    interp = RegularGridInterpolator(
        (grid.xs, grid.ys), c, method="linear", bounds_error=False, fill_value=0.0
    )
    dc = interp(pts)
    g = dc / (1.0 + dc)
    if sign == "positive":
        g = np.where(g > 0, g, 0.0)
    elif sign == "negative":
        g = np.where(g < 0, g, 0.0)
    elif sign is not None:
        raise ValueError(f"sign must be None, 'positive' or 'negative', got {sign!r}")
    dl = length / n
    return float(k.k0 * dl * (np.sum(g) - 0.5 * (g[0] + g[-1])))


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian noise on the scattered ring data.

    The standard deviation of the real and of the imaginary part is
    ``level`` times the rms scattered field. Draws come from a PCG64 stream
    seeded with ``seed``.
    """

    level: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if not self.level >= 0:
            raise ValueError("noise level must be non-negative")

    def generator(self):
        return np.random.Generator(np.random.PCG64(self.seed))


def inject_noise(bf, spec, rng=None):
    """Return ``(noisy BoundaryFields, realised N/S)``.

    Draws are consumed row-major over (receiver, source) with the real part
    before the imaginary part. Pass a shared ``rng`` to continue one stream
    across several frequencies.
    """
    if spec.level == 0:
        return bf, 0.0
    rng = spec.generator() if rng is None else rng
    G_sc = bf.G_sc
    rms = np.sqrt(np.mean(np.abs(G_sc) ** 2))
    sigma = spec.level * rms
    z = rng.standard_normal(size=G_sc.shape + (2,))
    noise = sigma * (z[..., 0] + 1j * z[..., 1])
    ratio = _l2(noise) / _l2(G_sc) if rms > 0 else 0.0
    return bf.with_scattered(G_sc + noise), float(ratio)


def inject_noise_multi(bfs, spec):
    """Noise for a list of frequencies from one stream, frequency-major."""
    rng = spec.generator()
    out = [inject_noise(bf, spec, rng) for bf in bfs]
    return [o[0] for o in out], [o[1] for o in out]


def multifrequency_average(estimates, k_ref=None):
    """``omega_1^2 * mean_j v_hat_j / omega_j^2``; ``omega_1`` defaults to the
    lowest frequency present (or ``k_ref``). The result is tagged with that
    frequency."""
    estimates = list(estimates)
    if not estimates:
        raise ValueError("need at least one estimate")
    grid = estimates[0].grid
    for e in estimates[1:]:
        if e.grid != grid:
            raise GridMismatchError("multifrequency estimates live on different grids")
    ref = min(estimates, key=lambda e: e.k.omega).k if k_ref is None else k_ref
    acc = sum(e.values / e.k.omega**2 for e in estimates) / len(estimates)
    return ScattererField(grid, acc * ref.omega**2, ref)


def _extrema(x, y, sign):
    idx, props = find_peaks(sign * np.asarray(y, dtype=float), prominence=0)
    return np.asarray(x)[idx], props["prominences"]


def match_extrema(x, y_true, y_hat, targets, tol, min_fraction=0.5):
    """Check that a reconstructed profile reproduces selected local extrema.

    For every ``(x0, sign)`` in ``targets`` (``sign = +1`` for a maximum,
    ``-1`` for a minimum) the true extremum of that sign nearest ``x0`` is
    located; it is matched when ``y_hat`` has an extremum of the same sign
    within ``tol`` of it whose prominence is at least ``min_fraction`` of
    the true prominence. Returns one dict per target.
    """
    out = []
    for x0, sign in targets:
        tx, tp = _extrema(x, y_true, sign)
        if tx.size == 0:
            out.append({"target": x0, "sign": sign, "found_true": False, "matched": False})
            continue
        j = int(np.argmin(np.abs(tx - x0)))
        rx, rp = _extrema(x, y_hat, sign)
        near = np.abs(rx - tx[j]) <= tol
        best = int(np.argmax(np.where(near, rp, -np.inf))) if near.any() else None
        out.append(
            {
                "target": x0,
                "sign": sign,
                "found_true": True,
                "x_true": float(tx[j]),
                "prominence_true": float(tp[j]),
                "x_hat": None if best is None else float(rx[best]),
                "prominence_hat": None if best is None else float(rp[best]),
                "matched": best is not None and rp[best] >= min_fraction * tp[j],
            }
        )
    return out
