"""Scatterer reconstruction from scattering amplitudes.

The spectral estimate ``v~(xi)`` lives on the samples ``xi = k - l`` of the
incident/scattered angle grid. It is seeded with the Born estimate
``v~ = f``, taken to the coordinate domain by Fourier synthesis over the
disk ``|xi| <= 2 tau k0`` and refined with ``v~ += f - f(v)``, where
``f(v)`` is the amplitude predicted by the forward solver.
"""

import logging
import time
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .errors import GridMismatchError
from .forward import BoundaryFields, LSSystem, forward_amplitude, simulate_ring
from .metrics import multifrequency_average, solution_discrepancy
from .model import AmplitudeGrid, ScattererField
from .near2far import TruncationPolicy, near_to_far

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SpectralEstimate:
    """``values[i, j] = v~(k(phis[i]) - l(phis_prime[j]))``."""

    phis: np.ndarray
    phis_prime: np.ndarray
    values: np.ndarray
    k: object

    @classmethod
    def from_amplitude(cls, f):
        return cls(f.phis, f.phis_prime, np.array(f.values, dtype=complex), f.k)

    def as_amplitude(self):
        return AmplitudeGrid(self.phis, self.phis_prime, self.values, self.k)

    def spatial_frequencies(self):
        return self.as_amplitude().spatial_frequencies()

    def same_support(self, f):
        return self.as_amplitude().same_support(f)


def born_estimate(f):
    """Born seed: the amplitude samples relabelled as spectrum samples."""
    return SpectralEstimate.from_amplitude(f)


def _uniform_step(angles):
    n = angles.size
    ref = 2.0 * np.pi * np.arange(n) / n
    if not np.allclose(angles, ref, rtol=0, atol=1e-12):
        raise GridMismatchError("Fourier synthesis needs the full equispaced angle grid")
    return 2.0 * np.pi / n


def jacobian_weights(M, k0, rule="corrected"):
    """Quadrature weights ``W[i, j]`` for ``int_{B_2k0} F(xi) dxi`` on the
    ``M x M`` equispaced ``(phi, phi')`` grid.

    The area element is ``k0^2 |sin(phi - phi')| dphi dphi'`` and the torus
    covers the disk twice, hence the factor 1/2. The weight depends only on
    ``d = phi - phi'``. The ``"corrected"`` rule adds the endpoint term
    ``dphi^2 / 6`` at the kinks ``d = 0`` and ``d = pi`` of ``|sin d|``,
    raising the rule from second to fourth order; ``"plain"`` is the bare
    trapezoid.
    """
    dphi = 2.0 * np.pi / M
    wd = dphi * np.abs(np.sin(dphi * np.arange(M)))
    if rule == "corrected":
        wd[0] = dphi**2 / 6.0
        if M % 2 == 0:
            wd[M // 2] = dphi**2 / 6.0
    elif rule != "plain":
        raise ValueError(f"unknown quadrature rule {rule!r}")
    d = (np.arange(M)[:, None] - np.arange(M)[None, :]) % M
    return 0.5 * k0**2 * dphi * wd[d]


def _plane_factors(grid, k, M):
    """``exp(-i k0 d(phi_i) . r)`` for the ``M`` ring directions (rows) and active cells."""
    phis = 2.0 * np.pi * np.arange(M) / M
    d = np.stack([np.cos(phis), np.sin(phis)], axis=-1)
    return np.exp(-1j * k.k0 * (d @ grid.points.T))


def rim_factors(M, tau):
    """Quadrature factors for truncating the offset rule at ``|xi| = 2 tau k0``.

    Both the area element and ``|xi| = 2 k0 |sin(d/2)|`` depend only on the
    offset ``d = phi - phi'``, so the disk becomes ``|d| <= 2 arcsin(tau)``.
    Samples strictly inside count fully; the last sample inside and the first
    outside get the trapezoid weights of the linear interpolant up to the
    rim, which keeps the truncated rule second order for any ``tau``.
    """
    dphi = 2.0 * np.pi / M
    j = np.arange(M)
    d = np.minimum(j, M - j) * dphi
    if tau >= 1:
        return np.ones(M)
    dstar = 2.0 * np.arcsin(tau)
    J = int(np.floor(dstar / dphi + 1e-9))
    t = max(dstar / dphi - J, 0.0)
    step = np.rint(d / dphi).astype(int)
    m = (step < J).astype(float)
    m[step == J] = 0.5 + t - 0.5 * t * t
    m[step == J + 1] = 0.5 * t * t
    return m


def disk_mask(sv, tau):
    """Factors realising the indicator of ``|xi| <= 2 tau k0`` on the
    ``(phi, phi')`` samples (see :func:`rim_factors`)."""
    _uniform_step(sv.phis)
    M = sv.phis.size
    d = (np.arange(M)[:, None] - np.arange(M)[None, :]) % M
    return rim_factors(M, tau)[d]


def disk_inverse_fourier(sv, tau, grid, rule="corrected"):
    """``v(r) = int_{|xi| <= 2 tau k0} exp(-i xi.r) v~(xi) dxi`` on the grid cells."""
    if not 0 < tau <= 1:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    _uniform_step(sv.phis)
    if sv.phis_prime.size != sv.phis.size or not np.allclose(sv.phis, sv.phis_prime):
        raise GridMismatchError("incident and scattered angle grids must coincide")
    M = sv.phis.size
    W = jacobian_weights(M, sv.k.k0, rule)
    if tau < 1:
        W = W * disk_mask(sv, tau)
    # exp(-i xi.r) factorises into an incident and a scattered plane wave
    A = _plane_factors(grid, sv.k, M)
    vals = np.sum(A * ((W * sv.values) @ A.conj()), axis=0)
    return ScattererField.from_active(grid, vals, sv.k)


def born_forward(v, phis, phis_prime=None):
    """First-Born amplitude ``(2pi)^-2 sum_r exp(i xi.r) v(r) h^2`` (linear in ``v``)."""
    phis = np.asarray(phis, dtype=float)
    phis_prime = phis if phis_prime is None else np.asarray(phis_prime, dtype=float)
    k0 = v.k.k0
    xi = np.stack(
        [
            np.cos(phis)[:, None] - np.cos(phis_prime)[None, :],
            np.sin(phis)[:, None] - np.sin(phis_prime)[None, :],
        ],
        axis=-1,
    )
    phase = np.exp(1j * k0 * (xi.reshape(-1, 2) @ v.grid.points.T))
    f = phase @ (v.active * v.grid.cell_area) / (2.0 * np.pi) ** 2
    return AmplitudeGrid(phis, phis_prime, f.reshape(phis.size, phis_prime.size), v.k)


def iterative_step(sv_prev, f_meas, f_prev):
    """``v~(n) = v~(n-1) + f - f(n-1)``."""
    if not (sv_prev.same_support(f_meas) and sv_prev.same_support(f_prev)):
        raise GridMismatchError("spectral estimate and amplitudes must share angles and frequency")
    return replace(sv_prev, values=sv_prev.values + f_meas.values - f_prev.values)


@dataclass(frozen=True)
class TauSchedule:
    """Filter radius schedule for the Fourier synthesis.

    In adaptive mode a rise of the data misfit shrinks ``tau`` by ``shrink``
    (not below ``tau_min``) and asks for a revert to the best iterate; a
    relative change below ``stagnation`` over ``window`` steps at the current
    level grows ``tau`` by ``step`` (capped at 1).
    """

    tau0: float = 0.5
    step: float = 0.1
    shrink: float = 0.8
    window: int = 3
    stagnation: float = 0.01
    tau_min: float = 0.2
    mode: str = "adaptive"

    def __post_init__(self):
        if self.mode not in ("fixed", "adaptive"):
            raise ValueError(f"unknown tau mode {self.mode!r}")
        if not 0 < self.tau0 <= 1:
            raise ValueError("tau0 must lie in (0, 1]")
        if not 0 < self.tau_min <= 1:
            raise ValueError("tau_min must lie in (0, 1]")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink factor must lie in (0, 1)")
        if self.window < 1:
            raise ValueError("stagnation window must be at least 1")

    @classmethod
    def fixed(cls, tau=1.0):
        return cls(tau0=tau, mode="fixed", tau_min=min(tau, 0.2))


class TauController:
    """Stateful form of :func:`tau_update`; feed it the growing misfit history."""

    def __init__(self, sched):
        self.sched = sched
        self.tau = sched.tau0
        self.level_start = 0

    def update(self, history):
        s = self.sched
        n = len(history) - 1
        if s.mode == "fixed" or n < 1:
            return self.tau, False
        if history[-1] > history[-2]:
            self.tau = max(self.tau * s.shrink, s.tau_min)
            self.level_start = n
            return self.tau, True
        if n - self.level_start >= s.window:
            old = history[-1 - s.window]
            if old > 0 and abs(history[-1] - old) / old < s.stagnation and self.tau < 1:
                self.tau = min(self.tau + s.step, 1.0)
                self.level_start = n
        return self.tau, False


def tau_update(sched, history):
    """``tau`` after processing the misfit ``history`` from the start.

    A pure function of the schedule and history: it replays
    :class:`TauController` over every prefix.
    """
    if sched.mode == "fixed":
        return sched.tau0
    if len(history) == 0:
        raise ValueError("adaptive tau update needs a non-empty history")
    ctl = TauController(sched)
    for i in range(1, len(history) + 1):
        ctl.update(history[:i])
    return ctl.tau


@dataclass(frozen=True)
class InversionConfig:
    """Iteration controls.

    ``f_source`` selects how the amplitude of the current estimate is
    predicted: ``"direct"`` uses the volume integral with plane-wave fields,
    ``"boundary"`` simulates ring data and converts them like measurements.
    ``project_real`` keeps only the real part of every synthesised estimate,
    which is exact prior knowledge for lossless sound-speed scatterers.
    """

    tau: TauSchedule = field(default_factory=TauSchedule)
    n_max: int = 60
    stop_delta_f: float = 1e-8
    f_source: str = "direct"
    quadrature: str = "corrected"
    truncation: TruncationPolicy = field(default_factory=TruncationPolicy)
    diverge_steps: int = 2
    project_real: bool = True

    def __post_init__(self):
        if self.f_source not in ("direct", "boundary"):
            raise ValueError(f"unknown f_source {self.f_source!r}")
        if self.n_max < 0:
            raise ValueError("n_max must be non-negative")


@dataclass
class IterationRecord:
    n: int
    v_hat: ScattererField
    delta_f: float
    tau: float
    delta_v: Optional[float] = None
    imag_ratio: float = 0.0
    seconds: float = 0.0
    reverted: bool = False


@dataclass
class ReconstructionTrace:
    """Per-iteration history of one reconstruction.

    ``records[n]`` holds the estimate synthesised from ``v~(n)``; record 0 is
    the seed. ``best`` indexes the record with the smallest data misfit,
    which is also the returned estimate.
    """

    records: List[IterationRecord] = field(default_factory=list)
    status: str = "max-iter"
    f_meas: Optional[AmplitudeGrid] = None
    born: Optional[ScattererField] = None
    born_delta_v: Optional[float] = None
    born_delta_f: Optional[float] = None

    @property
    def best(self):
        return int(np.argmin([r.delta_f for r in self.records]))

    @property
    def final(self):
        return self.records[self.best].v_hat

    @property
    def final_record(self):
        return self.records[self.best]

    @property
    def delta_f(self):
        return [r.delta_f for r in self.records]

    @property
    def delta_v(self):
        return [r.delta_v for r in self.records]

    @property
    def taus(self):
        return [r.tau for r in self.records]


def _imag_ratio(v):
    den = np.linalg.norm(v.values)
    return float(np.linalg.norm(v.values.imag) / den) if den > 0 else 0.0


def _synthesise(sv, tau, grid, cfg):
    v = disk_inverse_fourier(sv, tau, grid, cfg.quadrature)
    ratio = _imag_ratio(v)
    if cfg.project_real:
        v = ScattererField(grid, v.values.real, v.k)
    return v, ratio


class AmplitudePredictor:
    """Scattering amplitude of a trial scatterer on the measurement angles."""

    def __init__(self, f_meas, geom=None, mode="direct", truncation=TruncationPolicy()):
        self.f_meas = f_meas
        self.geom = geom
        self.mode = mode
        self.truncation = truncation
        if mode == "boundary" and geom is None:
            raise ValueError("boundary mode needs the ring geometry")

    def __call__(self, v):
        f = self.f_meas
        if not np.any(v.active):
            return f.with_values(np.zeros_like(f.values))
        system = LSSystem(v, f.k)
        if self.mode == "direct":
            return forward_amplitude(v, f.phis, f.phis_prime, system=system)
        bf = simulate_ring(v, self.geom, system=system)
        return near_to_far(bf, f.phis, f.phis_prime, self.truncation)


def _pooled_misfit(f_preds, f_meas):
    num = sum(np.sum(np.abs(p.values - m.values) ** 2) for p, m in zip(f_preds, f_meas))
    den = sum(np.sum(np.abs(m.values) ** 2) for m in f_meas)
    return float(np.sqrt(num / den))


def _combine(fields, k_ref):
    if len(fields) == 1:
        return fields[0]
    return multifrequency_average(fields, k_ref)


def reconstruct(f_meas, grid, cfg=InversionConfig(), v_true=None, geom=None, seed=None, callback=None):
    """Iterate from amplitude data; see :func:`run_reconstruction`.

    ``f_meas`` is one :class:`AmplitudeGrid` or a list of them at several
    frequencies of one sound-speed scatterer. With several frequencies each
    step synthesises one estimate per frequency and averages
    ``v_hat_j / omega_j^2``; the average, rescaled to every frequency, drives
    the next amplitude predictions. Estimates and ``v_true`` refer to the
    lowest frequency. The data misfit pools all frequencies.
    """
    f_list = [f_meas] if isinstance(f_meas, AmplitudeGrid) else list(f_meas)
    if not f_list:
        raise ValueError("need amplitude data at one frequency at least")
    k_ref = min((f.k for f in f_list), key=lambda k: k.omega)
    trace = ReconstructionTrace(f_meas=f_meas)
    if v_true is not None and v_true.grid != grid:
        raise GridMismatchError("true scatterer must live on the reconstruction grid")
    if v_true is not None and not np.any(v_true.values):
        v_true = None
    dv = (lambda v: solution_discrepancy(v, v_true)) if v_true is not None else (lambda v: None)
    predictors = [AmplitudePredictor(f, geom, cfg.f_source, cfg.truncation) for f in f_list]

    if not any(np.any(f.values) for f in f_list):
        zero = ScattererField.zeros(grid, k_ref)
        trace.records.append(IterationRecord(0, zero, 0.0, cfg.tau.tau0, dv(zero)))
        trace.status = "converged"
        trace.born = zero
        trace.born_delta_v = dv(zero)
        trace.born_delta_f = 0.0
        return trace

    def synthesise(svs, tau):
        parts = [_synthesise(sv, tau, grid, cfg) for sv in svs]
        v = _combine([p[0] for p in parts], k_ref)
        return v, float(np.mean([p[1] for p in parts]))

    def predict(v):
        return [pr(v.at_frequency(f.k) if len(f_list) > 1 else v) for pr, f in zip(predictors, f_list)]

    born_svs = [born_estimate(f) for f in f_list]
    trace.born, _ = synthesise(born_svs, 1.0)
    trace.born_delta_v = dv(trace.born)

    if seed is None:
        svs = born_svs
    else:
        svs = [seed] if isinstance(seed, SpectralEstimate) else list(seed)
    ctl = TauController(cfg.tau)
    tau = ctl.tau
    history = []
    best = None  # (delta_f, spectra, predictions)
    growth = 0
    reverted = False
    for n in range(cfg.n_max + 1):
        t0 = time.perf_counter()
        v_hat, imag_ratio = synthesise(svs, tau)
        f_pred = predict(v_hat)
        delta_f = _pooled_misfit(f_pred, f_list)
        if n == 0 and seed is None and tau == 1.0:
            trace.born_delta_f = delta_f
        rec = IterationRecord(
            n, v_hat, delta_f, tau, dv(v_hat), imag_ratio, time.perf_counter() - t0, reverted
        )
        trace.records.append(rec)
        history.append(delta_f)
        log.info("iter %d tau=%.3f delta_f=%.4g delta_v=%s", n, tau, delta_f, rec.delta_v)
        if callback is not None:
            callback(rec)
        if best is None or delta_f < best[0]:
            best = (delta_f, svs, f_pred)

        if delta_f <= cfg.stop_delta_f:
            trace.status = "converged"
            break
        growth = growth + 1 if n > 0 and delta_f > history[-2] else 0
        at_floor = cfg.tau.mode == "fixed" or tau <= cfg.tau.tau_min
        if growth >= cfg.diverge_steps and at_floor:
            trace.status = "diverged-reverted"
            break
        if n == cfg.n_max:
            trace.status = "max-iter"
            break
        tau, reverted = ctl.update(history)
        base_svs, base_pred = (best[1], best[2]) if reverted else (svs, f_pred)
        svs = [iterative_step(sv, f, p) for sv, f, p in zip(base_svs, f_list, base_pred)]
    if trace.born_delta_f is None:
        trace.born_delta_f = _pooled_misfit(predict(trace.born), f_list)
    return trace


def run_reconstruction(bf, grid, cfg=InversionConfig(), v_true=None, seed=None, callback=None):
    """Full pipeline from ring measurements: convert to amplitudes on the
    ring angles, seed with the Born estimate and iterate.

    ``bf`` may be a list of :class:`~tomolab.forward.BoundaryFields` at
    several frequencies (multifrequency averaging, see :func:`reconstruct`).
    """
    bfs = [bf] if isinstance(bf, BoundaryFields) else list(bf)
    f_meas = [near_to_far(b, trunc=cfg.truncation) for b in bfs]
    f_meas = f_meas[0] if len(f_meas) == 1 else f_meas
    return reconstruct(f_meas, grid, cfg, v_true=v_true, geom=bfs[0].geom, seed=seed, callback=callback)
