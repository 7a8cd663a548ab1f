"""Scenario runner, run configuration and field export.

A run is described by one JSON document (:class:`RunConfig`). Named presets
fill in the scatterer and iteration settings of the standard scenarios; a
user config is merged on top, key by key. Every setting the run used is
echoed in the report.

Usage::

    tomolab run --preset fig2 --out runs/fig2
    tomolab run --preset custom --config my.json --out runs/custom --seed 3
    tomolab export runs/fig2/v_final.csv --format binary --out v_final
"""

import argparse
import copy
import csv
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from typing import List, Optional, get_type_hints

import numpy as np

from . import __version__
from .background import RingGeometry, Wavenumber
from .errors import ConfigError, ExportError, TomolabError
from .forward import simulate_ring
from .inversion import InversionConfig, TauSchedule, run_reconstruction
from .metrics import NoiseSpec, amplitude_norm, inject_noise_multi, phase_shift
from .model import AmplitudeGrid, Grid2D, PhantomSpec, ScattererField, build_phantom, v_to_speed_contrast
from .near2far import TruncationPolicy, near_to_far

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
FORMATS = ("grid-csv", "binary")


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class MediumConfig:
    """Background medium and frequencies.

    ``wavelength`` is the background wavelength at the lowest frequency
    ``omega_1``. With ``n_frequencies > 1`` the frequencies are uniform in
    ``[omega_1, band * omega_1]``.
    """

    c0: float = 1.0
    wavelength: float = 8.0
    n_frequencies: int = 1
    band: float = 1.1

    def __post_init__(self):
        if not (isinstance(self.n_frequencies, int) and self.n_frequencies >= 1):
            raise ValueError("n_frequencies must be a positive integer")
        if not self.band >= 1:
            raise ValueError("band must be at least 1")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")

    def wavenumbers(self):
        k1 = Wavenumber.from_wavelength(self.wavelength, self.c0)
        ratios = np.linspace(1.0, self.band, self.n_frequencies) if self.n_frequencies > 1 else [1.0]
        return [k1.scaled(float(r)) for r in ratios]


@dataclass(frozen=True)
class GeometryConfig:
    """Transducer ring; ``R0_wavelengths`` is the radius in units of the
    lowest-frequency wavelength."""

    R0_wavelengths: float = 4.0
    M: int = 60


@dataclass(frozen=True)
class GridConfig:
    """``n x n`` cells of side ``h`` centred on the ring centre, masked to a
    disk of ``radius`` (all in length units)."""

    n: int = 60
    h: float = 1.0
    radius: Optional[float] = 28.0


@dataclass(frozen=True)
class PhantomConfig:
    """Gaussian phantom. Named variants derive their blobs from the
    wavelength; ``"custom"`` needs explicit centres, widths and weights."""

    variant: str = "two-blob"
    A0: float = 0.43
    squared_distance: bool = True
    centers: Optional[List[List[float]]] = None
    widths: Optional[List[float]] = None
    weights: Optional[List[float]] = None

    def __post_init__(self):
        explicit = [self.centers, self.widths, self.weights]
        if self.variant in ("two-blob", "four-blob"):
            if any(e is not None for e in explicit):
                raise ValueError(f"variant {self.variant!r} takes no explicit blobs")
        elif self.variant == "custom":
            if any(e is None for e in explicit):
                raise ValueError("custom phantom needs centers, widths and weights")
        else:
            raise ValueError(f"unknown phantom variant {self.variant!r}")

    def spec(self, wavelength):
        if self.variant == "two-blob":
            return PhantomSpec.two_blob(self.A0, wavelength, squared_distance=self.squared_distance)
        if self.variant == "four-blob":
            return PhantomSpec.four_blob(self.A0, wavelength, squared_distance=self.squared_distance)
        return PhantomSpec.from_dict(
            dict(
                A0=self.A0,
                centers=self.centers,
                widths=self.widths,
                weights=self.weights,
                variant="custom",
                squared_distance=self.squared_distance,
            )
        )


@dataclass(frozen=True)
class NoiseConfig:
    level: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    """Complete description of one run. ``seed`` drives the noise stream."""

    medium: MediumConfig = field(default_factory=MediumConfig)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    phantom: PhantomConfig = field(default_factory=PhantomConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    inversion: InversionConfig = field(default_factory=InversionConfig)
    seed: int = 0
    output_dir: Optional[str] = None
    export_format: str = "grid-csv"

    @classmethod
    def from_dict(cls, data):
        return _load(cls, data, "config")

    def to_dict(self):
        return asdict(self)

    def build(self):
        """Construct and cross-check every run object; raises
        :class:`ConfigError` before any heavy computation."""
        try:
            ks = self.medium.wavenumbers()
            geom = RingGeometry(self.geometry.R0_wavelengths * self.medium.wavelength, self.geometry.M)
            g = self.grid
            grid = Grid2D.centered(g.n, g.h, radius=g.radius)
            grid.check_inside_ring(geom.R0)
            grid.check_resolution(ks[-1].k0)
            self.inversion.truncation.order(geom)
            spec = self.phantom.spec(self.medium.wavelength)
            v1 = build_phantom(spec, ks[0], grid)
            noise = NoiseSpec(self.noise.level, self.seed)
            if self.export_format not in FORMATS:
                raise ValueError(f"export_format must be one of {FORMATS}")
        except ConfigError:
            raise
        except (TomolabError, ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        return Scenario(ks, geom, grid, spec, v1, noise, self.inversion)


@dataclass(frozen=True)
class Scenario:
    ks: list
    geom: RingGeometry
    grid: Grid2D
    spec: PhantomSpec
    v_true: ScattererField
    noise: NoiseSpec
    inversion: InversionConfig


def _load(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    names = {f.name for f in fields(cls) if f.init}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    hints = get_type_hints(cls)
    kw = {}
    for key, value in data.items():
        t = hints[key]
        kw[key] = _load(t, value, f"{where}.{key}") if is_dataclass(t) else value
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


_FIXED = asdict(TauSchedule.fixed(1.0))

PRESETS = {
    "fig2": {
        "phantom": {"variant": "two-blob", "A0": 0.43},
        "inversion": {"tau": _FIXED, "n_max": 10},
    },
    "fig3": {
        "phantom": {"variant": "two-blob", "A0": 0.55},
        "inversion": {"n_max": 60},
    },
    "fig4": {
        "phantom": {"variant": "two-blob", "A0": 0.91},
        "inversion": {"tau": _FIXED, "n_max": 35},
    },
    "fig5-clean": {
        "phantom": {"variant": "four-blob", "A0": 1.1},
        "inversion": {"tau": {"tau0": 1.0}, "n_max": 25},
    },
    "fig5-noise": {
        "phantom": {"variant": "four-blob", "A0": 1.1},
        "noise": {"level": 0.15},
        "inversion": {"n_max": 25},
    },
    "custom": {},
}


def preset_config(name, overrides=None, seed=None, output_dir=None):
    """Defaults, then the preset, then ``overrides`` (a dict), then flags."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    data = _merge(RunConfig().to_dict(), PRESETS[name])
    data = _merge(data, overrides or {})
    if seed is not None:
        data["seed"] = seed
    if output_dir is not None:
        data["output_dir"] = str(output_dir)
    return RunConfig.from_dict(data)


# ---------------------------------------------------------------- export


def _grid_meta(grid, k):
    return {
        "nx": grid.nx,
        "ny": grid.ny,
        "h": grid.h,
        "origin": list(grid.origin),
        "radius": grid.radius,
        "center": list(grid.center),
        "omega": k.omega,
        "c0": k.c0,
    }


def export_fields(obj, path, fmt="grid-csv"):
    """Write a :class:`ScattererField` or :class:`AmplitudeGrid`.

    ``"grid-csv"`` writes one header line (``# nx,ny,h,origin_x,origin_y,omega``
    with values, or ``# n_phi,n_phi_prime,omega`` for amplitudes) and rows
    ``ix,iy,re,im`` (``i,j,phi,phi_prime,re,im``). ``"binary"`` writes
    ``path + ".json"`` metadata next to ``path + ".bin"`` holding row-major
    little-endian float64 with real and imaginary parts interleaved. Floats
    are written with round-trip precision, so both formats are lossless.
    Returns the list of files written.
    """
    path = os.fspath(path)
    if fmt not in FORMATS:
        raise ValueError(f"unknown export format {fmt!r}")
    try:
        if fmt == "grid-csv":
            return [_write_csv(obj, path)]
        return _write_binary(obj, path)
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc}") from exc


def _write_csv(obj, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if isinstance(obj, ScattererField):
            g = obj.grid
            fh.write(
                f"# nx={g.nx},ny={g.ny},h={g.h!r},origin_x={g.origin[0]!r},"
                f"origin_y={g.origin[1]!r},omega={obj.k.omega!r}\n"
            )
            for ix in range(g.nx):
                for iy in range(g.ny):
                    z = obj.values[ix, iy]
                    w.writerow([ix, iy, repr(float(z.real)), repr(float(z.imag))])
        elif isinstance(obj, AmplitudeGrid):
            fh.write(f"# n_phi={obj.phis.size},n_phi_prime={obj.phis_prime.size},omega={obj.k.omega!r}\n")
            for i, p in enumerate(obj.phis):
                for j, pp in enumerate(obj.phis_prime):
                    z = obj.values[i, j]
                    w.writerow([i, j, repr(float(p)), repr(float(pp)), repr(float(z.real)), repr(float(z.imag))])
        else:
            raise TypeError(f"cannot export {type(obj).__name__}")
    return path


def _write_binary(obj, path):
    if isinstance(obj, ScattererField):
        meta = {"kind": "scatterer", **_grid_meta(obj.grid, obj.k)}
    elif isinstance(obj, AmplitudeGrid):
        meta = {
            "kind": "amplitude",
            "phis": obj.phis.tolist(),
            "phis_prime": obj.phis_prime.tolist(),
            "omega": obj.k.omega,
            "c0": obj.k.c0,
        }
    else:
        raise TypeError(f"cannot export {type(obj).__name__}")
    data = np.ascontiguousarray(obj.values, dtype="<c16")
    meta.update(
        shape=list(data.shape) + [2],
        dtype="float64",
        endianness="little",
        order="row-major",
        layout="re,im interleaved",
        binary=os.path.basename(path) + ".bin",
    )
    with open(path + ".bin", "wb") as fh:
        fh.write(data.tobytes(order="C"))
    with open(path + ".json", "w") as fh:
        json.dump(meta, fh, indent=2)
    return [path + ".json", path + ".bin"]


def _parse_header(line):
    if not line.startswith("#"):
        raise ValueError("missing header line")
    return dict(item.split("=", 1) for item in line[1:].strip().split(","))


def read_fields(path, grid=None, c0=1.0):
    """Read back a dump written by :func:`export_fields`.

    ``path`` is the CSV file or the binary base path (with or without the
    ``.json``/``.bin`` suffix). A CSV dump carries no mask; pass ``grid`` to
    restore it, otherwise an unmasked grid is rebuilt from the header.
    """
    path = os.fspath(path)
    try:
        if path.endswith(".csv"):
            return _read_csv(path, grid, c0)
        for suffix in (".json", ".bin"):
            if path.endswith(suffix):
                path = path[: -len(suffix)]
        return _read_binary(path)
    except OSError as exc:
        raise ExportError(f"cannot read {path}: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise ExportError(f"malformed dump {path}: {exc}") from exc


def _read_csv(path, grid, c0):
    with open(path, newline="") as fh:
        head = _parse_header(fh.readline())
        rows = list(csv.reader(fh))
    if "nx" in head:
        nx, ny = int(head["nx"]), int(head["ny"])
        k = Wavenumber(float(head["omega"]), c0)
        if grid is None:
            origin = (float(head["origin_x"]), float(head["origin_y"]))
            grid = Grid2D(origin, nx, ny, float(head["h"]))
        vals = np.zeros((nx, ny), dtype=complex)
        for ix, iy, re, im in rows:
            vals[int(ix), int(iy)] = complex(float(re), float(im))
        return ScattererField(grid, vals, k)
    n, npr = int(head["n_phi"]), int(head["n_phi_prime"])
    phis, phis_prime = np.zeros(n), np.zeros(npr)
    vals = np.zeros((n, npr), dtype=complex)
    for i, j, p, pp, re, im in rows:
        i, j = int(i), int(j)
        phis[i], phis_prime[j] = float(p), float(pp)
        vals[i, j] = complex(float(re), float(im))
    return AmplitudeGrid(phis, phis_prime, vals, Wavenumber(float(head["omega"]), c0))


def _read_binary(base):
    with open(base + ".json") as fh:
        meta = json.load(fh)
    raw = np.fromfile(os.path.join(os.path.dirname(base), meta["binary"]), dtype="<f8")
    vals = raw.reshape(meta["shape"])
    vals = vals[..., 0] + 1j * vals[..., 1]
    k = Wavenumber(meta["omega"], meta["c0"])
    if meta["kind"] == "scatterer":
        grid = Grid2D(
            tuple(meta["origin"]),
            meta["nx"],
            meta["ny"],
            meta["h"],
            radius=meta["radius"],
            center=tuple(meta["center"]),
        )
        return ScattererField(grid, vals, k)
    return AmplitudeGrid(np.array(meta["phis"]), np.array(meta["phis_prime"]), vals, k)


# ---------------------------------------------------------------- runs


def _contrast_metrics(v, grid, k):
    c = v_to_speed_contrast(v).real
    path = ((grid.xs[0], 0.0), (grid.xs[-1], 0.0))
    return {
        "contrast_min": float(c[grid.mask].min()),
        "contrast_max": float(c[grid.mask].max()),
        "phase_shift_positive_over_pi": phase_shift(c, grid, k, path, "positive") / np.pi,
        "phase_shift_negative_over_pi": phase_shift(c, grid, k, path, "negative") / np.pi,
    }


def execute(cfg, callback=None):
    """Simulate, convert and reconstruct for a validated config.

    Returns ``(report, trace)``; nothing is written to disk.
    """
    t_start = time.perf_counter()
    sc = cfg.build()
    timings = {}

    t0 = time.perf_counter()
    bfs = [simulate_ring(sc.v_true.at_frequency(k), sc.geom) for k in sc.ks]
    timings["simulate_s"] = time.perf_counter() - t0
    bfs, ns = inject_noise_multi(bfs, sc.noise)

    t0 = time.perf_counter()
    trace = run_reconstruction(bfs if len(bfs) > 1 else bfs[0], sc.grid, sc.inversion, v_true=sc.v_true, callback=callback)
    timings["reconstruct_s"] = time.perf_counter() - t0
    timings["per_iteration_s"] = [r.seconds for r in trace.records]
    timings["total_s"] = time.perf_counter() - t_start

    f_list = trace.f_meas if isinstance(trace.f_meas, list) else [trace.f_meas]
    fnorm = [amplitude_norm(f) for f in f_list]
    best = trace.final_record
    metrics = {
        "status": trace.status,
        "born_delta_v": trace.born_delta_v,
        "born_delta_f": trace.born_delta_f,
        "final_delta_v": best.delta_v,
        "final_delta_f": best.delta_f,
        "best_iteration": best.n,
        "n_records": len(trace.records),
        "amplitude_norm": fnorm,
        "amplitude_norm_times_3pi": [3.0 * np.pi * x for x in fnorm],
        "noise_to_signal": ns,
        "frequencies": [k.omega for k in sc.ks],
        **_contrast_metrics(sc.v_true, sc.grid, sc.ks[0]),
    }
    report = {
        "tool": "tomolab",
        "version": __version__,
        "config": cfg.to_dict(),
        "phantom_resolved": sc.spec.to_dict(),
        "metrics": metrics,
        "trace": {
            "n": [r.n for r in trace.records],
            "delta_f": trace.delta_f,
            "delta_v": trace.delta_v,
            "tau": trace.taus,
            "reverted": [r.reverted for r in trace.records],
            "imag_ratio": [r.imag_ratio for r in trace.records],
        },
        "timings": timings,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    return report, trace, sc


def normalize_report(report):
    """Drop wall-clock fields and the output location so that identical
    inputs give identical reports."""
    out = copy.deepcopy(report)
    out.pop("timings", None)
    out.pop("created", None)
    out["config"]["output_dir"] = None
    return out


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def write_artifacts(report, trace, sc, out_dir, fmt="grid-csv", normalize=False):
    """Report JSON, convergence CSV, field dumps and ``y = 0`` cross-sections."""
    os.makedirs(out_dir, exist_ok=True)
    files = []
    rep = normalize_report(report) if normalize else report
    _dump_json(rep, os.path.join(out_dir, "report.json"))
    files.append("report.json")

    with open(os.path.join(out_dir, "convergence.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "delta_f", "delta_v", "tau", "reverted"])
        for r in trace.records:
            w.writerow([r.n, repr(r.delta_f), "" if r.delta_v is None else repr(r.delta_v), repr(r.tau), int(r.reverted)])
    files.append("convergence.csv")

    ext = ".csv" if fmt == "grid-csv" else ""
    named = {"v_true": sc.v_true, "v_born": trace.born, "v_final": trace.final}
    for name, fld in named.items():
        files += [os.path.relpath(p, out_dir) for p in export_fields(fld, os.path.join(out_dir, name + ext), fmt)]

    x, vt = sc.v_true.cross_section(0.0)
    _, vb = trace.born.cross_section(0.0)
    _, vf = trace.final.cross_section(0.0)
    with open(os.path.join(out_dir, "cross_section.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "v_true_re", "v_true_im", "v_born_re", "v_born_im", "v_final_re", "v_final_im"])
        for row in zip(x, vt, vb, vf):
            w.writerow([repr(float(row[0]))] + [repr(float(p)) for z in row[1:] for p in (z.real, z.imag)])
    files.append("cross_section.csv")
    return files


def run_scenario(name, overrides=None, out_dir=None, seed=None, normalize=False, callback=None):
    """Run a preset (``fig2``, ``fig3``, ``fig4``, ``fig5-clean``,
    ``fig5-noise`` or ``custom``) and write its artifacts.

    Returns ``(exit_code, report)``. On failure the report is the error
    document, which is also written to ``error.json`` when ``out_dir`` is
    known.
    """
    try:
        cfg = preset_config(name, overrides, seed=seed, output_dir=out_dir)
        report, trace, sc = execute(cfg, callback=callback)
        report["preset"] = name
        if cfg.output_dir is not None:
            write_artifacts(report, trace, sc, cfg.output_dir, cfg.export_format, normalize)
        return EXIT_OK, report
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc, out_dir)
    except TomolabError as exc:
        return _fail(EXIT_NUMERICAL, exc, out_dir)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERICAL, exc, out_dir)


def _fail(code, exc, out_dir):
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    cond = getattr(exc, "condition", None)
    if cond is not None:
        err["condition"] = cond
    if out_dir is not None:
        try:
            os.makedirs(out_dir, exist_ok=True)
            _dump_json(err, os.path.join(out_dir, "error.json"))
        except OSError:
            pass
    return code, err


# ---------------------------------------------------------------- entry point


def _limit_threads():
    # BLAS thread pools can reorder floating-point reductions
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return None
    return threadpool_limits(1)


def _cmd_run(args):
    overrides = {}
    if args.config:
        try:
            with open(args.config) as fh:
                overrides = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            return _fail(EXIT_CONFIG, ConfigError(f"cannot load {args.config}: {exc}"), args.out)
    if args.serial:
        _limit_threads()
    return run_scenario(args.preset, overrides, out_dir=args.out, seed=args.seed, normalize=args.normalize)


def _cmd_export(args):
    try:
        obj = read_fields(args.input)
        files = export_fields(obj, args.out, args.format)
    except ExportError as exc:
        return _fail(EXIT_NUMERICAL, exc, None)
    except (TomolabError, ValueError) as exc:
        return _fail(EXIT_CONFIG, exc, None)
    return EXIT_OK, {"written": files}


def build_parser():
    p = argparse.ArgumentParser(prog="tomolab", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log every iteration")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and write its report and data")
    r.add_argument("--preset", required=True, choices=sorted(PRESETS))
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--config", help="JSON file merged over the preset")
    r.add_argument("--seed", type=int, help="override the noise seed")
    r.add_argument("--serial", action="store_true", help="single-threaded linear algebra")
    r.add_argument("--normalize", action="store_true", help="omit timings and timestamps from the report")
    r.set_defaults(func=_cmd_run)

    e = sub.add_parser("export", help="convert a field dump between formats")
    e.add_argument("input", help="CSV dump or binary base path")
    e.add_argument("--format", choices=FORMATS, required=True)
    e.add_argument("--out", required=True, help="output path (base path for binary)")
    e.set_defaults(func=_cmd_export)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    code, doc = args.func(args)
    if code == EXIT_OK:
        if args.command == "run":
            m = doc["metrics"]
            print(
                f"{doc['preset']}: {m['status']}, born delta_v={m['born_delta_v']}, "
                f"final delta_v={m['final_delta_v']} (iteration {m['best_iteration']})"
            )
        else:
            print("\n".join(doc["written"]))
    else:
        print(json.dumps(doc), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
