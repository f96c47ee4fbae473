"""Flat key=value experiment configs, figure presets, eta-sweeps and CSV output."""

import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import diagnostics as dg
from . import kernel as kmod
from .errors import MissingRequired, RangeError, TypeMismatch, UnknownKey, ValidationError
from .grid import Datum, Grid, fmt, read_field_csv, write_field_csv
from .local_solver import FluxModel, LocalRunConfig, run_local
from .nonlocal_solver import NonlocalRunConfig, Trajectory, VelocityModel, linear_velocity, run

OUTPUT_ENV = "NLCL_OUTPUT_DIR"

FIG3_DATUM = "-1:-0.5:1, 1:1.5:1"
FIG3_ETAS = ",".join(repr(2.0 ** -j) for j in range(1, 7))

PRESETS = {
    "max_principle": {"kernel": "fig3_piecewise", "datum": FIG3_DATUM, "velocity": "lwr",
                      "t_end": "2", "eta_list": FIG3_ETAS, "output_every": "0.01"},
    "solution_snapshots": {"kernel": "fig3_piecewise", "datum": FIG3_DATUM, "velocity": "lwr",
                           "t_end": "2", "eta_list": FIG3_ETAS, "snapshot_times": "1,2"},
    "convergence_table": {"kernel": "fig3_piecewise", "datum": FIG3_DATUM, "velocity": "lwr",
                          "t_end": "1", "eta_list": FIG3_ETAS},
    "kernel_bounds": {"kernel": "fig3_piecewise",
                      "eta_list": ",".join(repr(2.0 ** -j) for j in range(2, 9))},
    "kernel_comparison": {"kernel": "linear", "eta_list": "1,0.5,0.25"},
}

PRESET_GRID = {"x_min": "-2", "x_max": "5", "n_cells": "2800"}

# preset -> keys that must be present after defaults are applied
REQUIRED = {
    None: ("kernel", "eta_list", "datum", "t_end", "x_min", "x_max", "n_cells"),
    "max_principle": ("kernel", "eta_list", "datum", "t_end"),
    "solution_snapshots": ("kernel", "eta_list", "datum", "t_end", "snapshot_times"),
    "convergence_table": ("kernel", "eta_list", "datum", "t_end"),
    "kernel_bounds": ("kernel", "eta_list"),
    "kernel_comparison": ("kernel", "eta_list"),
}

KEYS = ("preset", "kernel", "kernel_pieces", "kernel_delta", "eta_list", "velocity", "datum",
        "x_min", "x_max", "n_cells", "t_end", "snapshot_times", "cfl", "output_dir",
        "output_every", "save_trajectory")


@dataclass
class ExperimentConfig:
    preset: Optional[str]
    kernel: kmod.KernelSpec
    eta_list: tuple
    velocity: VelocityModel
    datum: Optional[Datum] = None
    grid: Optional[Grid] = None
    t_end: Optional[float] = None
    snapshot_times: tuple = ()
    cfl: float = 0.5
    output_dir: str = "output"
    output_every: Optional[float] = None
    save_trajectory: bool = False
    raw: dict = field(default_factory=dict)


# -- parsing ------------------------------------------------------------------

def _read_pairs(text):
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise TypeMismatch(line.strip(), lineno, "expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise UnknownKey(key, lineno, f"known keys: {', '.join(KEYS)}")
        pairs[key] = (value, lineno)
    return pairs


def _num(key, value, line, kind=float):
    try:
        v = kind(value)
    except ValueError:
        raise TypeMismatch(key, line, f"expected {kind.__name__}, got {value!r}") from None
    if kind is float and math.isnan(v):
        raise TypeMismatch(key, line, "NaN is not a valid value")
    return v


def _num_list(key, value, line):
    items = [s.strip() for s in value.split(",") if s.strip()]
    if not items:
        raise TypeMismatch(key, line, "expected a comma-separated list of numbers")
    return tuple(_num(key, s, line) for s in items)


def _parse_kernel(get):
    pieces_text, pline = get("kernel_pieces")
    name, nline = get("kernel")
    if pieces_text is None:
        try:
            return kmod.preset(name)
        except ValidationError as e:
            raise RangeError("kernel", nline, str(e)) from None
    if name not in (None, "inline"):
        raise TypeMismatch("kernel", nline, "use kernel=inline (or omit it) together with kernel_pieces")
    delta_text, dline = get("kernel_delta")
    if delta_text is None:
        raise MissingRequired("kernel_delta", None, "inline kernels need kernel_delta")
    pieces = []
    for chunk in pieces_text.split(";"):
        parts = chunk.strip().split(":")
        if len(parts) != 3:
            raise TypeMismatch("kernel_pieces", pline, f"piece {chunk.strip()!r} is not a:b:c0 c1 ...")
        a = _num("kernel_pieces", parts[0], pline)
        b = _num("kernel_pieces", parts[1], pline)
        coef = [_num("kernel_pieces", c, pline) for c in parts[2].split()]
        if not coef:
            raise TypeMismatch("kernel_pieces", pline, f"piece {chunk.strip()!r} has no coefficients")
        pieces.append((a, b, coef))
    if math.isfinite(pieces[-1][1]):
        pieces.append((pieces[-1][1], math.inf, [0.0]))
    return kmod.from_polynomials(pieces, _num("kernel_delta", delta_text, dline))


def _parse_velocity(value, line):
    if value is None or value == "lwr":
        return VelocityModel.lwr()
    parts = value.split(":")
    if parts[0] == "linear" and len(parts) == 3:
        vmax, qmax = _num("velocity", parts[1], line), _num("velocity", parts[2], line)
        if not (vmax > 0 and qmax > 0):
            raise RangeError("velocity", line, "vmax and qmax must be positive")
        return linear_velocity(vmax, qmax)
    raise TypeMismatch("velocity", line, f"expected 'lwr' or 'linear:vmax:qmax', got {value!r}")


def _parse_datum(value, line):
    boxes = []
    for chunk in value.split(","):
        parts = chunk.strip().split(":")
        if len(parts) != 3:
            raise TypeMismatch("datum", line, f"segment {chunk.strip()!r} is not a:b:value")
        a, b, v = (_num("datum", p, line) for p in parts)
        if not a < b:
            raise RangeError("datum", line, f"segment [{a}, {b}) is empty")
        if not (v >= 0 and math.isfinite(v)):
            raise RangeError("datum", line, f"segment value {v} must be finite and nonnegative")
        boxes.append((a, b, v))
    return Datum.boxes(*boxes)


def parse_config(text, overrides=None):
    """Parse flat ``key=value`` text; ``overrides`` (key -> string) win over the text."""
    pairs = _read_pairs(text)
    for k, v in (overrides or {}).items():
        if k not in KEYS:
            raise UnknownKey(k, None, "unknown override key")
        pairs[k] = (str(v), None)
    preset_name = pairs.get("preset", (None, None))[0]
    if preset_name is not None:
        if preset_name not in PRESETS:
            raise RangeError("preset", pairs["preset"][1], f"known presets: {', '.join(PRESETS)}")
        for k, v in {**PRESET_GRID, **PRESETS[preset_name]}.items():
            if k == "kernel" and "kernel_pieces" in pairs:
                continue
            pairs.setdefault(k, (v, None))
    if "kernel_pieces" in pairs:
        pairs.setdefault("kernel", ("inline", None))
    for key in REQUIRED[preset_name]:
        if key not in pairs:
            raise MissingRequired(key, None, f"required{' by preset ' + preset_name if preset_name else ''}")

    def get(key):
        return pairs.get(key, (None, None))

    kernel = _parse_kernel(get)
    eta_text, eline = get("eta_list")
    etas = _num_list("eta_list", eta_text, eline)
    if any(not (0.0 < e <= 1.0) for e in etas):
        raise RangeError("eta_list", eline, "every eta must lie in (0, 1]")
    if list(etas) != sorted(etas, reverse=True) or len(set(etas)) != len(etas):
        raise RangeError("eta_list", eline, "eta_list must be strictly descending")
    cfg = ExperimentConfig(preset=preset_name, kernel=kernel, eta_list=etas,
                           velocity=_parse_velocity(*get("velocity")),
                           raw={k: v for k, (v, _) in pairs.items()})

    if "datum" in pairs:
        cfg.datum = _parse_datum(*get("datum"))
    if "x_min" in pairs or "x_max" in pairs or "n_cells" in pairs:
        for key in ("x_min", "x_max", "n_cells"):
            if key not in pairs:
                raise MissingRequired(key, None, "grid needs x_min, x_max and n_cells")
        x_min = _num("x_min", *get("x_min"))
        x_max = _num("x_max", *get("x_max"))
        n_cells = _num("n_cells", *get("n_cells"), kind=int)
        if not x_min < x_max:
            raise RangeError("x_max", get("x_max")[1], "x_max must exceed x_min")
        if n_cells < 2:
            raise RangeError("n_cells", get("n_cells")[1], "need at least 2 cells")
        cfg.grid = Grid(x_min, x_max, n_cells)
    if "t_end" in pairs:
        cfg.t_end = _num("t_end", *get("t_end"))
        if not (cfg.t_end > 0 and math.isfinite(cfg.t_end)):
            raise RangeError("t_end", get("t_end")[1], "t_end must be positive and finite")
    if "snapshot_times" in pairs:
        text, line = get("snapshot_times")
        ts = _num_list("snapshot_times", text, line)
        if list(ts) != sorted(ts) or cfg.t_end is None or any(t < 0 or t > cfg.t_end for t in ts):
            raise RangeError("snapshot_times", line, "snapshot_times must be sorted and inside [0, t_end]")
        cfg.snapshot_times = ts
    if "cfl" in pairs:
        cfg.cfl = _num("cfl", *get("cfl"))
        if not (0.0 < cfg.cfl <= 1.0):
            raise RangeError("cfl", get("cfl")[1], f"cfl must lie in (0, 1], got {cfg.cfl}")
    if "output_dir" in pairs:
        cfg.output_dir = get("output_dir")[0]
    if "output_every" in pairs:
        cfg.output_every = _num("output_every", *get("output_every"))
        if not cfg.output_every > 0:
            raise RangeError("output_every", get("output_every")[1], "output_every must be positive")
    if "save_trajectory" in pairs:
        text, line = get("save_trajectory")
        if text.lower() not in ("true", "false", "1", "0"):
            raise TypeMismatch("save_trajectory", line, f"expected true/false, got {text!r}")
        cfg.save_trajectory = text.lower() in ("true", "1")
    return cfg


def output_root(cfg):
    return Path(os.environ.get(OUTPUT_ENV) or cfg.output_dir)


# -- trajectory directories ------------------------------------------------------

def write_trajectory(directory, traj):
    """``times.csv`` plus one ``q_NNNNNN.csv`` field file per stored time level."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "times.csv", "w") as fh:
        fh.write("t\n")
        for t in traj.times:
            fh.write(fmt(t) + "\n")
    for n in range(len(traj)):
        write_field_csv(directory / f"q_{n:06d}.csv", traj.field(n))


def read_trajectory(directory):
    directory = Path(directory)
    times_path = directory / "times.csv"
    if not times_path.exists():
        raise ValidationError(f"{directory}: no times.csv")
    with open(times_path) as fh:
        rows = list(csv.reader(fh))
    times = np.array([float(r[0]) for r in rows[1:]])
    fields = []
    for n in range(times.size):
        p = directory / f"q_{n:06d}.csv"
        if not p.exists():
            raise ValidationError(f"{directory}: missing {p.name}")
        fields.append(read_field_csv(p))
    return Trajectory.from_fields(times, fields)


# -- runs ---------------------------------------------------------------------

def _validated_kernel(cfg):
    return kmod.validate(cfg.kernel)


def _nonlocal_config(cfg, spec, eta, snapshot_times, record_steps=False):
    return NonlocalRunConfig(grid=cfg.grid, datum=cfg.datum, kernel=spec, eta=eta, velocity=cfg.velocity,
                             t_end=cfg.t_end, cfl=cfg.cfl, snapshot_times=tuple(snapshot_times),
                             record_steps=record_steps)


def sweep(cfg, snapshot_times, record_steps=False):
    """One nonlocal run per eta, in eta_list order."""
    spec = _validated_kernel(cfg)
    return [run(_nonlocal_config(cfg, spec, eta, snapshot_times, record_steps)) for eta in cfg.eta_list]


def local_run(cfg, snapshot_times, record_steps=False):
    fm = FluxModel.from_velocity(cfg.velocity, _state_range(cfg))
    return run_local(LocalRunConfig(cfg.grid, cfg.datum, fm, cfg.t_end, cfg.cfl,
                                    tuple(snapshot_times), record_steps))


def _state_range(cfg):
    # the maximum principle keeps the local solution inside [0, max q0]
    q_max = max([float(v) for _, _, v in cfg.datum.pieces] + [0.0])
    return (0.0, max(1.0, q_max))


def output_times(t_end, every):
    n = int(round(t_end / every))
    if not math.isclose(n * every, t_end, rel_tol=1e-9):
        raise ValidationError(f"output_every={every} does not divide t_end={t_end}")
    return tuple(float(v) for v in np.round(np.arange(n + 1) * every, 12))


def _eta_dir(eta):
    return f"eta_{fmt(eta)}"


def _time_tag(t):
    return format(t, "g")


def write_linf_series(path, times, results):
    with open(path, "w") as fh:
        fh.write(",".join(["t"] + [f"eta{j + 1}" for j in range(len(results))]) + "\n")
        for t in times:
            row = [fmt(t)] + [fmt(np.max(np.abs(r.snapshots[t].values))) for r in results]
            fh.write(",".join(row) + "\n")
    with open(Path(path).with_name("linf_series_columns.csv"), "w") as fh:
        fh.write("column,eta\n")
        for j, r in enumerate(results):
            fh.write(f"eta{j + 1},{fmt(r.config.eta)}\n")


def write_run_outputs(root, result, snapshot_times=None):
    d = Path(root) / _eta_dir(result.config.eta)
    d.mkdir(parents=True, exist_ok=True)
    result.diagnostics.write_csv(d / "diagnostics.csv")
    times = sorted(result.snapshots) if snapshot_times is None else snapshot_times
    for t in times:
        write_field_csv(d / f"snapshot_t{_time_tag(t)}.csv", result.snapshots[t])
    return d


def run_max_principle(cfg, root):
    times = output_times(cfg.t_end, cfg.output_every or 0.01)
    results = sweep(cfg, times)
    path = root / "linf_series.csv"
    write_linf_series(path, times, results)
    return [path, root / "linf_series_columns.csv"]


def run_solution_snapshots(cfg, root):
    written = []
    for r in sweep(cfg, cfg.snapshot_times):
        d = root / _eta_dir(r.config.eta)
        d.mkdir(parents=True, exist_ok=True)
        for t in cfg.snapshot_times:
            p = d / f"snapshot_t{_time_tag(t)}.csv"
            write_field_csv(p, r.snapshots[t])
            written.append(p)
    loc = local_run(cfg, cfg.snapshot_times)
    d = root / "local"
    d.mkdir(parents=True, exist_ok=True)
    for t in cfg.snapshot_times:
        p = d / f"snapshot_t{_time_tag(t)}.csv"
        write_field_csv(p, loc.snapshots[t])
        written.append(p)
    return written


def convergence_rows(cfg):
    t_star = cfg.t_end
    results = sweep(cfg, (t_star,))
    loc = local_run(cfg, (t_star,))
    return dg.convergence_table(results, loc, t_star)


def run_convergence_table(cfg, root):
    path = root / "convergence_table.csv"
    dg.write_table_csv(path, convergence_rows(cfg))
    return [path]


BOUNDS_COLUMNS = ("eta", "c_eta", "lower", "upper", "combo_norm")


def kernel_bounds_rows(spec, etas):
    a = -1.0 / spec.gamma_prime_at_zero
    rows = []
    for eta in etas:
        lower, upper = kmod.c_eta_bounds(spec, eta)
        rows.append((eta, kmod.c_eta(spec, eta), lower, upper, kmod.combo_l1_norm(spec, eta, a)))
    return rows


def run_kernel_bounds(cfg, root):
    spec = _validated_kernel(cfg)
    path = root / "kernel_bounds.csv"
    with open(path, "w") as fh:
        fh.write(",".join(BOUNDS_COLUMNS) + "\n")
        for row in kernel_bounds_rows(spec, cfg.eta_list):
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return [path]


def kernel_comparison_samples(spec, etas, n=1001):
    """Sample x-grid plus both scaled families; columns power_<eta>, spatial_<eta>."""
    end = spec.support_bound if math.isfinite(spec.support_bound) else 10.0 * spec.decay_length
    x = np.linspace(0.0, end, n)
    cols = {}
    mass = kmod.l1_norm(spec)
    for eta in etas:
        cols[f"power_{fmt(eta)}"] = kmod.power_scaled_values(spec, eta, x)
    for eta in etas:
        cols[f"spatial_{fmt(eta)}"] = kmod.spatial_scaled_values(spec, eta, x, mass)
    return x, cols


def run_kernel_comparison(cfg, root):
    # the comparison is descriptive, so unnormalized kernels are accepted here
    x, cols = kernel_comparison_samples(cfg.kernel, cfg.eta_list)
    path = root / "kernel_comparison.csv"
    with open(path, "w") as fh:
        fh.write(",".join(["x"] + list(cols)) + "\n")
        for i in range(x.size):
            fh.write(",".join([fmt(x[i])] + [fmt(c[i]) for c in cols.values()]) + "\n")
    return [path]


def run_simulation(cfg, root):
    """Explicit (non-preset) sweep: per-eta diagnostics and snapshots, plus the linf series."""
    times = cfg.snapshot_times
    if cfg.output_every is not None:
        times = tuple(sorted(set(times) | set(output_times(cfg.t_end, cfg.output_every))))
    results = sweep(cfg, times, record_steps=cfg.save_trajectory)
    written = []
    for r in results:
        d = write_run_outputs(root, r, cfg.snapshot_times)
        written.append(d)
        if cfg.save_trajectory:
            write_trajectory(d / "trajectory", r.trajectory)
    if cfg.output_every is not None:
        path = root / "linf_series.csv"
        write_linf_series(path, output_times(cfg.t_end, cfg.output_every), results)
        written.append(path)
    return written


RUNNERS = {
    "max_principle": run_max_principle,
    "solution_snapshots": run_solution_snapshots,
    "convergence_table": run_convergence_table,
    "kernel_bounds": run_kernel_bounds,
    "kernel_comparison": run_kernel_comparison,
    None: run_simulation,
}


def run_config(cfg):
    root = output_root(cfg)
    root.mkdir(parents=True, exist_ok=True)
    return RUNNERS[cfg.preset](cfg, root)


def run_preset(name, overrides=None):
    """Run a preset with ``key -> string`` overrides; returns the written paths."""
    if name not in PRESETS:
        raise ValidationError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")
    return run_config(parse_config(f"preset={name}", overrides))
