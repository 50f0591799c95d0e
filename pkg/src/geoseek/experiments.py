"""Experiment configs, single runs, sweeps and summaries.

Config schema (JSON)::

    {
      "name": "so3_paper",
      "space": "R1" | "S1" | "SO3" | "SE3",
      "cost": {"kind": "quadratic" | "cosine" | "so3_trace" | "se3_pose" | "constant",
               "params": {"value": 1.0}},
      "initial": [x, ...]                      # R1 / S1 coordinates
               | {"rz": angle, "translation": [x, y, z]}   # groups
               | {"matrix": [[...], ...]},
      "target": same format as "initial" (the cost's minimiser),
      "dither": {"amplitudes": [...], "multipliers": ["2", "4.1", ...], "omega": 1.0},
      "integrator": {"step": 1e-3, "horizon": 200, "method": "LIE_EULER",
                     "t0": 0, "sample_stride": 100, "project_each_step": true},
      "radius": 0.2,
      "output": "so3_paper.csv"
    }

Multipliers are decimal strings so they are read as exact rationals.
"""

from __future__ import annotations

import concurrent.futures as cf
import csv
import dataclasses
import io
import json
import math
import os
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import costs, lie
from .averaging import _enter_time, _loglog_slope, averaging_residual, corrector_distances
from .errors import (ChartExitError, ConfigError, DegenerateFitError,
                     IntegrationDivergedError)
from .eslaw import DitherSpec, ESField, validate_frequencies
from .integrate import IntegratorConfig, Method, Trajectory, integrate
from .lie import GroupElement, GroupTag
from .manifold import circle, euclidean, validate_dither_amplitude

SPACES = ("R1", "S1", "SO3", "SE3")
COSTS = {
    "quadratic": ("R1",),
    "cosine": ("S1",),
    "constant": SPACES,
    "so3_trace": ("SO3",),
    "se3_pose": ("SE3",),
}
STATE_DIM = {"R1": 1, "S1": 1, "SO3": 9, "SE3": 12}
AXES = ("amplitude", "omega", "step")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    space: str
    cost: dict
    initial: Any
    target: Any
    amplitudes: tuple
    multipliers: tuple  # decimal strings, parsed exactly by DitherSpec
    omega: float
    step: float
    horizon: float
    method: str
    t0: float = 0.0
    sample_stride: int = 1
    project_each_step: bool = True
    radius: float = 0.1
    output: str = ""

    # derived objects -----------------------------------------------------

    @property
    def is_group(self) -> bool:
        return self.space in ("SO3", "SE3")

    def dither(self) -> DitherSpec:
        return DitherSpec(self.amplitudes, self.multipliers, self.omega)

    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(self.step, self.horizon, Method(self.method), self.t0,
                                self.sample_stride, self.project_each_step)

    def manifold(self):
        if self.space == "R1":
            return euclidean(1)
        if self.space == "S1":
            return circle()
        return GroupTag(self.space)

    def state(self, raw):
        if self.is_group:
            return _group_state(raw, GroupTag(self.space))
        return np.asarray(raw, dtype=float).ravel()

    def cost_oracle(self):
        kind = self.cost["kind"]
        params = self.cost.get("params", {})
        target = self.state(self.target)
        if kind == "quadratic":
            return costs.quadratic(target)
        if kind == "cosine":
            return costs.cosine(float(target[0]))
        if kind == "so3_trace":
            return costs.so3_trace(target)
        if kind == "se3_pose":
            return costs.se3_pose(target)
        return costs.constant(float(params.get("value", 1.0)), target)

    def es_field(self) -> ESField:
        return ESField(self.dither(), self.cost_oracle(), self.manifold())

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "space": self.space,
            "cost": self.cost,
            "initial": self.initial,
            "target": self.target,
            "dither": {"amplitudes": list(self.amplitudes), "multipliers": list(self.multipliers),
                       "omega": self.omega},
            "integrator": {"step": self.step, "horizon": self.horizon, "method": self.method,
                           "t0": self.t0, "sample_stride": self.sample_stride,
                           "project_each_step": self.project_each_step},
            "radius": self.radius,
            "output": self.output,
        }


def _group_state(raw, tag: GroupTag) -> GroupElement:
    if isinstance(raw, GroupElement):
        return raw
    if "matrix" in raw:
        return GroupElement(np.asarray(raw["matrix"], dtype=float), tag)
    g = lie.rz(float(raw.get("rz", 0.0)), tag)
    if tag is GroupTag.SE3:
        return GroupElement(lie.se3_matrix(g.rotation, raw.get("translation", (0.0, 0.0, 0.0))), tag)
    return g


# loading / validation ------------------------------------------------------

def _parse_error(text: str, src: str, err: json.JSONDecodeError) -> ConfigError:
    lines = text.splitlines()
    line = lines[err.lineno - 1] if err.lineno <= len(lines) else "<end of file>"
    caret = " " * (err.colno - 1) + "^"
    return ConfigError(f"{src}:{err.lineno}:{err.colno}: {err.msg}\n    {line}\n    {caret}")


def _as_multiplier_text(v, problems, i):
    if isinstance(v, str):
        return v.strip()
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return repr(v)
    problems.append(f"dither.multipliers[{i}] must be a decimal string")
    return None


def config_from_dict(d: dict, src: str = "<config>") -> ExperimentConfig:
    """Build and fully validate a config; every problem found is reported at once."""
    problems: list[str] = []
    if not isinstance(d, dict):
        raise ConfigError(f"{src}: top level must be a JSON object")

    def need(obj, key, where):
        if not isinstance(obj, dict) or key not in obj:
            problems.append(f"missing field {where}{key}")
            return None
        return obj[key]

    name = need(d, "name", "") or "unnamed"
    space = need(d, "space", "")
    if space is not None and space not in SPACES:
        problems.append(f"space must be one of {', '.join(SPACES)}, got {space!r}")
        space = None
    cost = need(d, "cost", "") or {}
    if isinstance(cost, str):
        cost = {"kind": cost}
    kind = cost.get("kind") if isinstance(cost, dict) else None
    if kind not in COSTS:
        problems.append(f"cost.kind must be one of {', '.join(COSTS)}, got {kind!r}")
    elif space and space not in COSTS[kind]:
        problems.append(f"cost {kind!r} is not defined on {space}")

    dither = need(d, "dither", "") or {}
    amps = need(dither, "amplitudes", "dither.") or []
    mults_raw = need(dither, "multipliers", "dither.") or []
    omega = dither.get("omega", 1.0) if isinstance(dither, dict) else 1.0
    mults = [_as_multiplier_text(v, problems, i) for i, v in enumerate(mults_raw)]
    if not all(isinstance(a, (int, float)) and not isinstance(a, bool) and a > 0 for a in amps):
        problems.append("dither.amplitudes must be positive numbers")
    if len(amps) != len(mults_raw):
        problems.append(f"{len(amps)} amplitudes but {len(mults_raw)} multipliers")
    if not (isinstance(omega, (int, float)) and omega > 0):
        problems.append("dither.omega must be a positive number")
    if space and len(amps) != (GroupTag(space).algebra_dim if space in ("SO3", "SE3") else 1):
        problems.append(f"{space} needs {STATE_DIM[space] if space in ('R1', 'S1') else GroupTag(space).algebra_dim}"
                        f" dither components, got {len(amps)}")
    if mults and None not in mults:
        try:
            for v in validate_frequencies(mults):
                problems.append(f"non-resonance violated: {v}")
        except (ValueError, ZeroDivisionError) as e:
            problems.append(f"bad multiplier: {e}")

    integ = need(d, "integrator", "") or {}
    icfg = None
    try:
        icfg = IntegratorConfig(float(integ["step"]), float(integ["horizon"]),
                                Method(integ.get("method", "LIE_EULER" if space in ("SO3", "SE3") else "CHART_RK4")),
                                float(integ.get("t0", 0.0)), int(integ.get("sample_stride", 1)),
                                bool(integ.get("project_each_step", True)))
    except KeyError as e:
        problems.append(f"missing field integrator.{e.args[0]}")
    except (TypeError, ValueError) as e:
        problems.append(f"integrator: {e}")
    if icfg is not None and space:
        if space in ("SO3", "SE3") and icfg.method is Method.CHART_RK4:
            problems.append("groups integrate with LIE_EULER or RKMK4")
        if space in ("R1", "S1") and icfg.method is not Method.CHART_RK4:
            problems.append("chart spaces integrate with CHART_RK4")

    initial = need(d, "initial", "")
    target = d.get("target")
    if target is None:
        target = {"rz": 0.0} if space in ("SO3", "SE3") else [0.0]
    radius = d.get("radius", 0.1)
    if not (isinstance(radius, (int, float)) and radius > 0):
        problems.append("radius must be a positive number")

    if problems:
        raise ConfigError(f"{src}: invalid config", problems)

    cfg = ExperimentConfig(
        name=str(name), space=space, cost=dict(cost), initial=initial, target=target,
        amplitudes=tuple(float(a) for a in amps), multipliers=tuple(mults), omega=float(omega),
        step=icfg.step, horizon=icfg.horizon, method=icfg.method.value, t0=icfg.t0,
        sample_stride=icfg.sample_stride, project_each_step=icfg.project_each_step,
        radius=float(radius), output=str(d.get("output", f"{name}.csv")),
    )
    # states and amplitude safety need the assembled config
    try:
        x0 = cfg.state(cfg.initial)
        cfg.state(cfg.target)
        m = cfg.manifold()
        if not cfg.is_group:
            if x0.size != 1:
                problems.append(f"initial state must have 1 coordinate, got {x0.size}")
            else:
                m.check(x0)
            rep = validate_dither_amplitude(m, cfg.amplitudes)
            if not rep.passed:
                problems.append(f"dither length {rep.bound:.6g} reaches the injectivity radius {rep.radius:.6g}")
        elif math.sqrt(sum(a * a for a in cfg.amplitudes[:3])) >= math.pi:
            problems.append("rotation dither length reaches pi")
    except (ValueError, TypeError, KeyError) as e:
        problems.append(f"state: {e}")
    if problems:
        raise ConfigError(f"{src}: invalid config", problems)
    return cfg


def load_config(path) -> ExperimentConfig:
    """Read and validate a config file; a bare built-in name is also accepted."""
    p = Path(path)
    if not p.exists() and str(path) in builtin_names():
        return builtin_config(str(path))
    text = p.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise _parse_error(text, str(path), e) from None
    return config_from_dict(data, str(path))


def builtin_names() -> list[str]:
    root = resources.files("geoseek") / "builtin"
    return sorted(f.name[:-5] for f in root.iterdir() if f.name.endswith(".json"))


def builtin_config(name: str) -> ExperimentConfig:
    f = resources.files("geoseek") / "builtin" / f"{name}.json"
    if not f.is_file():
        raise ConfigError(f"no built-in experiment named {name!r}")
    return config_from_dict(json.loads(f.read_text(encoding="utf-8")), f"builtin:{name}")


# single run ------------------------------------------------------------

@dataclass
class RunRecord:
    name: str
    space: str
    config: dict
    initial_cost: float
    final_cost: float
    final_distance: float
    t_enter: Optional[float]
    wall_seconds: float
    max_defect: Optional[float]
    samples: int
    complete: bool = True
    error: Optional[str] = None
    identity_distance: Optional[float] = None
    axis: Optional[str] = None
    axis_value: Optional[float] = None
    csv_path: Optional[str] = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.final_cost < 0:
            raise ValueError("final cost must be nonnegative")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["t_enter"] = "never" if self.t_enter is None else self.t_enter
        return d


def state_columns(space: str) -> list[str]:
    if space == "S1":
        return ["theta"]
    if space == "R1":
        return ["x"]
    rows = 3
    cols = 3 if space == "SO3" else 4
    return [f"g{i + 1}{j + 1}" for i in range(rows) for j in range(cols)]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def trajectory_csv(traj: Trajectory, space: str) -> str:
    """CSV text: header, one row per sample, LF line ends, 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "cost", "dist_to_target", *state_columns(space)])
    for t, x, c, d in traj.samples():
        x = np.asarray(x, dtype=float)
        flat = x[:3].ravel() if x.ndim == 2 else x.ravel()
        w.writerow([_fmt(t), _fmt(c), _fmt(d), *map(_fmt, flat)])
    if not traj.complete:
        buf.write(f"# INCOMPLETE: {traj.error}\n")
    return buf.getvalue()


PLOT_TEMPLATE = '''"""Plot {name}: cost, distance to target and state entries against time."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{csv}"
with open(path, newline="") as fh:
    rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
head, data = rows[0], [[float(v) for v in r] for r in rows[1:]]
cols = list(zip(*data))
fig, ax = plt.subplots(3, 1, sharex=True, figsize=(7, 8))
ax[0].plot(cols[0], cols[1]); ax[0].set_ylabel("cost")
ax[1].plot(cols[0], cols[2]); ax[1].set_ylabel("dist_to_target")
for k in range(3, len(head)):
    ax[2].plot(cols[0], cols[k], label=head[k])
ax[2].set_xlabel("t"); ax[2].legend(ncol=4, fontsize="small")
fig.tight_layout()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=120)
'''


def _write_text(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _summarise(cfg: ExperimentConfig, traj: Trajectory, wall: float, error=None) -> RunRecord:
    ident = None
    if cfg.is_group and len(traj):
        ident = lie.raw_group_distance(traj.states[-1], np.eye(GroupTag(cfg.space).matrix_size),
                                       GroupTag(cfg.space))
    defects = traj.defects
    return RunRecord(
        name=cfg.name, space=cfg.space, config=cfg.to_dict(),
        initial_cost=float(traj.costs[0]), final_cost=float(traj.costs[-1]),
        final_distance=float(traj.dists[-1]),
        t_enter=_enter_time(traj.times, traj.dists, cfg.radius),
        wall_seconds=wall,
        max_defect=None if defects is None else float(defects.max()),
        samples=len(traj), complete=traj.complete, error=error,
        identity_distance=ident,
    )


def run_experiment(cfg: ExperimentConfig, out_dir=None, write: bool = True) -> RunRecord:
    """Integrate the ES loop; write CSV, summary JSON and a plot script.

    Integration errors do not raise: the partial trajectory is written with
    a trailing ``# INCOMPLETE`` line and the record has ``complete=False``.
    """
    es = cfg.es_field()
    x0 = cfg.state(cfg.initial)
    start = time.perf_counter()
    error = None
    try:
        traj = integrate(es, x0, cfg.integrator(), description=f"ES loop, {cfg.name}")
    except (IntegrationDivergedError, ChartExitError) as e:
        traj, error = e.trajectory, f"{type(e).__name__}: {e}"
    wall = time.perf_counter() - start
    rec = _summarise(cfg, traj, wall, error)
    if write:
        out = Path(out_dir) if out_dir is not None else Path.cwd()
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / (cfg.output or f"{cfg.name}.csv")
        _write_text(csv_path, trajectory_csv(traj, cfg.space))
        stem = csv_path.with_suffix("")
        rec.csv_path = str(csv_path)
        _write_text(Path(f"{stem}.summary.json"), json.dumps(rec.to_dict(), indent=2, sort_keys=True) + "\n")
        _write_text(Path(f"{stem}_plot.py"), PLOT_TEMPLATE.format(name=cfg.name, csv=csv_path.name))
    return rec


# sweeps ----------------------------------------------------------------

@dataclass
class SweepResult:
    axis: str
    values: tuple
    records: list
    notes: list = field(default_factory=list)
    slope: Optional[float] = None
    corrector_sups: Optional[tuple] = None
    corrector_ratios: Optional[tuple] = None


def _sweep_config(cfg: ExperimentConfig, axis: str, v: float) -> ExperimentConfig:
    suffix = f"_{axis}_{v:g}"
    out = Path(cfg.output or f"{cfg.name}.csv")
    kw = {"output": f"{out.stem}{suffix}{out.suffix or '.csv'}"}
    if axis == "amplitude":
        kw["amplitudes"] = cfg.dither().with_max_amplitude(v).amplitudes
    elif axis == "omega":
        kw["omega"] = float(v)
    else:
        kw["step"] = float(v)
    new = cfg.replace(**kw)
    return config_from_dict(new.to_dict(), f"{cfg.name}{suffix}")


def _corrector_window(cfg: ExperimentConfig, values) -> IntegratorConfig:
    # one common sampling grid for every omega: two periods of the slowest dither
    base = cfg.dither()
    periods = [base.with_omega(v).period for v in values]
    ratio = math.ceil(max(periods) / min(periods))
    n = 128 * ratio
    horizon = 2.0 * max(periods)
    return IntegratorConfig(horizon / n, horizon, Method.CHART_RK4, cfg.t0, 1)


def _run_one(job):
    cfg, axis, v, out_dir, write, extra = job
    try:
        cfg = _sweep_config(cfg, axis, v)
        rec = run_experiment(cfg, out_dir, write)
    except Exception as e:  # per-run errors are recorded, the sweep continues
        return RunRecord(cfg.name, cfg.space, cfg.to_dict(), 0.0, 0.0, math.nan, None, 0.0, None, 0,
                         complete=False, error=f"{type(e).__name__}: {e}", axis=axis, axis_value=float(v))
    rec.axis, rec.axis_value = axis, float(v)
    es = cfg.es_field()
    x0 = cfg.state(cfg.initial)
    try:
        if extra == "residual":
            rec.extras["residual"] = averaging_residual(es, es.cost, [x0]).residual
        elif extra is not None:
            _, d = corrector_distances(es, x0, extra)
            rec.extras["corrector_sup"] = float(d.max())
    except Exception as e:
        rec.extras["analysis_error"] = f"{type(e).__name__}: {e}"
    return rec


def sweep_workers(n_jobs: int) -> int:
    cap = os.environ.get("GEOSEEK_THREADS")
    try:
        limit = int(cap) if cap else (os.cpu_count() or 1)
    except ValueError:
        limit = os.cpu_count() or 1
    return max(1, min(n_jobs, limit))


def run_sweep(cfg: ExperimentConfig, axis: str, values, out_dir=None, write: bool = True,
              workers: Optional[int] = None) -> SweepResult:
    """Independent runs along one axis.

    ``amplitude`` values set ``max a_i`` and add the residual slope; ``omega``
    values add the sup corrector distance per run and consecutive ratios.
    """
    if axis not in AXES:
        raise ConfigError(f"axis must be one of {', '.join(AXES)}")
    values = tuple(float(v) for v in values)
    if not values:
        raise ConfigError("no sweep values")
    extra = None
    notes = []
    if axis == "amplitude":
        extra = "residual"
    elif axis == "omega":
        if cfg.is_group:
            notes.append("corrector flow is available on chart spaces only")
        else:
            extra = _corrector_window(cfg, values)
    jobs = [(cfg, axis, v, out_dir, write, extra) for v in values]
    n = sweep_workers(len(jobs)) if workers is None else max(1, workers)
    if n == 1:
        records = [_run_one(j) for j in jobs]
    else:
        with cf.ProcessPoolExecutor(max_workers=n) as ex:
            records = list(ex.map(_run_one, jobs))

    res = SweepResult(axis, values, records, notes)
    if len(values) < 2:
        res.notes.append("insufficient points: a sweep needs at least 2 values for a slope or ratio")
        return res
    if axis == "amplitude":
        r = [rec.extras.get("residual", math.nan) for rec in records]
        if all(np.isfinite(r)) and min(r) >= 1e-12:
            res.slope = _loglog_slope(values, r)
        else:
            res.notes.append(str(DegenerateFitError("residual at the rounding floor or missing; no slope")))
    elif extra is not None:
        sups = tuple(rec.extras.get("corrector_sup", math.nan) for rec in records)
        res.corrector_sups = sups
        res.corrector_ratios = tuple(b / a for a, b in zip(sups, sups[1:]))
    return res


# summaries -------------------------------------------------------------

SUMMARY_COLUMNS = ("name", "axis", "value", "initial_cost", "final_cost", "final_distance",
                   "identity_distance", "t_enter", "max_defect", "status")


def _g6(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, str):
        return v
    return format(float(v), ".6g")


def _summary_row(r: RunRecord) -> dict:
    return {
        "name": r.name,
        "axis": r.axis or "-",
        "value": _g6(r.axis_value),
        "initial_cost": _g6(r.initial_cost),
        "final_cost": _g6(r.final_cost),
        "final_distance": _g6(r.final_distance),
        "identity_distance": _g6(r.identity_distance),
        "t_enter": "never" if r.t_enter is None else _g6(r.t_enter),
        "max_defect": _g6(r.max_defect),
        "status": "ok" if r.complete else "incomplete",
    }


def emit_summary(records) -> tuple[str, str]:
    """Fixed-width table and JSON text, ordered by name then axis value."""
    recs = sorted(records, key=lambda r: (r.name, r.axis_value if r.axis_value is not None else -math.inf))
    rows = [_summary_row(r) for r in recs]
    widths = {c: max([len(c)] + [len(row[c]) for row in rows]) for c in SUMMARY_COLUMNS}
    lines = ["  ".join(c.ljust(widths[c]) for c in SUMMARY_COLUMNS).rstrip()]
    lines += ["  ".join(row[c].ljust(widths[c]) for c in SUMMARY_COLUMNS).rstrip() for row in rows]
    table = "\n".join(lines) + "\n"
    return table, json.dumps(rows, indent=2) + "\n"


def list_experiments() -> list[tuple[str, str]]:
    out = []
    for name in builtin_names():
        c = builtin_config(name)
        out.append((name, f"{c.space}, cost {c.cost['kind']}, omega {c.omega:g}, t_f {c.horizon:g}"))
    return out


__all__ = [
    "ExperimentConfig", "RunRecord", "SweepResult", "config_from_dict", "load_config",
    "builtin_names", "builtin_config", "run_experiment", "run_sweep", "emit_summary",
    "trajectory_csv", "state_columns", "list_experiments",
]
