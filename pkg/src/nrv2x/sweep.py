"""Parameter sweeps over the analytical, baseline and simulator engines, plus CSV I/O."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .baseline import BaselineParams, baseline_collision, baseline_latency
from .config import PRESETS, PRESET_ALIASES, ScenarioConfig
from .coupled import solve
from .errors import MalformedCSV, ModelError, NoConvergence, ValidationError
from .sim import run, run_batch

COLUMNS = (
    "axis_value", "engine", "status", "p_col", "latency_ms", "latency_slots",
    "p_s", "p_qe", "iterations", "residual", "ci_low", "ci_high", "mode",
)
AXES = ("rri", "n", "density", "intensity")
ENGINES = ("analytical", "baseline", "simulator")


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    engines: tuple = ("analytical", "baseline")
    seeds: tuple = (1,)
    duration_slots: int = 200_000
    latency_mode: str | None = None

    def __post_init__(self):
        problems = []
        if self.axis not in AXES:
            problems.append(f"axis must be one of {', '.join(AXES)}")
        if not self.values:
            problems.append("sweep needs at least one value")
        bad = [e for e in self.engines if e not in ENGINES]
        if bad or not self.engines:
            problems.append(f"engines must be drawn from {', '.join(ENGINES)}")
        if problems:
            raise ValidationError(problems)


def apply_axis(cfg: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    if axis == "rri":
        return cfg.replace(rri_ms=float(value))
    if axis == "n":
        return cfg.replace(n=int(value))
    if axis == "density":
        return cfg.replace(density_per_km=float(value), n=None)
    name = PRESET_ALIASES.get(str(value))
    if name not in PRESETS:
        raise ValidationError([f"unknown intensity {value!r}"])
    return cfg.replace(preset=name, **PRESETS[name])


def baseline_params(cfg: ScenarioConfig) -> BaselineParams:
    r_l, r_u = cfg.rc_range
    return BaselineParams(
        n=cfg.n_vehicles,
        p_rk=cfg.keep_probability,
        rc_mean=(r_l + r_u) / 2.0,
        csr_t=cfg.geometry().csr_t,
        rri=cfg.rri,
        t1=cfg.t1,
    )


def _num(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".12g")


def _row(value, engine, status, mode, **vals) -> dict:
    row = {c: "" for c in COLUMNS}
    row.update(axis_value=str(value), engine=engine, status=status, mode=mode)
    for k, v in vals.items():
        row[k] = _num(v)
    return row


def _analytical(cfg: ScenarioConfig, value) -> dict:
    mode = f"exponent={cfg.collision_exponent};form={cfg.scheduler_form}"
    sol = solve(cfg)
    status = "ok" if sol.converged else "no-convergence"
    return _row(
        value, "analytical", status, mode,
        p_col=sol.p_col, latency_ms=sol.latency_slots / cfg.slots_per_ms,
        latency_slots=sol.latency_slots, p_s=sol.p_s, p_qe=sol.p_qe,
        iterations=sol.iterations, residual=sol.residual,
    )


def _baseline(cfg: ScenarioConfig, value) -> dict:
    bp = baseline_params(cfg)
    p = baseline_collision(bp)
    lat = baseline_latency(bp, p, cfg.latency_mode)
    return _row(
        value, "baseline", "ok", f"latency={cfg.latency_mode}",
        p_col=p, latency_ms=lat / cfg.slots_per_ms, latency_slots=lat,
    )


def _simulator(cfg: ScenarioConfig, value, seeds, duration) -> dict:
    mode = f"reevaluation={'on' if cfg.reevaluation else 'off'};seeds={len(seeds)}"
    rep = run_batch(cfg, seeds, duration) if len(seeds) > 1 else run(cfg, seeds[0], duration)
    ci = rep.p_col_ci
    return _row(
        value, "simulator", "ok", mode,
        p_col=rep.p_col_hat, latency_ms=rep.latency_mean_slots / cfg.slots_per_ms,
        latency_slots=rep.latency_mean_slots, p_s=rep.p_s_hat,
        ci_low=max(0.0, rep.p_col_hat - ci), ci_high=min(1.0, rep.p_col_hat + ci),
    )


def _point(args) -> list[dict]:
    cfg, spec, value = args
    rows = []
    try:
        point = apply_axis(cfg, spec.axis, value)
        if spec.latency_mode:
            point = point.replace(latency_mode=spec.latency_mode)
        point.validate()
    except (ModelError, ValidationError) as exc:
        return [_row(value, e, f"error:{type(exc).__name__}", "") for e in spec.engines]
    for engine in spec.engines:
        try:
            if engine == "analytical":
                rows.append(_analytical(point, value))
            elif engine == "baseline":
                rows.append(_baseline(point, value))
            else:
                rows.append(_simulator(point, value, list(spec.seeds), spec.duration_slots))
        except (ModelError, NoConvergence, ValidationError) as exc:
            rows.append(_row(value, engine, f"error:{type(exc).__name__}", ""))
    return rows


def run_sweep(cfg: ScenarioConfig, spec: SweepSpec, jobs: int = 1) -> list[dict]:
    """Rows ordered by axis value, then engine as listed in ``spec``."""
    tasks = [(cfg, spec, v) for v in spec.values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_point, tasks))
    else:
        chunks = [_point(t) for t in tasks]
    return [row for chunk in chunks for row in chunk]


def write_csv(rows, fh) -> None:
    w = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise MalformedCSV("missing header")
    if tuple(reader.fieldnames) != COLUMNS:
        raise MalformedCSV(f"unexpected columns {reader.fieldnames}")
    rows = list(reader)
    for i, r in enumerate(rows, start=2):
        if None in r or any(v is None for v in r.values()):
            raise MalformedCSV(f"line {i}: wrong field count")
        if r["engine"] not in ENGINES:
            raise MalformedCSV(f"line {i}: unknown engine {r['engine']!r}")
    return rows


@dataclass
class Summary:
    rows: int
    failures: int
    lines: list = field(default_factory=list)

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _axis_key(v: str):
    try:
        return (0, float(v), v)
    except ValueError:
        return (1, 0.0, v)


def summarize(text: str) -> Summary:
    """Trend verdicts, proposed-to-baseline ratios and failure counts for a sweep CSV."""
    rows = read_csv(text)
    if not rows:
        return Summary(0, 0, ["no rows"])
    failures = sum(1 for r in rows if r["status"] != "ok")
    out = [f"rows: {len(rows)}", f"flagged rows: {failures}"]
    by_engine: dict[str, dict[str, float]] = {}
    for r in rows:
        if r["status"] == "ok" and r["p_col"] != "":
            by_engine.setdefault(r["engine"], {})[r["axis_value"]] = float(r["p_col"])
    for engine in ENGINES:
        pts = by_engine.get(engine)
        if not pts:
            continue
        keys = sorted(pts, key=_axis_key)
        vals = [pts[k] for k in keys]
        diffs = [b - a for a, b in zip(vals, vals[1:])]
        if not diffs:
            verdict = "single point"
        elif all(d < 0 for d in diffs):
            verdict = "strictly decreasing"
        elif all(d > 0 for d in diffs):
            verdict = "strictly increasing"
        elif all(d <= 0 for d in diffs):
            verdict = "non-increasing"
        elif all(d >= 0 for d in diffs):
            verdict = "non-decreasing"
        else:
            verdict = "not monotone"
        out.append(f"{engine} p_col over axis: {verdict}")
        ratios = [max(a, b) / min(a, b) for a, b in zip(vals, vals[1:]) if min(a, b) > 0]
        if ratios:
            out.append(f"{engine} max adjacent p_col ratio: {max(ratios):.4g}")
    prop, base = by_engine.get("analytical", {}), by_engine.get("baseline", {})
    shared = [k for k in prop if k in base and base[k] > 0]
    if shared:
        ratios = [prop[k] / base[k] for k in shared]
        out.append(f"proposed/baseline p_col ratio: min {min(ratios):.4g}, max {max(ratios):.4g}")
        below = sum(1 for k in shared if prop[k] < base[k])
        out.append(f"points with proposed below baseline: {below}/{len(shared)}")
    return Summary(len(rows), failures, out)
