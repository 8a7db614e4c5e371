"""Command-line entry point: ``nrv2x {solve,sweep,simulate,check,summarize}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ScenarioConfig, parse_config
from .errors import MalformedCSV, ModelError, ParseError, ValidationError
from .sweep import ENGINES, SweepSpec, baseline_params, rows_to_csv, run_sweep, summarize
from .baseline import baseline_collision, baseline_latency
from .coupled import solve
from .queue_model import truncation_bound
from .sim import run, run_batch

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def load_config(args) -> ScenarioConfig:
    text = Path(args.config).read_text() if args.config else ""
    extra = list(args.set or [])
    if getattr(args, "literal_latency", False):
        extra.append("latency_mode=literal")
    if getattr(args, "no_reevaluation", False):
        extra.append("reevaluation=false")
    if extra:
        text = text + "\n" + "\n".join(extra)
    return parse_config(text)


def _fmt(v) -> str:
    return format(v, ".10g") if isinstance(v, float) else str(v)


def cmd_solve(args) -> int:
    cfg = load_config(args)
    sol = solve(cfg)
    bp = baseline_params(cfg)
    base_col = baseline_collision(bp)
    base_lat = baseline_latency(bp, base_col, cfg.latency_mode)
    spm = cfg.slots_per_ms
    report = {
        "converged": sol.converged,
        "iterations": sol.iterations,
        "residual": sol.residual,
        "p_s": sol.p_s,
        "p_qe": sol.p_qe,
        "p_arr": sol.p_arr,
        "p_re": sol.p_re,
        "p_csr": sol.p_csr,
        "p_col": sol.p_col,
        "latency_ms": sol.latency_slots / spm,
        "latency_slots": sol.latency_slots,
        "queue_truncation_bound": truncation_bound(
            sol.queue_inputs.alpha, sol.queue_inputs.beta, cfg.queue_capacity
        ),
        "baseline_p_col": base_col,
        "baseline_latency_ms": base_lat / spm,
        "flags": ",".join(sol.flags) or "none",
    }
    for k, v in report.items():
        print(f"{k}={_fmt(v)}")
    if args.out:
        spec = SweepSpec(axis="rri", values=(cfg.rri_ms,), engines=("analytical", "baseline"))
        Path(args.out).write_text(rows_to_csv(run_sweep(cfg, spec)))
    return EXIT_OK if sol.converged or args.tolerate_failures else EXIT_FAILED


def cmd_sweep(args) -> int:
    cfg = load_config(args)
    engines = tuple(_list(args.engines))
    seeds = tuple(_ints(args.seeds)) if args.seeds else (args.seed,)
    spec = SweepSpec(
        axis=args.axis,
        values=tuple(_list(args.values)),
        engines=engines,
        seeds=seeds,
        duration_slots=args.duration_slots,
    )
    rows = run_sweep(cfg, spec, jobs=args.jobs)
    text = rows_to_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    failed = sum(r["status"] != "ok" for r in rows)
    if failed:
        print(f"{failed} engine run(s) failed", file=sys.stderr)
    return EXIT_OK if not failed or args.tolerate_failures else EXIT_FAILED


def cmd_simulate(args) -> int:
    cfg = load_config(args)
    seeds = _ints(args.seeds) if args.seeds else [args.seed]
    if len(seeds) > 1:
        rep = run_batch(cfg, seeds, args.duration_slots)
        fields = {"seeds": ",".join(map(str, seeds))}
    else:
        rep = run(cfg, seeds[0], args.duration_slots, trace_capacity=args.trace_capacity if args.trace else 0)
        fields = {"seed": seeds[0]}
        if args.trace:
            Path(args.trace).write_text("".join(line + "\n" for line in rep.trace_lines()))
        fields["conservation"] = "ok" if rep.conservation_ok() else "VIOLATED"
    fields.update(
        n=rep.n,
        reevaluation=cfg.reevaluation,
        p_col_hat=rep.p_col_hat,
        p_col_ci=rep.p_col_ci,
        p_col_first_use_hat=rep.p_col_first_hat,
        p_s_hat=rep.p_s_hat,
        p_re_trigger_hat=rep.p_re_trigger_hat,
        latency_mean_ms=rep.latency_mean_slots / cfg.slots_per_ms,
        latency_p95_ms=rep.latency_p95_slots / cfg.slots_per_ms,
    )
    for k, v in fields.items():
        print(f"{k}={_fmt(v)}")
    return EXIT_OK


def cmd_check(args) -> int:
    from .checks import run_checks

    results = run_checks()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_FAILED


def cmd_summarize(args) -> int:
    s = summarize(Path(args.csv).read_text())
    sys.stdout.write(s.text())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nrv2x", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def scenario(sp):
        sp.add_argument("--config", help="key=value scenario file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        sp.add_argument("--literal-latency", action="store_true", help="baseline latency series as printed")
        sp.add_argument("--no-reevaluation", action="store_true", help="disable re-evaluation")
        sp.add_argument("--tolerate-failures", action="store_true", help="exit 0 even if an engine failed")

    s = sub.add_parser("solve", help="solve one scenario analytically")
    scenario(s)
    s.add_argument("--out", help="also write analytical and baseline rows as CSV")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("sweep", help="sweep one axis and write CSV")
    scenario(s)
    s.add_argument("--axis", required=True, choices=("rri", "n", "density", "intensity"))
    s.add_argument("--values", required=True, help="comma-separated axis values")
    s.add_argument("--engines", default="analytical,baseline", help=f"subset of {','.join(ENGINES)}")
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--seeds", help="comma-separated simulator seeds")
    s.add_argument("--duration-slots", type=int, default=200_000)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", help="CSV path (stdout if omitted)")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("simulate", help="Monte Carlo run")
    scenario(s)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--seeds", help="comma-separated seeds for a pooled batch")
    s.add_argument("--duration-slots", type=int, default=200_000)
    s.add_argument("--trace", help="write per-event trace lines to this file")
    s.add_argument("--trace-capacity", type=int, default=100_000)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("check", help="run the fast invariant suite")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("summarize", help="trend report for a sweep CSV")
    s.add_argument("csv")
    s.set_defaults(func=cmd_summarize)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError, MalformedCSV) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
