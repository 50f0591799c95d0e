"""``geoseek`` command line.

Exit codes: 0 success, 1 config or validation error, 2 integration
divergence (partial CSV kept), 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError
from .experiments import (AXES, emit_summary, list_experiments, load_config, run_experiment,
                          run_sweep)

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3


def _values(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty value list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geoseek", description="Geodesic-dither extremum seeking experiments")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment and write its CSV")
    r.add_argument("config", help="config JSON path or built-in experiment name")
    r.add_argument("--out", default=".", help="output directory (default: current)")

    s = sub.add_parser("sweep", help="run an experiment over a list of parameter values")
    s.add_argument("config")
    s.add_argument("--axis", required=True, choices=AXES)
    s.add_argument("--values", required=True, type=_values, help="comma-separated, e.g. 0.2,0.1,0.05")
    s.add_argument("--out", default=".")
    s.add_argument("--workers", type=int, default=None, help="override GEOSEEK_THREADS")

    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")

    sub.add_parser("list-experiments", help="list the built-in experiments")
    return p


def _write_summary(out: Path, stem: str, records) -> str:
    table, js = emit_summary(records)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{stem}.summary.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(table)
    with open(out / f"{stem}.records.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(js)
    return table


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    rec = run_experiment(cfg, args.out)
    table, _ = emit_summary([rec])
    print(table, end="")
    print(f"csv: {rec.csv_path}")
    if not rec.complete:
        print(f"integration stopped early: {rec.error}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    res = run_sweep(cfg, args.axis, args.values, args.out, workers=args.workers)
    out = Path(args.out)
    print(_write_summary(out, f"{cfg.name}_sweep_{args.axis}", res.records), end="")
    report = {"axis": res.axis, "values": list(res.values), "notes": res.notes}
    if res.slope is not None:
        report["residual_slope"] = float(f"{res.slope:.6g}")
        print(f"residual log-log slope: {res.slope:.6g}")
    if res.corrector_ratios is not None:
        report["corrector_sups"] = [float(f"{v:.6g}") for v in res.corrector_sups]
        report["corrector_ratios"] = [float(f"{v:.6g}") for v in res.corrector_ratios]
        print("corrector sup distance ratios: " + ", ".join(f"{v:.6g}" for v in res.corrector_ratios))
    for note in res.notes:
        print(f"note: {note}")
    with open(out / f"{cfg.name}_sweep_{args.axis}.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(report, indent=2) + "\n")
    for rec in res.records:
        if rec.error:
            print(f"{rec.name} {args.axis}={rec.axis_value:g}: {rec.error}", file=sys.stderr)
    return EXIT_DIVERGED if any(not r.complete for r in res.records) else EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"{cfg.name}: ok ({cfg.space}, {len(cfg.amplitudes)} dither components, "
          f"multipliers {', '.join(cfg.multipliers)})")
    return EXIT_OK


def _cmd_list(args) -> int:
    for name, desc in list_experiments():
        print(f"{name:14s} {desc}")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "validate": _cmd_validate,
            "list-experiments": _cmd_list}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
