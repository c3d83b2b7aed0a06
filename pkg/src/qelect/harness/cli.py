"""Command-line entry point: ``run``, ``sweep`` and ``verify``.

Exit status is 0 when every verdict passes, 1 when any fails and 2 when
the input file is rejected.
"""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import ConfigError
from .claims import verify
from .experiments import run_sweep
from .io import dumps, render_csv, write_csv, write_jsonl
from .scenario import RUN_COLUMNS, run_scenario

SUMMARY_COLUMNS = ["seed", "round", "leader", "terminated", "messages", "causal_time", "events", "path"]
VERDICT_COLUMNS = ["claim", "name", "measured", "bound", "passed", "note"]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.2f}"
    return str(value)


def table(rows, columns, limit: int = 40) -> str:
    """Aligned plain-text table of the first ``limit`` rows."""
    cells = [[str(c) for c in columns]]
    for r in rows[:limit]:
        cells.append([_fmt(r.get(c)) for c in columns])
    widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
    lines = ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    if len(rows) > limit:
        lines.append(f"... {len(rows) - limit} more rows")
    return "\n".join(lines)


def _load(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", "") from None


def cmd_run(args) -> int:
    report = run_scenario(_load(args.config), seed=args.seed, limit=args.limit,
                          trace=args.trace_out is not None)
    if args.csv_out:
        write_csv(args.csv_out, report.rows, RUN_COLUMNS)
    if args.trace_out:
        write_jsonl(args.trace_out, report.trace)
    print(table(report.rows, SUMMARY_COLUMNS))
    agg = report.aggregates
    if agg["messages"]:
        m = agg["messages"]
        print(f"\nmessages mean={m['mean']:.2f} min={m['min']} max={m['max']}")
    for v in report.verdicts:
        print(v.line())
    return 0 if report.passed else 1


def cmd_sweep(args) -> int:
    result = run_sweep(_load(args.config), seed=args.seed, limit=args.limit)
    if args.csv_out:
        with open(args.csv_out, "w") as fh:
            fh.write(result.csv())
    if args.trace_out:
        records = [{"type": "sweep-row", **r} for r in result.rows]
        records += [{"type": "slope", "protocol": k, "slope": v}
                    for k, v in result.extra["slopes"].items()]
        records += [{"type": "error", **e} for e in result.extra["errors"]]
        write_jsonl(args.trace_out, records)
    print(table(result.rows, result.columns))
    print()
    for label, slope in result.extra["slopes"].items():
        print(f"slope {label}: {slope:.4f}")
    for v in result.verdicts:
        print(v.line())
    return 0 if result.passed else 1


def cmd_verify(args) -> int:
    claims = {"suite": "acceptance"} if args.claims == "acceptance" else _load(args.claims)

    def progress(name, verdicts):
        for v in verdicts:
            print(f"[{name}] {v.line()}", flush=True)

    results = verify(claims, seed=args.seed, limit=args.limit, progress=progress)
    rows = [{"claim": name, **v.to_json()} for name, vs in results for v in vs]
    if args.csv_out:
        with open(args.csv_out, "w") as fh:
            fh.write(render_csv(
                [{**r, "measured": dumps(r["measured"]), "bound": dumps(r["bound"])} for r in rows],
                VERDICT_COLUMNS))
    if args.trace_out:
        write_jsonl(args.trace_out, [{"type": "verdict", **r} for r in rows])
    failed = sum(1 for r in rows if r["passed"] is False)
    print(f"\n{len(rows) - failed}/{len(rows)} verdicts passed")
    return 0 if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qelect", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the seed(s) in the file")
    common.add_argument("--trace-out", metavar="PATH", help="write a JSONL trace")
    common.add_argument("--csv-out", metavar="PATH", help="write CSV metrics")
    common.add_argument("--limit", type=int, default=None, metavar="EVENTS",
                        help="event limit per engine run")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="run one scenario file")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", parents=[common], help="message-complexity sweep")
    p.add_argument("config")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("verify", parents=[common],
                       help="evaluate a claims file ('acceptance' runs the built-in suite)")
    p.add_argument("claims")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config-error at {exc.pointer or '/'}: {exc.message}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
