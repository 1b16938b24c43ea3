"""Command-line front end: plan, sweep, compare, validate."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench
from .errors import PlannerError, ValidationFailure
from .instance import build_instance, evaluate
from .topology import DISTANCE_MODES, FORMATS

EPILOG_SWEEP = "CSV columns: " + ", ".join(bench.CSV_COLUMNS) + \
    ". wall_time is in milliseconds; gap is (bound - value) / max(1, |value|)."


def _common(p: argparse.ArgumentParser, multi: bool) -> None:
    if multi:
        p.add_argument("--topology", action="append", required=True,
                       help="topology file or bundled name (repeatable)")
        p.add_argument("--m-percent", type=float, nargs="+", default=None,
                       help="budget fractions of gamma*N (default 0.05 .. 0.50)")
    else:
        p.add_argument("--topology", required=True, help="topology file or bundled name")
        p.add_argument("--m-percent", type=float, default=0.5,
                       help="budget as a fraction of gamma*N (default 0.5)")
    p.add_argument("--capacity", type=int, default=50, help="controller capacity A (default 50)")
    p.add_argument("--gamma", type=int, default=4, help="switch/controller cost ratio (default 4)")
    p.add_argument("--time-limit", type=float, default=None, help="seconds per exact solve")
    p.add_argument("--seed", type=int, default=0, help="recorded for provenance")
    p.add_argument("--format", choices=FORMATS, default=None,
                   help="topology file format (default: from the file suffix)")
    p.add_argument("--distance", choices=DISTANCE_MODES, default="geodesic")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdnplan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="solve one instance and print the plan with its metrics")
    _common(p, multi=False)
    p.add_argument("--algo", choices=bench.ALGORITHMS, default="mapfirst")
    p.add_argument("--budget", type=int, default=None, help="explicit budget M, overrides --m-percent")
    p.add_argument("--out", default=None, help="also write the JSON document here")

    p = sub.add_parser("sweep", help="run algorithms over a budget grid", epilog=EPILOG_SWEEP)
    _common(p, multi=True)
    p.add_argument("--algo", choices=bench.ALGORITHMS, nargs="+", default=list(bench.ALGORITHMS))
    p.add_argument("--out", required=True, help="output stem; writes <out>.csv and <out>.json")

    p = sub.add_parser("compare", help="original vs strengthened formulation: bounds, nodes, time")
    _common(p, multi=True)
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")

    p = sub.add_parser("validate", help="replay a results bundle and check every stored metric")
    p.add_argument("results", help="JSON bundle written by sweep")
    return parser


def cmd_plan(args) -> int:
    topo = bench.resolve_topology(args.topology, args.format)
    m = None if args.budget is not None else args.m_percent
    inst = build_instance(topo, m, args.capacity, args.gamma, budget=args.budget,
                          distance=args.distance)
    plan, status, gap, wall = bench.run_algorithm(inst, args.algo, args.time_limit)
    doc = {
        "topology": topo.name, "algorithm": args.algo, "m_percent": m, "budget": inst.budget,
        "capacity": inst.capacity, "gamma": inst.gamma, "seed": args.seed,
        "status": status, "gap": gap, "wall_time_ms": wall * 1000.0,
        "plan": plan.to_dict(), "metrics": evaluate(inst, plan).to_dict(),
    }
    text = json.dumps(doc, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_sweep(args) -> int:
    kwargs = {} if args.m_percent is None else {"m_percents": tuple(args.m_percent)}
    cfg = bench.SweepConfig(tuple(args.topology), capacity=args.capacity, gamma=args.gamma,
                            algorithms=tuple(args.algo), time_limit=args.time_limit, seed=args.seed,
                            distance=args.distance, format=args.format, **kwargs)
    result = bench.run_sweep(cfg)
    csv_path, json_path = bench.write_results(result, args.out)
    errors = sum(r.status.startswith("error") for r in result.rows)
    print(f"{len(result.rows)} rows ({errors} errors) -> {csv_path}, {json_path}")
    return 0


def cmd_compare(args) -> int:
    rows = bench.compare_formulations(args.topology, tuple(args.m_percent or (0.5,)), args.capacity,
                                      args.gamma, args.time_limit, args.distance, args.format)
    text = bench.compare_to_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_validate(args) -> int:
    try:
        bench.validate_or_raise(args.results)
    except ValidationFailure as exc:
        for line in exc.problems:
            print(line)
        raise
    print("ok")
    return 0


COMMANDS = {"plan": cmd_plan, "sweep": cmd_sweep, "compare": cmd_compare, "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except PlannerError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
