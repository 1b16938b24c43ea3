"""Budget sweep over bundled topologies, written as CSV+JSON and then replayed through validate.

    python scripts/run_sweep.py --topology Att Agis --time-limit 300 --out results/sweep
"""

import argparse

from sdnplan import bench


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--topology", nargs="+", default=["Att", "Agis"])
    ap.add_argument("--m-percent", type=float, nargs="+", default=list(bench.DEFAULT_M_PERCENTS))
    ap.add_argument("--time-limit", type=float, default=300.0)
    ap.add_argument("--workers", type=int, default=None, help="process count (default: PLANNER_THREADS or CPUs)")
    ap.add_argument("--out", default="results/sweep")
    args = ap.parse_args()

    cfg = bench.SweepConfig(tuple(args.topology), m_percents=tuple(args.m_percent), time_limit=args.time_limit)
    result = bench.run_sweep(cfg, workers=args.workers)
    csv_path, json_path = bench.write_results(result, args.out)

    for name in cfg.topologies:
        rows = [r for r in result.rows if r.topology == name and not r.status.startswith("error")]
        print(f"\n{name}")
        print(f"  {'algorithm':<12}{'flows':>8}{'ctrl':>7}{'sc_delay':>11}{'wall ms':>10}")
        for algo in cfg.algorithms:
            sel = [r for r in rows if r.algorithm == algo]
            if not sel:
                continue
            mean = lambda col: sum(getattr(r, col) for r in sel) / len(sel)
            print(f"  {algo:<12}{mean('flows'):>8.1f}{mean('n_controllers'):>7.2f}"
                  f"{mean('sc_delay'):>11.0f}{mean('wall_time'):>10.1f}")

    problems = bench.validate_bundle(json_path)
    print(f"\nwrote {csv_path} and {json_path}; validate: {'ok' if not problems else problems}")


if __name__ == "__main__":
    main()
