"""Original vs strengthened formulation, and the effect of the branching order.

Prints root LP bound, nodes and wall time for each (topology, budget, formulation, order).
"""

import argparse

from sdnplan.exact import Limits, branch_and_bound
from sdnplan.instance import build_instance
from sdnplan.topology import bundled, load_topology

ORDERS = (("x", "y", "z"), ("y", "x", "z"), ("x", "z", "y"))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--topology", nargs="+", default=["Att", "Sunet", "Agis"])
    ap.add_argument("--m-percent", type=float, nargs="+", default=[0.5])
    ap.add_argument("--time-limit", type=float, default=60.0)
    ap.add_argument("--orders", action="store_true", help="also try every branching order")
    args = ap.parse_args()

    orders = ORDERS if args.orders else ORDERS[:1]
    print("topology,m_percent,formulation,order,status,root_bound,incumbent,nodes,wall_s")
    for name in args.topology:
        topo = load_topology(bundled(name))
        for m in args.m_percent:
            inst = build_instance(topo, m)
            for f in ("P", "P_PRIME"):
                for order in orders:
                    rep = branch_and_bound(inst, f, Limits(time=args.time_limit), branching=order)
                    print(f"{name},{m},{f},{''.join(order)},{rep.status},{rep.root_bound:.5f},"
                          f"{rep.incumbent_value:.5f},{rep.nodes_explored},{rep.wall_time:.2f}", flush=True)


if __name__ == "__main__":
    main()
