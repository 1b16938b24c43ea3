"""Certified-optimal solving by LP-based branch-and-bound, plus an exhaustive oracle."""

from __future__ import annotations

import heapq
import json
import math
import time
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterator

import numpy as np

from .errors import InvalidPartitionData, TooLarge
from .heuristics import greedy_commit, mapfirst, rank_mappings, z_block
from .instance import Plan, ProblemInstance, check_feasibility, sc_delay
from .lp import (Formulation, LpSession, as_formulation, assemble_lp, objective_of, solve_lp, x_index,
                 y_index, z_index)

INT_TOL = 1e-6
PRUNE_TOL = 1e-9
OPTIMAL_GAP = 1e-6
BRUTE_FORCE_MAX_N = 8


@dataclass(frozen=True)
class Limits:
    time: float | None = None      # seconds
    nodes: int | None = None
    gap: float = 0.0               # stop once the relative gap is at most this


@dataclass
class SolveReport:
    status: str                    # optimal | feasible_time_limit | infeasible
    best_plan: Plan | None
    incumbent_value: float
    best_bound: float
    gap: float
    nodes_explored: int
    lp_solves: int
    wall_time: float               # seconds
    formulation: str = ""
    root_bound: float = float("nan")
    target_flows: int | None = None
    stages: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k not in ("best_plan", "stages")}
        out["best_plan"] = self.best_plan.to_dict() if self.best_plan is not None else None
        out["stages"] = [s.to_dict() for s in self.stages]
        for k in ("incumbent_value", "best_bound", "gap", "root_bound"):
            if not math.isfinite(out[k]):
                out[k] = None
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


BRANCH_ORDER = ("x", "y", "z")


def _flow_gcd(inst: ProblemInstance) -> int:
    nz = [int(v) for v in inst.r if v != 0]
    return reduce(math.gcd, nz) if nz else 1


def oversized_fixings(inst: ProblemInstance) -> dict[int, int]:
    """Switches carrying more flows than one controller accepts can never be upgraded.

    The relaxation still lets them in fractionally; pinning their x and z
    columns to zero removes that slack without cutting off any integral plan.
    """
    n = inst.n
    fix = {}
    for i in np.flatnonzero(inst.r > inst.capacity):
        fix[x_index(n, int(i))] = 0
        for j in range(n):
            fix[z_index(n, int(i), j)] = 0
    return fix


def plan_from_values(inst: ProblemInstance, values) -> Plan:
    n = inst.n
    up = frozenset(i for i in range(n) if values[x_index(n, i)] > 0.5)
    ctl = frozenset(j for j in range(n) if values[y_index(n, j)] > 0.5)
    z = z_block(inst, values)
    maps = frozenset((int(i), int(j)) for i, j in zip(*np.nonzero(z > 0.5)))
    return Plan(up, ctl, maps)


def _branch_variable(inst: ProblemInstance, values, order=BRANCH_ORDER) -> int | None:
    """Most fractional variable of the first block in ``order`` holding one; lowest index on ties."""
    n = inst.n
    frac = np.minimum(values, 1.0 - values)
    spans = {"x": (0, n), "y": (n, 2 * n), "z": (2 * n, n * n + 2 * n)}
    for name in order:
        lo, hi = spans[name]
        block = frac[lo:hi]
        k = int(np.argmax(block))
        if block[k] > INT_TOL:
            return lo + k
    return None


def branch_and_bound(inst: ProblemInstance, f=Formulation.P_PRIME, limits: Limits | None = None,
                     target_flows: int | None = None, engine: str = "highs",
                     initial_plans=(), seed_mapfirst: bool = True,
                     branching: tuple[str, ...] = BRANCH_ORDER) -> SolveReport:
    """Maximize formulation ``f`` over binary plans.

    Best-bound node selection with depth-first plunging after every new
    incumbent; branching on the most fractional x, then y, then z. Each node
    LP is also rounded with the MapFirst scan-and-commit routine.
    """
    f = as_formulation(f)
    limits = limits or Limits()
    start = time.perf_counter()
    base = assemble_lp(inst, f, target_flows)
    presolved = oversized_fixings(inst)
    if presolved:
        base = base.with_fixings(presolved)
    session = LpSession(base) if engine == "highs" else None

    def node_lp(fix):
        if session is None:
            return solve_lp(base.with_fixings(fix), engine)
        lo, hi = base.lower.copy(), base.upper.copy()
        for k, v in fix.items():
            lo[k] = hi[k] = float(v)
        return session.solve(lo, hi)
    integral_obj = f in (Formulation.P1, Formulation.P1_PRIME)
    combined_obj = f in (Formulation.P, Formulation.P_PRIME)
    step = _flow_gcd(inst)
    # largest delay penalty any plan can pay: value > flows - max_penalty
    max_penalty = inst.lam * float(inst.d.max(axis=1).sum()) if inst.n else 0.0

    best: Plan | None = None
    best_val = -math.inf

    def offer(plan: Plan) -> bool:
        nonlocal best, best_val
        if plan is None or check_feasibility(inst, plan):
            return False
        if target_flows is not None and sum(int(inst.r[i]) for i in plan.upgraded) != target_flows:
            return False
        val = objective_of(inst, f, plan)
        if val > best_val + PRUNE_TOL:
            best, best_val = plan, val
            return True
        return False

    def effective(bound: float) -> float:
        # flows are multiples of the flow gcd, which caps the objective a node can reach
        if integral_obj:
            return math.floor(bound / step + 1e-6) * step
        if combined_obj:
            return min(bound, math.floor((bound + max_penalty) / step + 1e-6) * step)
        return bound

    nodes = lp_solves = 0
    root = node_lp({})
    lp_solves += 1
    nodes += 1
    if root.status == "infeasible":
        return SolveReport("infeasible", None, -math.inf, -math.inf, math.inf, nodes, lp_solves,
                           time.perf_counter() - start, f.value, -math.inf, target_flows)
    root_bound = root.objective_value

    offer(Plan())
    for p in initial_plans:
        offer(p)
    if seed_mapfirst:
        offer(mapfirst(inst, engine))

    counter = 0
    heap: list = []
    plunge_next = None
    plunging = False
    status = "optimal"
    current = (effective(root_bound), {}, root)
    while True:
        if current is None:
            if plunge_next is not None:
                current, plunge_next = plunge_next, None
            else:
                plunging = False
                if not heap:
                    break
                neg, _, fix = heapq.heappop(heap)
                current = (-neg, fix, None)
        parent_bound, fix, sol = current
        current = None
        if parent_bound <= best_val + PRUNE_TOL:
            continue
        open_bound = max([parent_bound] + [-h[0] for h in heap[:1]])
        gap = (open_bound - best_val) / max(1.0, abs(best_val))
        if limits.gap > 0 and gap <= limits.gap:
            counter += 1
            heapq.heappush(heap, (-parent_bound, counter, fix))
            status = "optimal" if gap <= OPTIMAL_GAP else "feasible_time_limit"
            break
        if (limits.time is not None and time.perf_counter() - start > limits.time) or \
                (limits.nodes is not None and nodes >= limits.nodes):
            counter += 1
            heapq.heappush(heap, (-parent_bound, counter, fix))
            status = "feasible_time_limit"
            break
        if sol is None:
            sol = node_lp(fix)
            lp_solves += 1
            nodes += 1
        if not sol.optimal:
            continue
        bound = effective(sol.objective_value)
        if bound <= best_val + PRUNE_TOL:
            continue
        values = sol.values
        var = _branch_variable(inst, values, branching)
        if var is None:
            offer(plan_from_values(inst, values))
            continue
        improved = offer(greedy_commit(inst, rank_mappings(inst, z_block(inst, values))))
        if bound <= best_val + PRUNE_TOL:
            continue
        first = 1 if values[var] >= 0.5 else 0
        children = [{**fix, var: first}, {**fix, var: 1 - first}]
        plunging = plunging or improved
        if plunging:
            plunge_next = (bound, children[0], None)
            counter += 1
            heapq.heappush(heap, (-bound, counter, children[1]))
        else:
            for child in children:
                counter += 1
                heapq.heappush(heap, (-bound, counter, child))

    open_bounds = [-h[0] for h in heap]
    if plunge_next is not None:
        open_bounds.append(plunge_next[0])
    best_bound = max([best_val] + [b for b in open_bounds if b > best_val + PRUNE_TOL])
    if best is None and status == "optimal":
        # the tree was exhausted without a single integral point
        return SolveReport("infeasible", None, -math.inf, -math.inf, math.inf, nodes, lp_solves,
                           time.perf_counter() - start, f.value, root_bound, target_flows)
    if status == "optimal":
        best_bound = best_val
    gap = (best_bound - best_val) / max(1.0, abs(best_val))
    return SolveReport(status, best, best_val, best_bound, gap, nodes, lp_solves,
                       time.perf_counter() - start, f.value, root_bound, target_flows)


def two_stage_solve(inst: ProblemInstance, limits: Limits | None = None, strengthened: bool = False,
                    engine: str = "highs") -> SolveReport:
    """Maximize flows, then minimize delay with flows pinned to the stage-one optimum."""
    f1 = Formulation.P1_PRIME if strengthened else Formulation.P1
    f2 = Formulation.P2_PRIME if strengthened else Formulation.P2
    start = time.perf_counter()
    s1 = branch_and_bound(inst, f1, limits, engine=engine)
    target = int(round(s1.incumbent_value))
    s2 = branch_and_bound(inst, f2, limits, target_flows=target, engine=engine,
                          initial_plans=[s1.best_plan], seed_mapfirst=False)
    status = "optimal" if s1.status == s2.status == "optimal" else (
        "infeasible" if "infeasible" in (s1.status, s2.status) else "feasible_time_limit")
    return SolveReport(status, s2.best_plan, s2.incumbent_value, s2.best_bound, s2.gap,
                       s1.nodes_explored + s2.nodes_explored, s1.lp_solves + s2.lp_solves,
                       time.perf_counter() - start, f"{f1.value}->{f2.value}", s2.root_bound,
                       target, [s1, s2])


# --- exhaustive oracle -----------------------------------------------------

def enumerate_plans(inst: ProblemInstance) -> Iterator[Plan]:
    """Every plan satisfying (1)-(6): each switch idle or mapped to one location."""
    n = inst.n
    if n > BRUTE_FORCE_MAX_N:
        raise TooLarge(f"enumeration limited to N <= {BRUTE_FORCE_MAX_N}")
    R, A, g, M = [int(v) for v in inst.r], inst.capacity, inst.gamma, inst.budget
    load = [0] * n
    used = [0] * n
    maps: list = []

    def rec(i, n_up, n_ctl):
        if i == n:
            yield Plan.from_mappings(maps)
            return
        yield from rec(i + 1, n_up, n_ctl)
        for j in range(n):
            new_ctl = n_ctl + (used[j] == 0)
            if load[j] + R[i] > A or g * (n_up + 1) + new_ctl > M:
                continue
            load[j] += R[i]
            used[j] += 1
            maps.append((i, j))
            yield from rec(i + 1, n_up + 1, new_ctl)
            maps.pop()
            used[j] -= 1
            load[j] -= R[i]

    yield from rec(0, 0, 0)


def brute_force(inst: ProblemInstance, objective: str = "two_stage") -> Plan:
    """Exact optimum by exhaustive search with dominance pruning (N <= 8).

    ``objective``: 'P1' or 'two_stage' rank plans by (flows desc, delay asc);
    'P' ranks by flows - lambda*delay first. Remaining ties go to the smallest
    sorted plan encoding.
    """
    n = inst.n
    if n > BRUTE_FORCE_MAX_N:
        raise TooLarge(f"brute force limited to N <= {BRUTE_FORCE_MAX_N}")
    if objective not in ("P1", "P", "two_stage"):
        raise ValueError(f"unknown objective {objective!r}")
    combined_mode = objective == "P"
    R = [int(v) for v in inst.r]
    D = inst.d.tolist()
    A, g, M, lam = inst.capacity, inst.gamma, inst.budget, inst.lam
    suffix = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] + R[i]
    order = [sorted(range(n), key=lambda j, i=i: (D[i][j], j)) for i in range(n)]

    best = {"key": None, "plan": None}
    load = [0] * n
    used = [0] * n
    maps: list = []

    def better(flows, delay, enc):
        key = best["key"]
        if key is None:
            return True
        bf, bd, benc = key
        if combined_mode:
            cv, bv = flows - lam * delay, bf - lam * bd
            if abs(cv - bv) > PRUNE_TOL:
                return cv > bv
        if flows != bf:
            return flows > bf
        if abs(delay - bd) > PRUNE_TOL:
            return delay < bd
        return enc < benc

    def hopeless(i, n_up, n_ctl, flows, delay):
        key = best["key"]
        if key is None:
            return False
        bf, bd, _ = key
        ub = flows + (suffix[i] if g * (n_up + 1) + n_ctl <= M else 0)
        if combined_mode:
            return ub - lam * delay < bf - lam * bd - PRUNE_TOL
        return ub < bf or (ub == bf and delay > bd + PRUNE_TOL)

    def rec(i, n_up, n_ctl, flows, delay):
        if hopeless(i, n_up, n_ctl, flows, delay):
            return
        if i == n:
            enc = tuple(sorted(maps))
            if better(flows, delay, enc):
                best["key"] = (flows, delay, enc)
                best["plan"] = Plan.from_mappings(maps)
            return
        for j in order[i]:
            new_ctl = n_ctl + (used[j] == 0)
            if load[j] + R[i] > A or g * (n_up + 1) + new_ctl > M:
                continue
            load[j] += R[i]
            used[j] += 1
            maps.append((i, j))
            rec(i + 1, n_up + 1, new_ctl, flows + R[i], delay + D[i][j])
            maps.pop()
            used[j] -= 1
            load[j] -= R[i]
        rec(i + 1, n_up, n_ctl, flows, delay)

    rec(0, 0, 0, 0, 0.0)
    return best["plan"]


def optimal_plans(inst: ProblemInstance, objective: str = "P1") -> list[Plan]:
    """All optimal plans by enumeration; 'P1' ties on flows only, 'two_stage' on (flows, delay)."""
    plans = list(enumerate_plans(inst))
    flows = [sum(int(inst.r[i]) for i in p.upgraded) for p in plans]
    top = max(flows)
    cands = [p for p, fl in zip(plans, flows) if fl == top]
    if objective == "P1":
        return sorted(cands, key=Plan.encode)
    if objective == "two_stage":
        delays = [sc_delay(inst, p) for p in cands]
        lo = min(delays)
        return sorted((p for p, dl in zip(cands, delays) if dl <= lo + PRUNE_TOL), key=Plan.encode)
    raise ValueError(f"unknown objective {objective!r}")


def generate_3partition_instance(m: int, sizes, B: int, n: int | None = None) -> ProblemInstance:
    """Hardness-reduction instance: R = sizes (zero-padded to n), A = B, gamma = 1, M = 4m, D = 0."""
    sizes = [int(a) for a in sizes]
    if m < 1 or len(sizes) != 3 * m:
        raise InvalidPartitionData(f"need exactly 3m = {3 * m} sizes, got {len(sizes)}")
    for a in sizes:
        if not (4 * a > B and 2 * a < B):
            raise InvalidPartitionData(f"size {a} outside the open interval (B/4, B/2) for B={B}")
    if sum(sizes) != m * B:
        raise InvalidPartitionData(f"sizes sum to {sum(sizes)}, expected m*B = {m * B}")
    n = 3 * m if n is None else n
    if n < 3 * m:
        raise InvalidPartitionData("n must be at least 3m")
    r = sizes + [0] * (n - 3 * m)
    return ProblemInstance.create(r, np.zeros((n, n)), capacity=B, budget=4 * m, gamma=1,
                                  name=f"3partition-m{m}-B{B}")
