"""MapFirst, the WeightFirst baseline and the one-switch-per-controller exact case."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import PreconditionViolated
from .instance import Plan, ProblemInstance
from .lp import Formulation, LpProblem, assemble_lp, solve_lp, z_index

INTEGRALITY_TOL = 1e-7


@dataclass(frozen=True)
class RankedMappings:
    entries: tuple          # ((i, j, score), ...) best first
    source: str             # "lp_value" | "omega"


def rank_mappings(inst: ProblemInstance, scores, source: str = "lp_value") -> RankedMappings:
    """All N^2 pairs ordered by score desc, then omega desc, then (i, j) asc."""
    n = inst.n
    scores = np.asarray(scores, dtype=float).reshape(n, n)
    if not np.all(np.isfinite(scores)):
        raise ValueError("mapping scores must be finite")
    ii, jj = np.divmod(np.arange(n * n), n)
    # lexsort: last key is primary
    order = np.lexsort((jj, ii, -inst.omega.ravel(), -scores.ravel()))
    entries = tuple((int(ii[k]), int(jj[k]), float(scores.ravel()[k])) for k in order)
    return RankedMappings(entries, source)


def greedy_commit(inst: ProblemInstance, ranked) -> Plan:
    """Scan-and-commit rounding shared by MapFirst and WeightFirst.

    ``ranked`` is a RankedMappings or any iterable of (i, j[, score]).
    """
    entries = ranked.entries if isinstance(ranked, RankedMappings) else ranked
    R, A, g, M = inst.r, inst.capacity, inst.gamma, inst.budget
    upgraded: set[int] = set()
    controllers: set[int] = set()
    mappings: set[tuple[int, int]] = set()
    load = [0] * inst.n
    for entry in entries:
        i0, j0 = int(entry[0]), int(entry[1])
        if i0 in upgraded:
            continue
        cost = g * len(upgraded) + len(controllers)
        if load[j0] + int(R[i0]) <= A:
            if j0 in controllers and cost + g <= M:
                upgraded.add(i0)
                mappings.add((i0, j0))
                load[j0] += int(R[i0])
            elif j0 not in controllers and cost + g + 1 <= M:
                controllers.add(j0)
                upgraded.add(i0)
                mappings.add((i0, j0))
                load[j0] += int(R[i0])
        if M - g < g * len(upgraded) + len(controllers):
            break
    return Plan(frozenset(upgraded), frozenset(controllers), frozenset(mappings))


def z_block(inst: ProblemInstance, values) -> np.ndarray:
    n = inst.n
    return np.asarray(values)[z_index(n, 0, 0):z_index(n, 0, 0) + n * n].reshape(n, n)


def single_switch_case(inst: ProblemInstance) -> bool:
    """True when no controller can serve two switches: R_i + R_j > A for every pair.

    Switches with R_i > A can never be upgraded and are left out of the test.
    """
    usable = np.sort(inst.r[inst.r <= inst.capacity])
    if len(usable) == 0 or usable[0] <= 0:
        return False
    return len(usable) == 1 or bool(usable[0] + usable[1] > inst.capacity)


def k_cardinality_lp(inst: ProblemInstance) -> LpProblem:
    """Relaxation of the pair-selection problem: pick <= k disjoint (i, j) pairs maximizing omega.

    Uses the full variable layout so z values line up with the general
    formulations; x and y are pinned to zero and carry no rows.
    """
    n = inst.n
    k = min(inst.budget // (inst.gamma + 1), n)
    nv = n * n + 2 * n
    rows, cols, vals = [], [], []
    r = 0
    for i in range(n):
        for j in range(n):
            rows.append(r)
            cols.append(z_index(n, i, j))
            vals.append(1.0)
        r += 1
    for j in range(n):
        for i in range(n):
            rows.append(r)
            cols.append(z_index(n, i, j))
            vals.append(1.0)
        r += 1
    for i in range(n):
        for j in range(n):
            rows.append(r)
            cols.append(z_index(n, i, j))
            vals.append(1.0)
    r += 1
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(r, nv))
    # with all usable weights positive the cardinality row is tight at the optimum
    usable = inst.r <= inst.capacity
    card = "=" if np.all(inst.omega[usable] > 0) and k <= int(usable.sum()) else "<"
    senses = np.array(["<"] * (2 * n) + [card])
    rhs = np.array([1.0] * (2 * n) + [float(k)])
    c = np.zeros(nv)
    c[2 * n:] = inst.omega.ravel()
    upper = np.ones(nv)
    upper[:2 * n] = 0.0
    for i in np.flatnonzero(inst.r > inst.capacity):
        upper[z_index(n, int(i), 0):z_index(n, int(i), 0) + n] = 0.0
    tags = tuple(["row-assign"] * n + ["col-assign"] * n + ["cardinality"])
    return LpProblem(c, matrix, senses, rhs, np.zeros(nv), upper, tags, n)


def mapfirst_ranking(inst: ProblemInstance, engine: str = "highs") -> RankedMappings:
    """LP-value ranking of all mappings.

    In the single-switch-per-controller case the relaxation is taken over the
    pair-selection reformulation, whose relaxation has integral optima; otherwise
    over the strengthened one-stage formulation.
    """
    if single_switch_case(inst):
        prob = k_cardinality_lp(inst)
    else:
        prob = assemble_lp(inst, Formulation.P_PRIME)
    sol = solve_lp(prob, engine)
    if not sol.optimal:
        raise PreconditionViolated(f"relaxation not solvable: {sol.status}")
    return rank_mappings(inst, z_block(inst, sol.values), "lp_value")


def mapfirst(inst: ProblemInstance, engine: str = "highs") -> Plan:
    return greedy_commit(inst, mapfirst_ranking(inst, engine))


def weightfirst(inst: ProblemInstance) -> Plan:
    return greedy_commit(inst, rank_mappings(inst, inst.omega, "omega"))


def single_switch_exact(inst: ProblemInstance, engine: str = "highs") -> Plan:
    """Exact optimum when no controller can serve two switches.

    Solves the k-cardinality assignment relaxation, k = floor(M / (gamma+1));
    its basic optima are integral. A fractional answer (not expected) falls
    back to branch-and-bound on the strengthened formulation.
    """
    r = inst.r
    if np.any(r <= 0) or np.any(r > inst.capacity):
        raise PreconditionViolated("need 0 < R_i <= A for every switch")
    if not single_switch_case(inst):
        raise PreconditionViolated("need R_i + R_j > A for every pair of switches")
    sol = solve_lp(k_cardinality_lp(inst), engine)
    if not sol.optimal:
        raise PreconditionViolated(f"assignment relaxation not solvable: {sol.status}")
    z = z_block(inst, sol.values)
    if np.all(np.minimum(np.abs(z), np.abs(z - 1)) <= INTEGRALITY_TOL):
        pairs = [(int(i), int(j)) for i, j in zip(*np.nonzero(z > 0.5))]
        return Plan.from_mappings(pairs)
    from .exact import branch_and_bound

    return branch_and_bound(inst, Formulation.P_PRIME).best_plan
