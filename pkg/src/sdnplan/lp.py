"""Linear relaxations of the upgrade/placement formulations and their solution.

Variable layout for an N-switch instance (N^2 + 2N columns)::

    x(i)   -> i                 switch i upgraded
    y(j)   -> N + j             controller deployed at location j
    z(i,j) -> 2N + i*N + j      switch i mapped to controller j

All problems are maximizations over variables bounded inside [0, 1].
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import highspy
import numpy as np
import scipy.sparse as sp

from .errors import InvalidFormulation, NumericalBreakdown
from .instance import ProblemInstance

FEAS_TOL = 1e-7
DUAL_TOL = 1e-7


class Formulation(str, enum.Enum):
    P1 = "P1"                # max flows, original capacity rows
    P1_PRIME = "P1_PRIME"    # max flows, strengthened rows
    P2 = "P2"                # min delay subject to flows == F*
    P2_PRIME = "P2_PRIME"    # same, strengthened rows
    P = "P"                  # flows - lambda * delay, original rows
    P_PRIME = "P_PRIME"      # sum omega_ij z_ij, strengthened rows

    @property
    def strengthened(self) -> bool:
        return self.name.endswith("PRIME")

    @property
    def needs_target(self) -> bool:
        return self in (Formulation.P2, Formulation.P2_PRIME)


def as_formulation(f) -> Formulation:
    try:
        return Formulation(f)
    except ValueError as exc:
        raise InvalidFormulation(f"unknown formulation {f!r}") from exc


def x_index(n, i):
    return i


def y_index(n, j):
    return n + j


def z_index(n, i, j):
    return 2 * n + i * n + j


@dataclass(frozen=True, eq=False)
class LpProblem:
    objective: np.ndarray            # dense, maximized
    matrix: sp.csr_matrix            # constraint rows
    senses: np.ndarray               # '<', '=', '>' per row
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    row_tags: tuple = ()             # constraint family label per row, e.g. "(11)"
    n_switches: int = 0
    objective_offset: float = 0.0

    @property
    def n_vars(self) -> int:
        return len(self.objective)

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    def var_name(self, k: int) -> str:
        n = self.n_switches
        if n == 0:
            return f"v{k}"
        if k < n:
            return f"x({k})"
        if k < 2 * n:
            return f"y({k - n})"
        i, j = divmod(k - 2 * n, n)
        return f"z({i},{j})"

    def with_bounds(self, lower, upper) -> "LpProblem":
        return replace(self, lower=np.asarray(lower, dtype=float), upper=np.asarray(upper, dtype=float))

    def with_fixings(self, fixings: dict[int, int]) -> "LpProblem":
        lo, hi = self.lower.copy(), self.upper.copy()
        for k, v in fixings.items():
            lo[k] = hi[k] = float(v)
        return self.with_bounds(lo, hi)

    def rows_tagged(self, tag: str):
        return [k for k, t in enumerate(self.row_tags) if t == tag]


@dataclass
class LpSolution:
    values: np.ndarray
    objective_value: float
    status: str                      # optimal | infeasible | unbounded
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reduced_costs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dual_objective: float = float("nan")
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Rows:
    def __init__(self, nvars):
        self.nvars = nvars
        self.rows, self.cols, self.vals = [], [], []
        self.senses, self.rhs, self.tags = [], [], []

    def add(self, coeffs, sense, rhs, tag):
        r = len(self.senses)
        for k, v in coeffs:
            if v != 0:
                self.rows.append(r)
                self.cols.append(k)
                self.vals.append(float(v))
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.tags.append(tag)

    def matrix(self):
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=(len(self.senses), self.nvars))


def assemble_lp(inst: ProblemInstance, f, target_flows: float | None = None,
                fixings: dict[int, int] | None = None, extra_rows=()) -> LpProblem:
    """Relaxation of formulation ``f`` on ``inst``.

    Row families (tags): (2) z_ij <= y_j; (3) x_i = sum_j z_ij; (4) y_j <= sum_i z_ij;
    (5) sum_i R_i z_ij <= A; (6) gamma*sum x + sum y <= M; (11) sum_i R_i z_ij <= A y_j;
    (12) sum R_i x_i <= A sum y_j; (13) sum (R_i + gamma A) x_i <= A M; (F*) flows == F*.
    The original formulations use (2)(3)(4)(5)(6); strengthened ones swap (5) for
    (11) and append (12)(13). ``extra_rows`` holds ``(coeffs, sense, rhs)`` triples.
    """
    f = as_formulation(f)
    if f.needs_target and target_flows is None:
        raise InvalidFormulation(f"{f.value} needs target_flows (F*)")
    n = inst.n
    nv = n * n + 2 * n
    R, A, g, M = inst.r, inst.capacity, inst.gamma, inst.budget
    X = lambda i: x_index(n, i)
    Y = lambda j: y_index(n, j)
    Z = lambda i, j: z_index(n, i, j)
    rows = _Rows(nv)
    for i in range(n):
        for j in range(n):
            rows.add([(Z(i, j), 1.0), (Y(j), -1.0)], "<", 0.0, "(2)")
    for i in range(n):
        rows.add([(X(i), 1.0)] + [(Z(i, j), -1.0) for j in range(n)], "=", 0.0, "(3)")
    for j in range(n):
        rows.add([(Y(j), 1.0)] + [(Z(i, j), -1.0) for i in range(n)], "<", 0.0, "(4)")
    if f.strengthened:
        for j in range(n):
            rows.add([(Z(i, j), R[i]) for i in range(n)] + [(Y(j), -A)], "<", 0.0, "(11)")
    else:
        for j in range(n):
            rows.add([(Z(i, j), R[i]) for i in range(n)], "<", A, "(5)")
    rows.add([(X(i), g) for i in range(n)] + [(Y(j), 1.0) for j in range(n)], "<", M, "(6)")
    if f.strengthened:
        rows.add([(X(i), R[i]) for i in range(n)] + [(Y(j), -A) for j in range(n)], "<", 0.0, "(12)")
        rows.add([(X(i), R[i] + g * A) for i in range(n)], "<", A * M, "(13)")
    if f.needs_target:
        rows.add([(X(i), R[i]) for i in range(n)], "=", target_flows, "(F*)")
    for coeffs, sense, rhs in extra_rows:
        rows.add(coeffs, sense, rhs, "extra")

    c = np.zeros(nv)
    if f in (Formulation.P1, Formulation.P1_PRIME):
        c[:n] = R
    elif f.needs_target:
        c[2 * n:] = -inst.d.ravel()
    elif f == Formulation.P:
        c[:n] = R
        c[2 * n:] = -inst.lam * inst.d.ravel()
    else:
        c[2 * n:] = inst.omega.ravel()
    prob = LpProblem(c, rows.matrix(), np.array(rows.senses), np.array(rows.rhs),
                     np.zeros(nv), np.ones(nv), tuple(rows.tags), n)
    if fixings:
        prob = prob.with_fixings(fixings)
    return prob


def objective_of(inst: ProblemInstance, f, plan) -> float:
    """Formulation objective of an integral plan (no feasibility check)."""
    f = as_formulation(f)
    flows = float(sum(int(inst.r[i]) for i in plan.upgraded))
    maps = sorted(plan.mappings)
    if f in (Formulation.P1, Formulation.P1_PRIME):
        return flows
    if f.needs_target:
        return -float(np.sum([inst.d[i, j] for i, j in maps])) if maps else 0.0
    if f == Formulation.P:
        return flows - inst.lam * (float(np.sum([inst.d[i, j] for i, j in maps])) if maps else 0.0)
    return float(np.sum([inst.omega[i, j] for i, j in maps])) if maps else 0.0


def _certify(prob: LpProblem, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Reduced costs and the weak-duality upper bound implied by row duals ``y``."""
    rc = prob.objective - prob.matrix.T @ y
    bound_terms = np.where(rc > 0, rc * prob.upper, rc * prob.lower)
    return rc, float(prob.rhs @ y + bound_terms.sum())


class LpSession:
    """A relaxation held inside one HiGHS instance.

    Successive :meth:`solve` calls may narrow or widen variable bounds; HiGHS
    keeps the last optimal basis and re-optimizes from it with the dual simplex,
    which is what makes branch-and-bound nodes cheap.
    """

    def __init__(self, prob: LpProblem):
        self.prob = prob
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("solver", "simplex")
        h.setOptionValue("simplex_strategy", 1)      # dual simplex
        h.setOptionValue("presolve", "off")
        h.setOptionValue("threads", 1)
        h.setOptionValue("random_seed", 0)
        h.setOptionValue("primal_feasibility_tolerance", FEAS_TOL / 10)
        h.setOptionValue("dual_feasibility_tolerance", DUAL_TOL / 10)
        lp = highspy.HighsLp()
        lp.num_col_ = prob.n_vars
        lp.num_row_ = prob.n_rows
        lp.col_cost_ = -prob.objective
        lp.col_lower_ = prob.lower
        lp.col_upper_ = prob.upper
        inf = highspy.kHighsInf
        lp.row_lower_ = np.where(prob.senses == "<", -inf, prob.rhs)
        lp.row_upper_ = np.where(prob.senses == ">", inf, prob.rhs)
        csc = prob.matrix.tocsc()
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = csc.indptr
        lp.a_matrix_.index_ = csc.indices
        lp.a_matrix_.value_ = csc.data
        lp.a_matrix_.num_col_ = prob.n_vars
        lp.a_matrix_.num_row_ = prob.n_rows
        h.passModel(lp)
        self._h = h
        self._cols = np.arange(prob.n_vars, dtype=np.int32)

    def solve(self, lower=None, upper=None) -> LpSolution:
        prob = self.prob
        if lower is not None:
            prob = prob.with_bounds(lower, upper)
            self._h.changeColsBounds(prob.n_vars, self._cols, prob.lower, prob.upper)
        h = self._h
        h.run()
        status = h.getModelStatus()
        nv = prob.n_vars
        iters = int(h.getInfo().simplex_iteration_count)
        if status == highspy.HighsModelStatus.kInfeasible:
            return LpSolution(np.full(nv, np.nan), float("-inf"), "infeasible", iterations=iters)
        if status in (highspy.HighsModelStatus.kUnbounded, highspy.HighsModelStatus.kUnboundedOrInfeasible):
            return LpSolution(np.full(nv, np.nan), float("inf"), "unbounded", iterations=iters)
        if status != highspy.HighsModelStatus.kOptimal:
            raise NumericalBreakdown(f"HiGHS stopped with {h.modelStatusToString(status)}")
        sol = h.getSolution()
        x = np.clip(np.asarray(sol.col_value), prob.lower, prob.upper)
        # HiGHS minimizes -c; its row duals flip sign for the maximization
        y = -np.asarray(sol.row_dual)
        rc, dual_obj = _certify(prob, x, y)
        return LpSolution(x, float(prob.objective @ x), "optimal", y, rc, dual_obj, iters)


def solve_lp(prob: LpProblem, engine: str = "highs") -> LpSolution:
    """Solve a relaxation to a certified optimal basic solution.

    ``engine='highs'`` uses the HiGHS dual simplex (cold start);
    ``engine='simplex'`` uses the in-package bounded revised simplex.
    """
    if engine == "highs":
        return LpSession(prob).solve()
    if engine == "simplex":
        from .simplex import solve_bounded_simplex
        return solve_bounded_simplex(prob)
    raise ValueError(f"unknown LP engine {engine!r}")


def check_certificate(prob: LpProblem, sol: LpSolution, tol: float = 1e-7) -> list[str]:
    """Problems with an optimal solution's primal/dual certificate (empty if sound)."""
    out = []
    x, y = sol.values, sol.duals
    act = prob.matrix @ x
    for k, (a, s, b) in enumerate(zip(act, prob.senses, prob.rhs)):
        if (s == "<" and a > b + tol) or (s == ">" and a < b - tol) or (s == "=" and abs(a - b) > tol):
            out.append(f"row {k} {prob.row_tags[k] if prob.row_tags else ''} violated: {a} {s} {b}")
    if np.any(x < prob.lower - tol) or np.any(x > prob.upper + tol):
        out.append("bounds violated")
    for k, s in enumerate(prob.senses):
        if (s == "<" and y[k] < -tol) or (s == ">" and y[k] > tol):
            out.append(f"dual of row {k} has the wrong sign: {y[k]}")
    rc = sol.reduced_costs
    for k in range(prob.n_vars):
        at_lo = x[k] <= prob.lower[k] + tol
        at_hi = x[k] >= prob.upper[k] - tol
        if at_lo and at_hi:
            continue
        if at_lo and rc[k] > tol:
            out.append(f"reduced cost of {prob.var_name(k)} at lower bound is {rc[k]}")
        elif at_hi and rc[k] < -tol:
            out.append(f"reduced cost of {prob.var_name(k)} at upper bound is {rc[k]}")
        elif not at_lo and not at_hi and abs(rc[k]) > tol:
            out.append(f"reduced cost of basic {prob.var_name(k)} is {rc[k]}")
    return out


def write_mps(prob: LpProblem, name: str = "SDNPLAN") -> str:
    """Fixed-form MPS text, for cross-checking with external solvers.

    MPS minimizes by convention, so the objective row carries negated costs.
    """
    def fmt(v):
        return f"{v:12.6g}"

    lines = [f"NAME          {name}", "ROWS", " N  COST"]
    kind = {"<": "L", ">": "G", "=": "E"}
    for k, s in enumerate(prob.senses):
        lines.append(f" {kind[s]}  R{k}")
    lines.append("COLUMNS")
    csc = prob.matrix.tocsc()
    for k in range(prob.n_vars):
        col = f"C{k}"
        if prob.objective[k] != 0:
            lines.append(f"    {col:<8}  {'COST':<8}  {fmt(-prob.objective[k])}")
        for p in range(csc.indptr[k], csc.indptr[k + 1]):
            lines.append(f"    {col:<8}  {'R' + str(csc.indices[p]):<8}  {fmt(csc.data[p])}")
    lines.append("RHS")
    for k, b in enumerate(prob.rhs):
        if b != 0:
            lines.append(f"    {'RHS':<8}  {'R' + str(k):<8}  {fmt(b)}")
    lines.append("BOUNDS")
    for k in range(prob.n_vars):
        col = f"C{k}"
        if prob.lower[k] == prob.upper[k]:
            lines.append(f" FX BND       {col:<8}  {fmt(prob.lower[k])}")
        else:
            if prob.lower[k] != 0:
                lines.append(f" LO BND       {col:<8}  {fmt(prob.lower[k])}")
            lines.append(f" UP BND       {col:<8}  {fmt(prob.upper[k])}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"
