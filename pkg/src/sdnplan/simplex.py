"""Bounded-variable revised primal simplex.

Dense explicit basis inverse with rank-one updates and periodic refactorization;
sparse column storage for pricing. Phase I minimizes the sum of artificials,
phase II the (negated) objective. Dantzig pricing, switching to Bland's rule
after a run of 5*(rows+cols) degenerate pivots. Fully deterministic.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import NumericalBreakdown

PIVOT_TOL = 1e-11
FEAS_TOL = 1e-7
OPT_TOL = 1e-7
REFACTOR_EVERY = 100


class _Simplex:
    def __init__(self, prob):
        m, n = prob.matrix.shape
        self.m, self.n = m, n
        senses = prob.senses
        # columns: structural | slack | artificial
        slack_lo = np.where(senses == ">", -np.inf, 0.0)
        slack_hi = np.where(senses == "<", np.inf, 0.0)
        x0 = prob.lower.copy()
        resid = prob.rhs - prob.matrix @ x0
        self.art_sign = np.where(resid >= 0, 1.0, -1.0)
        self.cols = sp.hstack([prob.matrix, sp.identity(m), sp.diags(self.art_sign)], format="csc")
        self.ntot = n + 2 * m
        self.lo = np.concatenate([prob.lower, slack_lo, np.zeros(m)])
        self.hi = np.concatenate([prob.upper, slack_hi, np.full(m, np.inf)])
        self.b = prob.rhs.astype(float)
        self.x = np.concatenate([x0, np.zeros(m), np.abs(resid)])
        self.basis = np.arange(n + m, n + 2 * m)
        self.is_basic = np.zeros(self.ntot, dtype=bool)
        self.is_basic[self.basis] = True
        self.binv = np.diag(1.0 / self.art_sign)
        self.iterations = 0
        self.since_refactor = 0

    def column(self, q):
        col = np.zeros(self.m)
        s, e = self.cols.indptr[q], self.cols.indptr[q + 1]
        col[self.cols.indices[s:e]] = self.cols.data[s:e]
        return col

    def refactor(self):
        B = self.cols[:, self.basis].toarray()
        try:
            self.binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown("singular basis") from exc
        nonbasic = ~self.is_basic
        rhs = self.b - self.cols[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.binv @ rhs
        self.since_refactor = 0

    def run(self, cost):
        """Minimize ``cost @ x``; returns 'optimal' or 'unbounded'."""
        m = self.m
        degenerate_run = 0
        bland = False
        stall_limit = 5 * (self.m + self.ntot)
        while True:
            if self.since_refactor >= REFACTOR_EVERY:
                self.refactor()
            pi = cost[self.basis] @ self.binv
            d = cost - self.cols.T @ pi
            d[self.is_basic] = 0.0
            at_lo = self.x <= self.lo + FEAS_TOL
            at_hi = self.x >= self.hi - FEAS_TOL
            fixed = self.lo == self.hi
            can_up = (d < -OPT_TOL) & ~at_hi & ~fixed & ~self.is_basic
            can_down = (d > OPT_TOL) & ~at_lo & ~fixed & ~self.is_basic
            cand = np.flatnonzero(can_up | can_down)
            if cand.size == 0:
                return "optimal"
            if bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if can_up[q] else -1.0
            alpha = self.binv @ self.column(q)
            # basic variables move by -direction * theta * alpha
            delta = -direction * alpha
            theta = self.hi[q] - self.lo[q]
            xb = self.x[self.basis]
            lob, hib = self.lo[self.basis], self.hi[self.basis]
            up = delta > PIVOT_TOL
            down = delta < -PIVOT_TOL
            with np.errstate(invalid="ignore", divide="ignore"):
                t = np.full(m, np.inf)
                t[up] = np.maximum(hib[up] - xb[up], 0.0) / delta[up]
                t[down] = np.maximum(xb[down] - lob[down], 0.0) / -delta[down]
            leave = -1
            leave_to_hi = False
            tmin = t.min() if m else np.inf
            if np.isfinite(tmin) and tmin <= theta:
                ties = np.flatnonzero(t <= tmin + 1e-12)
                if bland:
                    leave = int(ties[np.argmin(self.basis[ties])])
                else:
                    leave = int(ties[np.argmax(np.abs(delta[ties]))])
                theta = float(t[leave])
                leave_to_hi = bool(up[leave])
            if not np.isfinite(theta):
                return "unbounded"
            if leave >= 0 and abs(alpha[leave]) < PIVOT_TOL:
                raise NumericalBreakdown(f"pivot {alpha[leave]:.3e} below threshold")
            self.iterations += 1
            if theta <= 1e-12:
                degenerate_run += 1
                if degenerate_run > stall_limit:
                    bland = True
            else:
                degenerate_run = 0
                bland = False
            self.x[self.basis] = xb + theta * delta
            self.x[q] += direction * theta
            if leave < 0:
                # bound flip, basis unchanged
                continue
            out = self.basis[leave]
            self.x[out] = self.hi[out] if leave_to_hi else self.lo[out]
            piv = alpha[leave]
            row = self.binv[leave] / piv
            self.binv -= np.outer(alpha, row)
            self.binv[leave] = row
            self.basis[leave] = q
            self.is_basic[out] = False
            self.is_basic[q] = True
            self.since_refactor += 1

    def duals(self, cost):
        return cost[self.basis] @ self.binv


def solve_bounded_simplex(prob):
    from .lp import LpSolution, _certify

    s = _Simplex(prob)
    n, m = s.n, s.m
    phase1 = np.zeros(s.ntot)
    phase1[n + m:] = 1.0
    s.run(phase1)
    s.refactor()
    infeas = float(s.x[n + m:].sum())
    if infeas > FEAS_TOL * max(1.0, m):
        return LpSolution(np.full(n, np.nan), float("-inf"), "infeasible", iterations=s.iterations)
    s.hi[n + m:] = 0.0
    s.x[n + m:] = np.where(s.is_basic[n + m:], s.x[n + m:], 0.0)
    cost = np.zeros(s.ntot)
    cost[:n] = -prob.objective
    status = s.run(cost)
    if status == "unbounded":
        return LpSolution(np.full(n, np.nan), float("inf"), "unbounded", iterations=s.iterations)
    s.refactor()
    x = np.clip(s.x[:n], prob.lower, prob.upper)
    y = -s.duals(cost)
    rc, dual_obj = _certify(prob, x, y)
    return LpSolution(x, float(prob.objective @ x), "optimal", y, rc, dual_obj, s.iterations)
