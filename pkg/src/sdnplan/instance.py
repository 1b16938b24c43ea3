"""Problem data, plans, feasibility checking and plan metrics."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable

import numpy as np

from .errors import AllFlowsZero, IndexOutOfRange, InfeasiblePlan, MalformedInput
from .topology import Topology, distance_matrix, estimate_flows


def compute_lambda(r, d, factor: float = 0.5) -> float:
    """Delay weight that makes the one-stage objective lexicographic.

    Returns ``factor * g / sum_i max_j d[i, j]`` with ``g`` the gcd of the nonzero
    flow counts; any ``factor`` in (0, 1) keeps the weight strictly inside the
    admissible interval. With an all-zero delay matrix every weight works and
    1.0 is returned.
    """
    r = np.asarray(r)
    if np.any(r != np.round(r)):
        raise MalformedInput("flow counts must be integers")
    nz = [int(v) for v in r if v != 0]
    if not nz:
        raise AllFlowsZero("all flow counts are zero; gcd undefined")
    g = reduce(math.gcd, nz)
    d = np.asarray(d, dtype=np.float64)
    denom = float(d.max(axis=1).sum()) if d.size else 0.0
    if denom == 0.0:
        return 1.0
    return factor * g / denom


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    r: np.ndarray
    d: np.ndarray
    capacity: int
    budget: int
    gamma: int
    lam: float
    omega: np.ndarray = field(repr=False)
    name: str = ""

    @property
    def n(self) -> int:
        return len(self.r)

    @classmethod
    def create(cls, r, d, capacity: int, budget: int, gamma: int,
               lam: float | None = None, name: str = "") -> "ProblemInstance":
        r = np.asarray(r, dtype=np.int64).copy()
        d = np.asarray(d, dtype=np.float64).copy()
        n = len(r)
        if d.shape != (n, n):
            raise MalformedInput(f"delay matrix shape {d.shape} does not match {n} switches")
        if np.any(r < 0):
            raise MalformedInput("flow counts must be nonnegative")
        if np.any(d < 0) or not np.all(np.isfinite(d)) or np.any(np.diag(d) != 0):
            raise MalformedInput("delay matrix must be finite, nonnegative, zero on the diagonal")
        if capacity <= 0:
            raise MalformedInput("controller capacity must be positive")
        if budget < 0:
            raise MalformedInput("budget must be nonnegative")
        if gamma < 1:
            raise MalformedInput("gamma must be >= 1")
        if lam is None:
            lam = compute_lambda(r, d)
        if not lam > 0:
            raise MalformedInput("lambda must be positive")
        omega = r[:, None] - lam * d
        for a in (r, d, omega):
            a.setflags(write=False)
        return cls(r, d, int(capacity), int(budget), int(gamma), float(lam), omega, name)

    def to_dict(self) -> dict:
        return {"name": self.name, "r": self.r.tolist(), "d": self.d.tolist(),
                "capacity": self.capacity, "budget": self.budget, "gamma": self.gamma,
                "lambda": self.lam}

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemInstance":
        try:
            return cls.create(data["r"], data["d"], data["capacity"], data["budget"],
                              data["gamma"], data.get("lambda"), data.get("name", ""))
        except (KeyError, TypeError) as exc:
            raise MalformedInput(f"bad instance document: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ProblemInstance":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise MalformedInput(f"bad instance JSON: {exc}") from exc


def budget_from_percent(m_percent: float, gamma: int, n: int) -> int:
    if not 0 < m_percent <= 1:
        raise MalformedInput("m_percent must lie in (0, 1]")
    # guard against 0.3 * 4 * 25 = 29.999999999999996
    return int(math.floor(m_percent * gamma * n + 1e-9))


def build_instance(t: Topology, m_percent: float | None, capacity: int = 50, gamma: int = 4,
                   budget: int | None = None, distance: str = "geodesic") -> ProblemInstance:
    """Instance from a topology; ``budget`` overrides the ``m_percent`` rule."""
    r = estimate_flows(t)
    d = distance_matrix(t, distance)
    if budget is None:
        if m_percent is None:
            raise MalformedInput("either m_percent or budget is required")
        budget = budget_from_percent(m_percent, gamma, t.n)
    return ProblemInstance.create(r, d, capacity, budget, gamma, name=t.name)


@dataclass(frozen=True)
class Plan:
    upgraded: frozenset = frozenset()
    controllers: frozenset = frozenset()
    mappings: frozenset = frozenset()

    @classmethod
    def from_mappings(cls, mappings: Iterable[tuple[int, int]]) -> "Plan":
        """Plan whose switches and controllers are exactly those the mappings touch."""
        mappings = frozenset((int(i), int(j)) for i, j in mappings)
        return cls(frozenset(i for i, _ in mappings), frozenset(j for _, j in mappings), mappings)

    def encode(self) -> tuple:
        return (tuple(sorted(self.upgraded)), tuple(sorted(self.controllers)),
                tuple(sorted(self.mappings)))

    def to_dict(self) -> dict:
        up, ctl, maps = self.encode()
        return {"upgraded": list(up), "controllers": list(ctl), "mappings": [list(m) for m in maps]}

    @classmethod
    def from_dict(cls, data: dict) -> "Plan":
        try:
            return cls(frozenset(int(i) for i in data["upgraded"]),
                       frozenset(int(j) for j in data["controllers"]),
                       frozenset((int(i), int(j)) for i, j in data["mappings"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInput(f"bad plan document: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Plan":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise MalformedInput(f"bad plan JSON: {exc}") from exc


@dataclass(frozen=True)
class Violation:
    constraint: int
    index: tuple
    detail: str


def check_feasibility(inst: ProblemInstance, p: Plan) -> list[Violation]:
    """Every violated constraint among (1)-(6); an empty list means feasible.

    Identifiers: 1 z<=x, 2 z<=y, 3 x = sum_j z, 4 y <= sum_i z,
    5 per-controller load <= capacity, 6 gamma*|X| + |Y| <= budget.
    """
    n = inst.n
    for i in p.upgraded:
        if not 0 <= i < n:
            raise IndexOutOfRange(f"switch index {i} outside 0..{n - 1}")
    for j in p.controllers:
        if not 0 <= j < n:
            raise IndexOutOfRange(f"controller index {j} outside 0..{n - 1}")
    for i, j in p.mappings:
        if not (0 <= i < n and 0 <= j < n):
            raise IndexOutOfRange(f"mapping ({i}, {j}) outside 0..{n - 1}")

    out = []
    per_switch = [0] * n
    per_ctl = [0] * n
    load = [0] * n
    for i, j in sorted(p.mappings):
        per_switch[i] += 1
        per_ctl[j] += 1
        load[j] += int(inst.r[i])
        if i not in p.upgraded:
            out.append(Violation(1, (i, j), f"switch {i} mapped but not upgraded"))
        if j not in p.controllers:
            out.append(Violation(2, (i, j), f"controller {j} used but not deployed"))
    for i in range(n):
        x = 1 if i in p.upgraded else 0
        if x != per_switch[i]:
            out.append(Violation(3, (i,), f"switch {i}: x={x} but {per_switch[i]} mappings"))
    for j in range(n):
        if j in p.controllers and per_ctl[j] == 0:
            out.append(Violation(4, (j,), f"controller {j} deployed without mappings"))
    for j in range(n):
        if load[j] > inst.capacity:
            out.append(Violation(5, (j,), f"controller {j} load {load[j]} exceeds {inst.capacity}"))
    cost = inst.gamma * len(p.upgraded) + len(p.controllers)
    if cost > inst.budget:
        out.append(Violation(6, (), f"cost {cost} exceeds budget {inst.budget}"))
    return out


def is_feasible(inst: ProblemInstance, p: Plan) -> bool:
    return not check_feasibility(inst, p)


@dataclass(frozen=True)
class PlanMetrics:
    flows: int
    sc_delay: float
    cc_delay: float
    n_switches: int
    n_controllers: int
    ratio: float
    cost: int
    combined: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def sc_delay(inst: ProblemInstance, p: Plan) -> float:
    # fixed summation order so equal plans give bitwise-equal delays
    return float(math.fsum(float(inst.d[i, j]) for i, j in sorted(p.mappings)))


def evaluate(inst: ProblemInstance, p: Plan) -> PlanMetrics:
    problems = check_feasibility(inst, p)
    if problems:
        raise InfeasiblePlan("; ".join(v.detail for v in problems))
    flows = int(sum(int(inst.r[i]) for i in p.upgraded))
    delay = sc_delay(inst, p)
    ctl = sorted(p.controllers)
    cc = float(math.fsum(float(inst.d[a, b]) for k, a in enumerate(ctl) for b in ctl[k + 1:]))
    ns, nc = len(p.upgraded), len(p.controllers)
    return PlanMetrics(
        flows=flows, sc_delay=delay, cc_delay=cc, n_switches=ns, n_controllers=nc,
        ratio=ns / nc if nc else 0.0, cost=inst.gamma * ns + nc,
        combined=flows - inst.lam * delay,
    )
