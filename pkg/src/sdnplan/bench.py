"""Sweep harness: runs algorithms over (topology, budget) grids and replays results.

CSV columns (long format, one row per topology x algorithm x m_percent):

    topology, algorithm, m_percent, flows, n_controllers, sc_delay, cc_delay,
    ratio, wall_time, status, gap

``wall_time`` is milliseconds on a monotonic clock around the solve call only.
``gap`` is (bound - value) / max(1, |value|): the search bound for exact
algorithms, the root relaxation of the one-stage strengthened formulation for
the heuristics.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import MalformedInput, PlannerError, ValidationFailure
from .exact import Limits, branch_and_bound
from .heuristics import mapfirst, weightfirst
from .instance import Plan, ProblemInstance, build_instance, check_feasibility, evaluate
from .lp import Formulation, assemble_lp, objective_of, solve_lp
from .topology import Topology, bundled, load_topology

ALGORITHMS = ("optimal", "flowonly", "mapfirst", "weightfirst")
DEFAULT_M_PERCENTS = tuple(round(0.05 * k, 2) for k in range(1, 11))
CSV_COLUMNS = ("topology", "algorithm", "m_percent", "flows", "n_controllers", "sc_delay",
               "cc_delay", "ratio", "wall_time", "status", "gap")
REAL_TOL = 1e-9


@dataclass(frozen=True)
class SweepConfig:
    topologies: tuple[str, ...]
    m_percents: tuple[float, ...] = DEFAULT_M_PERCENTS
    capacity: int = 50
    gamma: int = 4
    algorithms: tuple[str, ...] = ALGORITHMS
    time_limit: float | None = None
    seed: int = 0                   # recorded for provenance; no algorithm draws random numbers
    distance: str = "geodesic"
    format: str | None = None       # topology file format, inferred from the suffix when None
    engine: str = "highs"

    def __post_init__(self):
        if not self.topologies:
            raise MalformedInput("at least one topology is required")
        if not self.algorithms:
            raise MalformedInput("at least one algorithm is required")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise MalformedInput(f"unknown algorithms {sorted(unknown)}")
        for m in self.m_percents:
            if not 0 < m <= 1:
                raise MalformedInput(f"m_percent {m} outside (0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        data = dict(data)
        for key in ("topologies", "m_percents", "algorithms"):
            data[key] = tuple(data[key])
        return cls(**data)


@dataclass(frozen=True)
class ResultRow:
    topology: str
    algorithm: str
    m_percent: float
    flows: int
    n_controllers: int
    sc_delay: float
    cc_delay: float
    ratio: float
    wall_time: float
    status: str
    gap: float
    plan: Plan | None = field(default=None, compare=False)

    def csv_values(self) -> list:
        return [repr(v) if isinstance(v, float) else v
                for v in (getattr(self, c) for c in CSV_COLUMNS)]

    def to_dict(self) -> dict:
        out = {c: getattr(self, c) for c in CSV_COLUMNS}
        out["plan"] = self.plan.to_dict() if self.plan is not None else None
        return out


@dataclass
class SweepResult:
    config: SweepConfig
    rows: list[ResultRow]
    instances: dict[str, ProblemInstance]

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "columns": list(CSV_COLUMNS),
                "instances": {k: v.to_dict() for k, v in sorted(self.instances.items())},
                "rows": [r.to_dict() for r in self.rows]}


def resolve_topology(spec: str, format: str | None = None) -> Topology:
    """A file path, or the name of a bundled topology."""
    path = Path(spec)
    if not path.exists() and not path.suffix:
        path = bundled(spec)
    return load_topology(path, format)


def instance_key(topology: str, m_percent: float) -> str:
    return f"{topology}@{m_percent!r}"


def _relative_gap(bound: float, value: float) -> float:
    if not math.isfinite(bound):
        return 0.0
    return max(0.0, (bound - value) / max(1.0, abs(value)))


def run_algorithm(inst: ProblemInstance, algorithm: str, time_limit: float | None = None,
                  engine: str = "highs") -> tuple[Plan, str, float, float]:
    """(plan, status, gap, wall seconds) for one algorithm on one instance."""
    limits = Limits(time=time_limit)
    if algorithm in ("optimal", "flowonly"):
        f = Formulation.P_PRIME if algorithm == "optimal" else Formulation.P1_PRIME
        t0 = time.perf_counter()
        rep = branch_and_bound(inst, f, limits, engine=engine)
        wall = time.perf_counter() - t0
        return rep.best_plan, rep.status, _relative_gap(rep.best_bound, rep.incumbent_value), wall
    if algorithm == "mapfirst":
        t0 = time.perf_counter()
        plan = mapfirst(inst, engine)
        wall = time.perf_counter() - t0
    elif algorithm == "weightfirst":
        t0 = time.perf_counter()
        plan = weightfirst(inst)
        wall = time.perf_counter() - t0
    else:
        raise MalformedInput(f"unknown algorithm {algorithm!r}")
    # outside the timed region: how far the plan is from the relaxation bound
    root = solve_lp(assemble_lp(inst, Formulation.P_PRIME), engine).objective_value
    return plan, "heuristic", _relative_gap(root, objective_of(inst, Formulation.P_PRIME, plan)), wall


def _row(topology: str, algorithm: str, m_percent: float, inst: ProblemInstance,
         time_limit: float | None, engine: str) -> ResultRow:
    try:
        plan, status, gap, wall = run_algorithm(inst, algorithm, time_limit, engine)
        m = evaluate(inst, plan)
    except PlannerError as exc:
        return _error_row(topology, algorithm, m_percent, exc)
    return ResultRow(topology, algorithm, m_percent, m.flows, m.n_controllers, m.sc_delay,
                     m.cc_delay, m.ratio, wall * 1000.0, status, gap, plan)


def _error_row(topology: str, algorithm: str, m_percent: float, exc: Exception) -> ResultRow:
    return ResultRow(topology, algorithm, m_percent, 0, 0, 0.0, 0.0, 0.0, 0.0,
                     f"error: {type(exc).__name__}: {exc}", 0.0, None)


def _job(args) -> ResultRow:
    topology, algorithm, m_percent, inst_doc, time_limit, engine = args
    return _row(topology, algorithm, m_percent, ProblemInstance.from_dict(inst_doc), time_limit, engine)


def worker_count(jobs: int) -> int:
    cap = os.environ.get("PLANNER_THREADS")
    limit = int(cap) if cap and cap.isdigit() and int(cap) > 0 else (os.cpu_count() or 1)
    return max(1, min(limit, jobs))


def _sort_key(row: ResultRow):
    return (row.topology, ALGORITHMS.index(row.algorithm), row.m_percent)


def run_sweep(cfg: SweepConfig, workers: int | None = None) -> SweepResult:
    """Every (topology, algorithm, m_percent) cell; failures become error rows."""
    instances: dict[str, ProblemInstance] = {}
    jobs = []
    failed = []
    for spec in cfg.topologies:
        try:
            topo = resolve_topology(spec, cfg.format)
        except PlannerError as exc:
            failed += [_error_row(spec, algo, m, exc) for m in cfg.m_percents for algo in cfg.algorithms]
            continue
        name = topo.name or Path(spec).stem
        for m in cfg.m_percents:
            try:
                inst = build_instance(topo, m, cfg.capacity, cfg.gamma, distance=cfg.distance)
            except PlannerError as exc:
                failed += [_error_row(name, algo, m, exc) for algo in cfg.algorithms]
                continue
            instances[instance_key(name, m)] = inst
            for algo in cfg.algorithms:
                jobs.append((name, algo, m, inst.to_dict(), cfg.time_limit, cfg.engine))
    workers = worker_count(len(jobs)) if workers is None else workers
    if workers <= 1:
        rows = [_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_job, jobs))
    return SweepResult(cfg, sorted(rows + failed, key=_sort_key), instances)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.csv_values())
    return buf.getvalue()


def write_results(result: SweepResult, out: str | Path) -> tuple[Path, Path]:
    """Write ``<out>.csv`` and ``<out>.json``; returns both paths."""
    out = Path(out)
    stem = out.with_suffix("") if out.suffix in (".csv", ".json") else out
    csv_path, json_path = stem.with_suffix(".csv"), stem.with_suffix(".json")
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(rows_to_csv(result.rows))
    json_path.write_text(json.dumps(result.to_dict(), indent=1, sort_keys=True))
    return csv_path, json_path


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= REAL_TOL


def validate_bundle(bundle: dict | str | Path) -> list[str]:
    """Replay every stored plan; return human-readable problems (empty when sound)."""
    if not isinstance(bundle, dict):
        try:
            bundle = json.loads(Path(bundle).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise MalformedInput(f"cannot read results bundle: {exc}") from exc
    try:
        instances = {k: ProblemInstance.from_dict(v) for k, v in bundle["instances"].items()}
        rows = bundle["rows"]
    except (KeyError, TypeError, AttributeError) as exc:
        raise MalformedInput(f"results bundle lacks {exc}") from exc
    problems = []
    optimal_flows: dict[str, list] = {}
    for k, row in enumerate(rows):
        tag = f"row {k} ({row.get('topology')}, {row.get('algorithm')}, {row.get('m_percent')})"
        if str(row.get("status", "")).startswith("error"):
            continue
        inst = instances.get(instance_key(row["topology"], row["m_percent"]))
        if inst is None or row.get("plan") is None:
            problems.append(f"{tag}: no instance or plan stored")
            continue
        plan = Plan.from_dict(row["plan"])
        violations = check_feasibility(inst, plan)
        for v in violations:
            problems.append(f"{tag}: constraint ({v.constraint}) violated: {v.detail}")
        if violations:
            continue
        m = evaluate(inst, plan)
        for name in ("flows", "n_controllers"):
            if row[name] != getattr(m, name):
                problems.append(f"{tag}: {name} stored {row[name]} but replay gives {getattr(m, name)}")
        for name in ("sc_delay", "cc_delay", "ratio"):
            if not _close(float(row[name]), getattr(m, name)):
                problems.append(f"{tag}: {name} stored {row[name]!r} but replay gives {getattr(m, name)!r}")
        for name in ("wall_time", "gap"):
            if not math.isfinite(float(row[name])):
                problems.append(f"{tag}: {name} is not finite")
        if row["algorithm"] == "optimal" and row["status"] == "optimal":
            optimal_flows.setdefault(row["topology"], []).append((row["m_percent"], m.flows))
    for topo, pts in optimal_flows.items():
        pts.sort()
        for (m0, f0), (m1, f1) in zip(pts, pts[1:]):
            if f1 < f0:
                problems.append(f"{topo}: optimal flows drop from {f0} at m={m0} to {f1} at m={m1}")
    return problems


def validate_or_raise(bundle) -> None:
    problems = validate_bundle(bundle)
    if problems:
        raise ValidationFailure(f"{len(problems)} problem(s) in results bundle", problems)


@dataclass(frozen=True)
class CompareRow:
    topology: str
    m_percent: float
    formulation: str
    root_bound: float
    incumbent: float
    nodes: int
    lp_solves: int
    wall_time: float        # ms
    status: str


def compare_formulations(topologies, m_percents=(0.5,), capacity: int = 50, gamma: int = 4,
                         time_limit: float | None = None, distance: str = "geodesic",
                         format: str | None = None,
                         formulations=(Formulation.P, Formulation.P_PRIME)) -> list[CompareRow]:
    """Root bound, node count and time of the original versus strengthened formulation."""
    out = []
    for spec in topologies:
        topo = resolve_topology(spec, format)
        name = topo.name or Path(spec).stem
        for m in m_percents:
            inst = build_instance(topo, m, capacity, gamma, distance=distance)
            for f in formulations:
                rep = branch_and_bound(inst, f, Limits(time=time_limit))
                out.append(CompareRow(name, m, Formulation(f).value, rep.root_bound,
                                      rep.incumbent_value, rep.nodes_explored, rep.lp_solves,
                                      rep.wall_time * 1000.0, rep.status))
    return out


def compare_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = [f.name for f in fields(CompareRow)]
    w.writerow(names)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in (getattr(r, n) for n in names)])
    return buf.getvalue()
