import csv
import io
import json

import pytest

from sdnplan import bench
from sdnplan.cli import main
from sdnplan.errors import MalformedInput, ValidationFailure
from sdnplan.topology import bundled, load_topology, to_edge_csv


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_plan_fig1_optimal(capsys):
    code, out, _ = run(capsys, "plan", "--topology", "fig1", "--algo", "optimal",
                       "--budget", "12", "--capacity", "6", "--gamma", "3")
    doc = json.loads(out)
    assert code == 0 and doc["metrics"]["flows"] == 11 and doc["status"] == "optimal"


def test_plan_att_mapfirst(capsys, tmp_path):
    out_file = tmp_path / "plan.json"
    code, out, _ = run(capsys, "plan", "--topology", str(bundled("Att")), "--algo", "mapfirst",
                       "--m-percent", "0.5", "--out", str(out_file))
    doc = json.loads(out)
    assert code == 0 and doc["budget"] == 50
    assert json.loads(out_file.read_text()) == doc
    for key in ("flows", "n_controllers", "sc_delay", "cc_delay"):
        assert key in doc["metrics"]


def test_plan_edge_csv_and_hops(capsys, tmp_path):
    path = tmp_path / "att.csv"
    path.write_text(to_edge_csv(load_topology(bundled("Att"))))
    code, out, _ = run(capsys, "plan", "--topology", str(path), "--format", "edge_csv",
                       "--distance", "hops", "--algo", "weightfirst")
    assert code == 0 and json.loads(out)["metrics"]["flows"] > 0


@pytest.mark.parametrize("argv,code", [
    (["plan", "--topology", "/no/such/file.graphml"], MalformedInput.exit_code),
    (["plan", "--topology", "fig1", "--m-percent", "1.5"], MalformedInput.exit_code),
])
def test_error_exit_codes(capsys, argv, code):
    got, _, err = run(capsys, *argv)
    assert got == code and "error:" in err


def test_distinct_exit_codes():
    from sdnplan import errors
    classes = [c for c in vars(errors).values()
               if isinstance(c, type) and issubclass(c, errors.PlannerError)]
    codes = [c.exit_code for c in classes]
    assert len(codes) == len(set(codes)) and 0 not in codes


def test_sweep_and_validate(capsys, tmp_path):
    stem = tmp_path / "res"
    code, out, _ = run(capsys, "sweep", "--topology", "Att", "--algo", "mapfirst", "weightfirst",
                       "--out", str(stem))
    assert code == 0
    rows = list(csv.DictReader(io.StringIO((tmp_path / "res.csv").read_text())))
    assert len(rows) == 20
    assert list(rows[0]) == list(bench.CSV_COLUMNS)
    assert [r["algorithm"] for r in rows] == ["mapfirst"] * 10 + ["weightfirst"] * 10
    code, out, _ = run(capsys, "validate", str(tmp_path / "res.json"))
    assert code == 0 and "ok" in out

    bundle = json.loads((tmp_path / "res.json").read_text())
    assert bundle["config"]["m_percents"] == list(bench.DEFAULT_M_PERCENTS)
    victim = next(r for r in bundle["rows"] if r["plan"]["mappings"])
    victim["plan"]["mappings"] = victim["plan"]["mappings"][1:]
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(bundle))
    code, out, _ = run(capsys, "validate", str(broken))
    assert code == ValidationFailure.exit_code and "constraint (3)" in out


def test_validate_catches_metric_drift(tmp_path):
    cfg = bench.SweepConfig(("fig1",), m_percents=(0.5,), capacity=6, gamma=3,
                            algorithms=("mapfirst",))
    doc = bench.run_sweep(cfg, workers=1).to_dict()
    assert bench.validate_bundle(doc) == []
    doc["rows"][0]["sc_delay"] += 1e-3
    problems = bench.validate_bundle(doc)
    assert len(problems) == 1 and "sc_delay" in problems[0]
    doc["rows"][0]["sc_delay"] -= 1e-3
    doc["rows"][0]["flows"] += 1
    assert "flows" in bench.validate_bundle(doc)[0]


def test_validate_flags_nonmonotone_optimal():
    cfg = bench.SweepConfig(("fig1",), m_percents=(0.5, 1.0), capacity=6, gamma=3,
                            algorithms=("optimal",))
    doc = bench.run_sweep(cfg, workers=1).to_dict()
    assert bench.validate_bundle(doc) == []
    lo, hi = doc["rows"]
    assert lo["flows"] < hi["flows"]
    # the smaller plan stays feasible under the larger budget, so only the trend check fires
    for key in ("plan", "flows", "n_controllers", "sc_delay", "cc_delay", "ratio"):
        hi[key] = lo[key]
    lo_inst = doc["instances"][bench.instance_key("fig1", 0.5)]
    doc["instances"][bench.instance_key("fig1", 0.5)] = dict(lo_inst, budget=18)
    lo_plan = bench.run_sweep(bench.SweepConfig(("fig1",), m_percents=(1.0,), capacity=6, gamma=3,
                                                algorithms=("optimal",)), workers=1).rows[0]
    for key in ("flows", "n_controllers", "sc_delay", "cc_delay", "ratio"):
        lo[key] = getattr(lo_plan, key)
    lo["plan"] = lo_plan.plan.to_dict()
    problems = bench.validate_bundle(doc)
    assert len(problems) == 1 and "drop" in problems[0]


def test_sweep_config_validation():
    with pytest.raises(MalformedInput):
        bench.SweepConfig(())
    with pytest.raises(MalformedInput):
        bench.SweepConfig(("Att",), algorithms=())
    with pytest.raises(MalformedInput):
        bench.SweepConfig(("Att",), m_percents=(0.0,))
    with pytest.raises(MalformedInput):
        bench.SweepConfig(("Att",), algorithms=("magic",))
    cfg = bench.SweepConfig(("Att",))
    assert bench.SweepConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_sweep_rerun_identical(monkeypatch):
    cfg = bench.SweepConfig(("Att",), m_percents=(0.1, 0.3), algorithms=("mapfirst", "weightfirst", "flowonly"))
    monkeypatch.setenv("PLANNER_THREADS", "2")
    a = bench.run_sweep(cfg)
    b = bench.run_sweep(cfg, workers=1)
    strip = lambda rows: [(r.topology, r.algorithm, r.m_percent, r.flows, r.n_controllers, r.sc_delay,
                           r.cc_delay, r.plan.to_json()) for r in rows]
    assert strip(a.rows) == strip(b.rows)


def test_worker_cap(monkeypatch):
    monkeypatch.setenv("PLANNER_THREADS", "3")
    assert bench.worker_count(10) == 3 and bench.worker_count(2) == 2
    monkeypatch.setenv("PLANNER_THREADS", "bogus")
    assert bench.worker_count(1) == 1


def test_error_rows_do_not_stop_sweep(tmp_path):
    lonely = tmp_path / "lonely.graphml"
    lonely.write_text('''<?xml version="1.0" encoding="utf-8"?>
<graphml xmlns="http://graphml.graphdrawing.org/xmlns">
  <key attr.name="Latitude" attr.type="double" for="node" id="d0" />
  <key attr.name="Longitude" attr.type="double" for="node" id="d1" />
  <graph edgedefault="undirected">
    <node id="a"><data key="d0">0</data><data key="d1">0</data></node>
    <node id="b"><data key="d0">0</data><data key="d1">1</data></node>
  </graph>
</graphml>
''')
    cfg = bench.SweepConfig((str(lonely), "/no/such.graphml", "fig1"), m_percents=(0.5,),
                            algorithms=("optimal", "mapfirst"), capacity=6, gamma=3)
    res = bench.run_sweep(cfg, workers=1)
    assert len(res.rows) == 6
    status = {(r.topology, r.algorithm): r.status for r in res.rows}
    assert status[("lonely", "mapfirst")].startswith("error: AllFlowsZero")
    assert status[("/no/such.graphml", "optimal")].startswith("error: MalformedInput")
    assert status[("fig1", "optimal")] == "optimal"
    assert bench.validate_bundle(res.to_dict()) == []


def test_compare(capsys):
    code, out, _ = run(capsys, "compare", "--topology", "Att", "--m-percent", "0.5")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [r["formulation"] for r in rows] == ["P", "P_PRIME"]
    assert float(rows[1]["root_bound"]) <= float(rows[0]["root_bound"]) + 1e-6
