import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdnplan.errors import InvalidPartitionData, TooLarge
from sdnplan.exact import (Limits, SolveReport, branch_and_bound, brute_force, enumerate_plans,
                           generate_3partition_instance, optimal_plans, two_stage_solve)
from sdnplan.instance import Plan, ProblemInstance, check_feasibility, evaluate
from sdnplan.synth import oracle_suite, random_instance

from conftest import small_instance


def check_report(inst, rep: SolveReport):
    assert check_feasibility(inst, rep.best_plan) == []
    assert rep.incumbent_value <= rep.best_bound + 1e-6
    if rep.status == "optimal":
        assert rep.gap <= 1e-6


def test_fig1_flow_optimum(fig1):
    rep = branch_and_bound(fig1, "P1")
    check_report(fig1, rep)
    assert rep.status == "optimal" and rep.incumbent_value == 11


def test_fig1_three_optimal_switch_sets(fig1):
    sets = {p.upgraded for p in optimal_plans(fig1, "P1")}
    # red {s2,s4,s6}, blue {s4,s5,s6}, green {s2,s4,s5}
    assert sets == {frozenset({1, 3, 5}), frozenset({3, 4, 5}), frozenset({1, 3, 4})}
    assert evaluate(fig1, brute_force(fig1, "P1")).flows == 11


def test_fig1_one_stage_matches_delay_minimum(fig1):
    best_delay = min(evaluate(fig1, p).sc_delay for p in optimal_plans(fig1, "P1"))
    for f in ("P", "P_PRIME"):
        rep = branch_and_bound(fig1, f)
        check_report(fig1, rep)
        m = evaluate(fig1, rep.best_plan)
        assert m.flows == 11 and m.sc_delay == pytest.approx(best_delay, abs=1e-9)


def test_fig1_two_stage(fig1):
    rep = two_stage_solve(fig1)
    assert rep.target_flows == 11 and rep.status == "optimal"
    assert len(rep.stages) == 2
    best_delay = min(evaluate(fig1, p).sc_delay for p in optimal_plans(fig1, "P1"))
    assert evaluate(fig1, rep.best_plan).sc_delay == pytest.approx(best_delay, abs=1e-9)
    strengthened = two_stage_solve(fig1, strengthened=True)
    a, b = evaluate(fig1, strengthened.best_plan), evaluate(fig1, rep.best_plan)
    assert (a.flows, a.sc_delay) == (b.flows, pytest.approx(b.sc_delay, abs=1e-9))


def test_budget_below_one_pair():
    inst = small_instance([3, 4, 5], capacity=20, budget=3, gamma=3)
    for f in ("P", "P_PRIME", "P1"):
        rep = branch_and_bound(inst, f)
        assert rep.best_plan == Plan() and rep.incumbent_value == 0
    assert brute_force(inst) == Plan()


def test_single_switch():
    inst = small_instance([5], capacity=5, budget=2, gamma=1)
    expect = Plan.from_mappings([(0, 0)])
    assert brute_force(inst) == expect
    assert branch_and_bound(inst, "P_PRIME").best_plan == expect


def test_zero_delay_two_stage():
    inst = small_instance([3, 2, 2, 4], capacity=6, budget=7, gamma=2)
    rep = two_stage_solve(inst)
    assert rep.incumbent_value == 0
    assert evaluate(inst, rep.best_plan).flows == max(
        evaluate(inst, p).flows for p in enumerate_plans(inst))


def test_infeasible_target():
    inst = small_instance([2, 2], capacity=5, budget=10, gamma=1)
    assert branch_and_bound(inst, "P2", target_flows=3).status == "infeasible"


def test_limits_report_honestly(att_topology):
    from sdnplan.instance import build_instance
    inst = build_instance(att_topology, 0.4)
    rep = branch_and_bound(inst, "P", Limits(nodes=5))
    assert rep.status == "feasible_time_limit"
    assert rep.nodes_explored <= 5
    check_report(inst, rep)
    doc = json.loads(rep.to_json())
    assert doc["status"] == "feasible_time_limit" and doc["best_plan"]["upgraded"]


def test_report_json(fig1):
    doc = json.loads(branch_and_bound(fig1, "P_PRIME").to_json())
    for key in ("status", "best_plan", "incumbent_value", "best_bound", "gap", "nodes_explored",
                "lp_solves", "wall_time"):
        assert key in doc


def test_brute_force_size_limit():
    inst = small_instance([1] * 9)
    with pytest.raises(TooLarge):
        brute_force(inst)


def test_enumeration_counts_by_hand():
    # N=2, R=[1,1], A=1, gamma=1, M=4: idle/idle, one switch on one of 2 controllers (x2 switches),
    # both switches on separate controllers (2 ways)
    inst = small_instance([1, 1], capacity=1, budget=4, gamma=1)
    assert len(list(enumerate_plans(inst))) == 1 + 4 + 2


def test_three_partition_generator():
    inst = generate_3partition_instance(2, [3, 3, 4, 3, 3, 4], 10)
    assert (inst.capacity, inst.budget, inst.gamma) == (10, 8, 1)
    assert not inst.d.any()
    assert evaluate(inst, brute_force(inst, "P1")).flows == 20
    assert branch_and_bound(inst, "P1").incumbent_value == 20
    with pytest.raises(InvalidPartitionData):
        generate_3partition_instance(1, [3, 3, 2], 8)
    with pytest.raises(InvalidPartitionData):
        generate_3partition_instance(1, [3, 3, 3], 8)
    with pytest.raises(InvalidPartitionData):
        generate_3partition_instance(2, [3, 3, 4], 10)


def test_three_partition_without_solution():
    # 4,4,4,4,4,6 cannot be split into two triples of 13
    inst = generate_3partition_instance(2, [4, 4, 4, 4, 4, 6], 13)
    best = evaluate(inst, brute_force(inst, "P1")).flows
    assert best < 26
    assert branch_and_bound(inst, "P1").incumbent_value == best
    assert branch_and_bound(inst, "P_PRIME").incumbent_value == pytest.approx(best)


def test_oracle_agreement_small_suite():
    for inst in oracle_suite(seed=99, count=40):
        want = evaluate(inst, brute_force(inst, "P"))
        for f in ("P", "P_PRIME"):
            rep = branch_and_bound(inst, f)
            check_report(inst, rep)
            got = evaluate(inst, rep.best_plan)
            assert got.flows == want.flows
            assert got.sc_delay == pytest.approx(want.sc_delay, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_engine_choice_does_not_change_optimum(seed):
    inst = random_instance(np.random.default_rng(seed), n_range=(3, 4))
    a = branch_and_bound(inst, "P_PRIME")
    b = branch_and_bound(inst, "P_PRIME", engine="simplex")
    assert a.incumbent_value == pytest.approx(b.incumbent_value, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_case_one_upgrades_everything(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    r = rng.integers(1, 6, n)
    gamma = int(rng.integers(1, 4))
    inst = ProblemInstance.create(r, np.zeros((n, n)), int(r.sum()) + 1,
                                  gamma * n + int(rng.integers(1, 3)), gamma)
    for plan in optimal_plans(inst, "P1"):
        assert plan.upgraded == frozenset(range(n))
    assert branch_and_bound(inst, "P_PRIME").best_plan.upgraded == frozenset(range(n))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_flows_monotone_in_budget(seed):
    base = random_instance(np.random.default_rng(seed), n_range=(3, 5))
    prev = -1
    for m in range(0, base.gamma * base.n + base.n + 1):
        inst = ProblemInstance.create(base.r, base.d, base.capacity, m, base.gamma)
        flows = evaluate(inst, branch_and_bound(inst, "P_PRIME").best_plan).flows
        assert flows >= prev
        prev = flows


def test_branching_orders_agree(fig1):
    for order in (("x", "y", "z"), ("y", "x", "z"), ("z", "x", "y")):
        assert branch_and_bound(fig1, "P_PRIME", branching=order).incumbent_value == pytest.approx(
            branch_and_bound(fig1, "P_PRIME").incumbent_value)
