"""Tests for polybound.branch_and_bound."""

import pytest

from tests.conftest import PP1_SIGMA, make_random_program
from polybound.branch_and_bound import (
    LIMIT,
    ORACLE_LIMIT,
    UNDECIDED,
    MilpOutcome,
    OracleLimitError,
    enumerate_oracle,
    solve_milp,
)
from polybound.milp_model import MilpModel, build_lower_program, build_upper_program
from polybound.reformulator import LinearConstraint, LinearExpr, ReformParams
from polybound.simplex import INFEASIBLE, OPTIMAL


def knapsack():
    return MilpModel(
        "knap",
        ["a", "b"],
        [("s", 0, 2)],
        [LinearConstraint(LinearExpr({"a": 2.0, "b": 2.0, "s": 1.0}), 3.0, "cap")],
        LinearExpr({"a": -3.0, "b": -2.0, "s": -0.5}),
    )


def test_small_knapsack():
    out = solve_milp(knapsack())
    assert out.status == OPTIMAL
    assert out.value == pytest.approx(-3.5)
    assert out.point["a"] == 1.0 and out.point["b"] == 0.0
    assert out.point["s"] == pytest.approx(1.0)
    assert out.gap == 0.0


def test_integer_infeasible_but_relaxation_feasible():
    model = MilpModel(
        "half",
        ["a", "b"],
        [],
        [
            LinearConstraint(LinearExpr({"a": 1.0, "b": 1.0}), 1.5, "le"),
            LinearConstraint(LinearExpr({"a": -1.0, "b": -1.0}), -1.5, "ge"),
        ],
        LinearExpr({"a": 1.0}),
    )
    out = solve_milp(model)
    assert out.status == INFEASIBLE
    assert out.gap == 0.0
    assert enumerate_oracle(model).status == INFEASIBLE


def test_no_binaries_is_one_lp():
    model = MilpModel(
        "lp",
        [],
        [("x", 0, 4)],
        [LinearConstraint(LinearExpr({"x": -1.0}), -1.0, "low")],
        LinearExpr({"x": 2.0}, 1.0),
    )
    out = solve_milp(model)
    assert out.status == OPTIMAL
    assert out.value == pytest.approx(3.0)
    assert out.nodes == 1


def test_outcome_gap():
    assert MilpOutcome(LIMIT, value=2.0, bound=1.5).gap == pytest.approx(0.5)
    assert MilpOutcome(UNDECIDED, bound=1.5).gap == float("inf")


class TestPP1:
    def setup_method(self):
        self.params = ReformParams(sigma=PP1_SIGMA)

    def test_lower_program_optimum(self, pp1):
        out = solve_milp(build_lower_program(pp1, self.params), audit=True)
        assert out.status == OPTIMAL
        assert out.value == pytest.approx(-124.799, abs=0.01)
        assert out.bound == out.value

    def test_oracle_agrees(self, pp1):
        model = build_lower_program(pp1, self.params)
        assert enumerate_oracle(model).value == pytest.approx(solve_milp(model).value, abs=1e-6)

    def test_threads_agree(self, pp1):
        model = build_upper_program(pp1, self.params)
        single = solve_milp(model)
        batched = solve_milp(model, threads=3)
        assert batched.status == single.status == OPTIMAL
        assert batched.value == pytest.approx(single.value, abs=1e-6)

    def test_node_limit_keeps_a_valid_bound(self, pp1):
        model = build_lower_program(pp1, self.params)
        optimum = solve_milp(model).value
        out = solve_milp(model, node_limit=3)
        assert out.status in (LIMIT, UNDECIDED, OPTIMAL)
        assert out.bound <= optimum + 1e-6
        if out.status == LIMIT:
            assert out.value >= optimum - 1e-6


def test_oracle_refuses_large_models():
    binaries = [f"u{i}" for i in range(ORACLE_LIMIT + 1)]
    model = MilpModel("big", binaries, [], [], LinearExpr({binaries[0]: 1.0}))
    with pytest.raises(OracleLimitError):
        enumerate_oracle(model)


@pytest.mark.parametrize("seed", range(12))
def test_agrees_with_oracle_on_random_programs(seed):
    pp = make_random_program(seed, n_vars=2 + seed % 2)
    sigma = {name: 1 + (seed + i) % 2 for i, name in enumerate(pp.variable_names)}
    params = ReformParams(sigma=sigma)
    for model in (build_lower_program(pp, params), build_upper_program(pp, params)):
        ours = solve_milp(model, audit=True)
        ref = enumerate_oracle(model)
        assert ours.status == ref.status
        if ref.status == OPTIMAL:
            assert ours.value == pytest.approx(ref.value, abs=1e-5)
            assert model.violations(ours.point.assignment) == []


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(12, 212))
def test_agrees_with_oracle_sweep(seed):
    pp = make_random_program(seed, n_vars=2 + seed % 2)
    sigma = {name: 1 + (seed + i) % 3 for i, name in enumerate(pp.variable_names)}
    model = build_lower_program(pp, ReformParams(sigma=sigma))
    ours = solve_milp(model)
    ref = enumerate_oracle(model)
    assert ours.status == ref.status
    if ref.status == OPTIMAL:
        assert ours.value == pytest.approx(ref.value, abs=1e-5)
