"""Tests for polybound.polynomial."""

import pytest

from polybound.polynomial import (
    Constraint,
    Monomial,
    Polynomial,
    PolynomialProgram,
    UnassignedVariableError,
    VariableSpec,
    check_feasibility,
    evaluate,
    normalize_program,
)

x = Polynomial.variable("x")
y = Polynomial.variable("y")


# --- canonical form ----------------------------------------------------------


def test_like_terms_merge_and_zeros_vanish():
    p = 2 * x * y + 3 * y * x - 5 * x * y + x
    assert p == x
    assert (x - x).is_zero


def test_terms_ordered_by_degree():
    p = x**2 + 1 + y
    assert [m.degree for _, m in p.terms] == [0, 1, 2]
    assert str(p) == "1 + y + x^2"


def test_monomial_requires_sorted_unique_powers():
    with pytest.raises(ValueError):
        Monomial((("y", 1), ("x", 1)))
    with pytest.raises(ValueError):
        Monomial((("x", 0),))


def test_monomial_product_and_factors():
    m = Monomial.variable("x") * Monomial.from_map({"x": 1, "y": 2})
    assert m.powers == (("x", 2), ("y", 2))
    assert m.factors() == ("x", "x", "y", "y")
    assert m.degree == 4


def test_power_and_degree():
    p = (x + y) ** 3
    assert p.degree == 3
    assert p.coefficient(Monomial.from_map({"x": 2, "y": 1})) == 3.0
    with pytest.raises(ValueError):
        x ** -1


def test_substitute_folds_constants():
    p = 3 * x * y + y
    assert p.substitute({"y": 2.0}) == 6 * x + 2


def test_str_of_pp1_objective(pp1):
    assert str(pp1.objective) == (
        "5*x2 + x3 - 2*x1*x2 - 3*x1*x3 + x1^2 + 5*x2*x3 - x3^2 + x1*x2*x3"
    )


# --- evaluation --------------------------------------------------------------


def test_evaluate_pp1_objective_at_known_point(pp1):
    # x(w-) of the reformulation with sigma (3, 2, 2)
    assert evaluate(pp1.objective, {"x1": 3, "x2": 0, "x3": 8}) == pytest.approx(-119.0)


def test_evaluate_missing_variable():
    with pytest.raises(UnassignedVariableError) as info:
        evaluate(x * y, {"x": 1.0})
    assert info.value.name == "y"
    assert "y" in str(info.value)


# --- variables ---------------------------------------------------------------


def test_variable_spec_validation():
    with pytest.raises(ValueError):
        VariableSpec.continuous("x", 2, 1)
    with pytest.raises(ValueError):
        VariableSpec.continuous("x", 0, float("inf"))
    with pytest.raises(ValueError):
        VariableSpec.discrete("x", 0, 1, 0.3)


def test_discrete_values_and_grid_distance():
    spec = VariableSpec.discrete("x", 1, 1.375, 0.0625)
    assert len(spec.values()) == 7
    assert spec.grid_distance(1.0625) == pytest.approx(0.0)
    assert spec.grid_distance(1.07) == pytest.approx(0.0075)


# --- programs ----------------------------------------------------------------


def test_program_rejects_undeclared_variable():
    with pytest.raises(ValueError):
        PolynomialProgram([VariableSpec.continuous("x", 0, 1)], x * y)


class TestNormalize:
    def setup_method(self):
        self.pp = PolynomialProgram(
            variables=[
                VariableSpec.continuous("x", 0, 2),
                VariableSpec.continuous("y", -1, 1),
                VariableSpec.fixed("k", 3),
            ],
            objective=x * y + Polynomial.variable("k"),
            constraints=[
                Constraint(x + y, ">=", 1.0, "low"),
                Constraint(x * x, "=", 1.0),
            ],
        )

    def test_relations_become_le_zero(self):
        norm = normalize_program(self.pp)
        assert norm.is_normalized
        assert [c.name for c in norm.constraints] == ["low", "c2_le", "c2_ge"]
        assert norm.constraints[0].body == 1 - x - y
        assert norm.constraints[2].body == -(x * x) + 1

    def test_fixed_variables_become_constants(self):
        norm = normalize_program(self.pp)
        assert norm.variable_names == ("x", "y")
        assert norm.constant_map() == {"k": 3.0}
        assert norm.objective == x * y + 3

    def test_idempotent(self):
        norm = normalize_program(self.pp)
        assert normalize_program(norm) is norm


class TestCheckFeasibility:
    def test_feasible_point(self, pp1):
        assert check_feasibility(pp1, {"x1": 3, "x2": 0, "x3": 8})

    def test_reports_each_violation(self, pp1):
        report = check_feasibility(pp1, {"x1": 5, "x2": 1, "x3": 9})
        assert not report.feasible
        assert set(report.violated_names) == {"bound:x3", "cap"}

    def test_tolerance(self, pp1):
        # 4*5 + 0 + 4 = 24 > 20 by 4
        point = {"x1": 5, "x2": 0, "x3": 4}
        assert not check_feasibility(pp1, point, tol=1.0)
        assert check_feasibility(pp1, point, tol=4.5)

    def test_optimistic_pp3_point_misses_the_ellipsoid(self, pp3):
        # on the plane, but x1^2 + 2/3 x2^2 + 1/4 x3^2 comes out near 4.001
        report = check_feasibility(pp3, {"x1": -0.375, "x2": -1.65897, "x3": 2.84647}, 1e-6)
        assert not report.feasible
        assert report.violated_names == ["ellipsoid_le"]
        assert report.violations[0].amount == pytest.approx(1.01e-3, abs=2e-5)

    def test_off_grid_discrete(self, pp2):
        point = {"x1": 1.03, "x2": 0.625, "x3": 47.5, "x4": 90}
        assert "grid:x1" in check_feasibility(pp2, point).violated_names

    def test_missing_value(self, pp1):
        with pytest.raises(UnassignedVariableError):
            check_feasibility(pp1, {"x1": 3, "x2": 0})
