"""Tests for polybound.reformulator."""

import itertools
import math
import random

import pytest

from tests.conftest import PP1_SIGMA, PP2_SIGMA, PP3_SIGMA, make_random_program
from polybound.polynomial import Monomial, Polynomial, PolynomialProgram, VariableSpec
from polybound.reformulator import (
    ErrorBounds,
    LinearExpr,
    ReformParams,
    ReformulationError,
    UnitProduct,
    UnitProductRegistry,
    element_coefficient,
    expand_monomial,
    expand_variable,
    kappa_from_sigma,
    linearize_element,
    linearize_polynomial,
    product_constraints,
    reformulate,
    sigma_from_kappa,
    size_bounds,
)


# --- sigma / kappa -----------------------------------------------------------

PP1_BOXES = [(2, 5, 3, 0.375), (0, 10, 2, 2.5), (4, 8, 2, 1.0)]
PP2_CONTINUOUS = [(47.5, 52.5, 9, 0.009765625), (90, 112, 5, 0.6875)]


@pytest.mark.parametrize("alpha,beta,sigma,kappa", PP1_BOXES + PP2_CONTINUOUS)
def test_kappa_and_sigma_are_inverse(alpha, beta, sigma, kappa):
    assert kappa_from_sigma(alpha, beta, sigma, False) == pytest.approx(kappa, rel=1e-6)
    assert sigma_from_kappa(alpha, beta, kappa, False) == sigma


def test_discrete_sigma_counts_grid_points():
    # 7 grid points need 3 bits
    assert sigma_from_kappa(1, 1.375, 0.0625, True) == 3
    assert kappa_from_sigma(1, 1.375, 3, True) == pytest.approx(0.375 / 7)
    with pytest.raises(ReformulationError):
        kappa_from_sigma(0, 1, 0, True)


def test_sigma_from_kappa_rounds_up():
    assert sigma_from_kappa(0, 10, 3.0, False) == 2
    assert sigma_from_kappa(0, 10, 2.4, False) == 3
    assert sigma_from_kappa(3, 3, 1.0, False) == 0


class TestParams:
    def test_sigma_and_kappa_exclusive(self):
        with pytest.raises(ReformulationError, match="both given for x"):
            ReformParams(sigma={"x": 2}, kappa={"x": 0.5})

    def test_rejects_bad_values(self):
        with pytest.raises(ReformulationError):
            ReformParams(sigma={"x": -1})
        with pytest.raises(ReformulationError):
            ReformParams(sigma={"x": 1.5})
        with pytest.raises(ReformulationError):
            ReformParams(kappa={"x": 0.0})

    def test_from_sequence(self):
        params = ReformParams.from_sequence(["a", "b"], [1, 2])
        assert params.sigma == {"a": 1, "b": 2}
        with pytest.raises(ReformulationError):
            ReformParams.from_sequence(["a"], [1, 2])

    def test_unknown_variable_rejected(self, pp1):
        with pytest.raises(ReformulationError, match="unknown variables"):
            reformulate(pp1, ReformParams(sigma={"x9": 1}))


# --- variable expansion ------------------------------------------------------


def test_expansion_of_pp1_x1():
    exp = expand_variable(VariableSpec.continuous("x1", 2, 5), ReformParams(sigma={"x1": 3}))
    assert exp.unit_ids == ("u.x1.1", "u.x1.2", "u.x1.3")
    assert exp.weights() == (0.375, 0.75, 1.5)
    assert exp.remainder_id == "r.x1"
    assert exp.max_value == pytest.approx(5.0)
    assert not exp.needs_upper_bound_constraint
    point = {"u.x1.1": 1, "u.x1.2": 0, "u.x1.3": 1, "r.x1": 0.5}
    assert exp.value(point) == pytest.approx(2 + 0.375 + 1.5 + 0.1875)


def test_discrete_expansion_uses_step_and_bounds_overshoot(pp2):
    exp = expand_variable(pp2.variable("x1"), ReformParams())
    assert (exp.sigma, exp.kappa) == (3, 0.0625)
    assert exp.remainder_id is None
    # 1 + 7 * 0.0625 > 1.375
    assert exp.needs_upper_bound_constraint


def test_discrete_overrides():
    spec = VariableSpec.discrete("x", 0, 3, 1)
    assert expand_variable(spec, ReformParams(sigma={"x": 4})).sigma == 4
    with pytest.raises(ReformulationError, match="at least 2"):
        expand_variable(spec, ReformParams(sigma={"x": 1}))
    with pytest.raises(ReformulationError, match="grid"):
        expand_variable(spec, ReformParams(kappa={"x": 0.5}))


def test_linear_only_continuous_variable_gets_no_units():
    x, z = Polynomial.variable("x"), Polynomial.variable("z")
    pp = PolynomialProgram(
        [VariableSpec.continuous("x", 0, 1), VariableSpec.continuous("z", 0, 8)],
        x * x + 3 * z,
    )
    reform = reformulate(pp)
    assert reform.expansions["z"].sigma == 0
    assert reform.expansions["z"].kappa == 8.0
    assert reform.expansions["x"].sigma == 4
    # an explicit setting wins
    assert reformulate(pp, ReformParams(sigma={"z": 2})).expansions["z"].sigma == 2


def test_fixed_variable_cannot_be_expanded():
    with pytest.raises(ReformulationError):
        expand_variable(VariableSpec.fixed("k", 1), ReformParams())


# --- monomial expansion ------------------------------------------------------


class TestPP1Expansion:
    def setup_method(self):
        self.params = ReformParams(sigma=PP1_SIGMA)

    def test_kappas(self, pp1):
        reform = reformulate(pp1, self.params)
        kappas = [reform.expansions[n].kappa for n in ("x1", "x2", "x3")]
        assert kappas == pytest.approx([0.375, 2.5, 1.0])

    def test_x2_x3_has_twelve_elements(self, pp1):
        reform = reformulate(pp1, self.params)
        mono = Monomial.from_map({"x2": 1, "x3": 1})
        elements = expand_monomial(mono, reform.expansions)
        assert len(elements) == 12
        by_vars = {(e.unit_vars, e.remainder_vars): e.coefficient for e in elements}
        # x2 has alpha = 0, so alpha_3 pairs with each x2 unit and r.x2
        assert by_vars[(("u.x2.1",), ())] == pytest.approx(4 * 2.5)
        assert by_vars[(("u.x2.2",), ())] == pytest.approx(4 * 5.0)
        assert by_vars[((), ("r.x2",))] == pytest.approx(4 * 2.5)
        assert by_vars[(("u.x2.2", "u.x3.2"), ())] == pytest.approx(5.0 * 2.0)
        assert by_vars[((), ("r.x2", "r.x3"))] == pytest.approx(2.5 * 1.0 / 2)
        for e in elements:
            assert element_coefficient(e, reform.expansions) == pytest.approx(e.coefficient)

    def test_x2_x3_error_bounds(self, pp1):
        reform = reformulate(pp1, self.params)
        term = Polynomial([(1.0, Monomial.from_map({"x2": 1, "x3": 1}))])
        _, errors = linearize_polynomial(term, reform.expansions, UnitProductRegistry())
        assert errors == ErrorBounds(0.0, 1.25)

    def test_objective_error_bounds(self, pp1):
        reform = reformulate(pp1, self.params)
        assert reform.objective.errors.errlb == pytest.approx(-2.0)
        assert reform.objective.errors.errub == pytest.approx(17.4140625)
        # linear constraints are exact
        for con in reform.constraints:
            assert con.errors == ErrorBounds(0.0, 0.0)

    def test_constant_element_leads(self, pp1):
        reform = reformulate(pp1, self.params)
        elements = expand_monomial(Monomial.variable("x1", 2), reform.expansions)
        assert elements[0].is_constant
        assert elements[0].coefficient == pytest.approx(4.0)


# --- products ----------------------------------------------------------------


def test_registry_interns_and_resolves_trivial_products():
    reg = UnitProductRegistry()
    assert reg.resolve((), None) is None
    assert reg.resolve(("u.a.1",), None) == "u.a.1"
    assert reg.resolve((), "r.a") == "r.a"
    first = reg.resolve(("u.b.1", "u.a.1"), "r.c")
    again = reg.resolve(("u.a.1", "u.b.1"), "r.c")
    assert first == again == "y.1"
    assert len(reg) == 1
    assert reg.requested == 2


def test_product_constraints_with_remainder():
    up = UnitProduct("y.1", ("u.x2.2", "u.x3.1"), "r.x3")
    cons = product_constraints(up)
    assert len(cons) == 4
    rows = {c.name: (c.expr.terms, c.rhs) for c in cons}
    assert rows["y.1:u.x2.2"] == ({"y.1": 1.0, "u.x2.2": -1.0}, 0.0)
    assert rows["y.1:lo"] == ({"u.x2.2": 1.0, "u.x3.1": 1.0, "r.x3": 1.0, "y.1": -1.0}, 2.0)
    assert rows["y.1:r.x3"] == ({"y.1": 1.0, "r.x3": -1.0}, 0.0)


def test_product_constraints_units_only():
    up = UnitProduct("y.2", ("u.a.1", "u.b.1", "u.c.1"))
    cons = product_constraints(up)
    assert len(cons) == 4
    lo = [c for c in cons if c.name == "y.2:lo"][0]
    assert lo.rhs == 2.0
    assert product_constraints(UnitProduct("y.3", ("u.a.1",))) == []


def test_linear_expr_arithmetic():
    a = LinearExpr({"p": 1.0, "q": 2.0}, 1.0)
    b = LinearExpr({"q": -2.0}, 0.5)
    assert a + b == LinearExpr({"p": 1.0}, 1.5)
    assert (a - a).terms == {}
    assert a.evaluate({"p": 2.0, "q": 1.0}) == 5.0
    assert a.without_constant().constant == 0.0


# --- statistics --------------------------------------------------------------


@pytest.mark.parametrize(
    "fixture,sigma", [("pp1", PP1_SIGMA), ("pp2", PP2_SIGMA), ("pp3", PP3_SIGMA)]
)
def test_phi_and_size_bounds(fixture, sigma, request):
    pp = request.getfixturevalue(fixture)
    reform = reformulate(pp, ReformParams(sigma=sigma))
    stats = reform.statistics()
    assert stats.phi == sum(sigma.values())
    assert stats.psi <= stats.psi_requested
    psi_bound, rho_bound = stats.size_bounds()
    assert stats.psi_requested <= psi_bound
    assert stats.rho_requested <= rho_bound
    assert len(reform.unit_ids) == stats.phi


def test_size_bounds_formula():
    assert size_bounds(2, 3, 1) == (2 * 3 * 27, 2 * 9 * 4 * 27)


# --- sandwich ----------------------------------------------------------------


def random_lifted_point(rng, reform):
    point = {u: float(rng.randint(0, 1)) for u in reform.unit_ids}
    point.update({r: rng.random() for r in reform.remainder_ids})
    for up in reform.registry.products():
        value = point[up.remainder] if up.remainder else 1.0
        for u in up.unit_vars:
            value *= point[u]
        point[up.id] = value
    return point


def check_sandwich(pp, reform, rng, samples):
    polys = [reform.program.objective] + [c.body for c in reform.program.constraints]
    lins = [reform.objective] + list(reform.constraints)
    for _ in range(samples):
        point = random_lifted_point(rng, reform)
        x = {name: exp.value(point) for name, exp in reform.expansions.items()}
        for poly, lin in zip(polys, lins):
            exact = poly.evaluate(x)
            scale = 1e-9 * max(1.0, abs(exact))
            assert lin.llb.evaluate(point) <= exact + scale
            assert exact <= lin.lub.evaluate(point) + scale


def test_sandwich_on_pp1(pp1):
    reform = reformulate(pp1, ReformParams(sigma=PP1_SIGMA))
    check_sandwich(pp1, reform, random.Random(1), 500)


@pytest.mark.parametrize("seed", range(20))
def test_sandwich_on_random_programs(seed):
    pp = make_random_program(seed, n_vars=2 + seed % 2)
    sigma = {name: 1 + (seed + i) % 4 for i, name in enumerate(pp.variable_names)}
    reform = reformulate(pp, ReformParams(sigma=sigma))
    check_sandwich(pp, reform, random.Random(seed), 200)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(20, 220))
def test_sandwich_sweep(seed):
    pp = make_random_program(seed, n_vars=2 + seed % 2)
    sigma = {name: (seed * 7 + i) % 5 for i, name in enumerate(pp.variable_names)}
    reform = reformulate(pp, ReformParams(sigma=sigma))
    check_sandwich(pp, reform, random.Random(seed), 1000)


# --- exactness of the distributed products ------------------------------------


@pytest.mark.parametrize(
    "fixture,sigma",
    [("pp1", PP1_SIGMA), ("pp2", PP2_SIGMA), ("pp3", PP3_SIGMA)],
)
def test_elements_sum_to_monomial(fixture, sigma, request):
    pp = request.getfixturevalue(fixture)
    reform = reformulate(pp, ReformParams(sigma=sigma))
    rng = random.Random(7)
    for _ in range(50):
        point = random_lifted_point(rng, reform)
        x = {name: exp.value(point) for name, exp in reform.expansions.items()}
        for mono in reform.program.monomial_basis():
            elements = expand_monomial(mono, reform.expansions)
            exact = Polynomial([(1.0, mono)]).evaluate(x)
            total = math.fsum(e.value(point) for e in elements)
            assert total == pytest.approx(exact, rel=1e-9, abs=1e-9)


def test_expanded_point_stays_in_box(pp1):
    reform = reformulate(pp1, ReformParams(sigma=PP1_SIGMA))
    rng = random.Random(3)
    for _ in range(200):
        point = random_lifted_point(rng, reform)
        for name, exp in reform.expansions.items():
            assert exp.alpha - 1e-12 <= exp.value(point) <= exp.beta + 1e-12


# --- remainder means -------------------------------------------------------------


@pytest.mark.parametrize("n", range(1, 7))
def test_sum_minus_scaled_product_bounds(n):
    # n * prod(r) is replaced by sum(r); the gap stays within [0, n - 1]
    rng = random.Random(n)
    for _ in range(1000):
        r = [rng.random() for _ in range(n)]
        gap = sum(r) - n * math.prod(r)
        assert -1e-12 <= gap <= n - 1 + 1e-12


def exact_products(registry, point):
    values = dict(point)
    for up in registry.products():
        value = values[up.remainder] if up.remainder else 1.0
        for u in up.unit_vars:
            value *= values[u]
        values[up.id] = value
    return values


class TestElementErrors:
    """Linearized minus exact value of one element lies in [0, a * (n_kl - 1)]."""

    def setup_method(self):
        self.params = ReformParams(sigma=PP1_SIGMA)

    def elements(self, pp1, powers):
        reform = reformulate(pp1, self.params)
        return expand_monomial(Monomial.from_map(powers), reform.expansions)

    def error(self, elem, point):
        registry = UnitProductRegistry()
        lin = linearize_element(elem, registry)
        return lin.evaluate(exact_products(registry, point)) - elem.value(point)

    def test_both_ends_attained(self, pp1):
        spread = [e for e in self.elements(pp1, {"x1": 1, "x2": 1, "x3": 1}) if e.n_r >= 2]
        assert {e.n_r for e in spread} == {2, 3}
        for elem in spread:
            ones = {v: 1.0 for v in elem.unit_vars + elem.remainder_vars}
            assert self.error(elem, ones) == pytest.approx(0.0, abs=1e-12)
            worst = dict(ones, **{elem.remainder_vars[-1]: 0.0})
            assert self.error(elem, worst) == pytest.approx(
                elem.coefficient * (elem.n_kl - 1), rel=1e-12
            )

    def test_error_within_limits(self, pp1):
        rng = random.Random(11)
        for elem in self.elements(pp1, {"x1": 2, "x3": 1}):
            limit = elem.coefficient * (elem.n_kl - 1)
            for _ in range(100):
                point = {v: float(rng.randint(0, 1)) for v in elem.unit_vars}
                point.update({r: rng.random() for r in elem.remainder_vars})
                err = self.error(elem, point)
                assert min(0.0, limit) - 1e-12 <= err <= max(0.0, limit) + 1e-12

    def test_x2_x3_remainder_pair_reaches_errub(self, pp1):
        (elem,) = [
            e for e in self.elements(pp1, {"x2": 1, "x3": 1})
            if e.remainder_vars == ("r.x2", "r.x3")
        ]
        assert elem.coefficient == pytest.approx(1.25)
        assert self.error(elem, {"r.x2": 1.0, "r.x3": 0.0}) == pytest.approx(1.25)


# --- unit product constraints ----------------------------------------------------


def y_range(up, point):
    """Interval of y values the product constraints and 0 <= y <= 1 allow."""
    lo, hi = 0.0, 1.0
    for con in product_constraints(up):
        c_y = con.expr.coefficient(up.id)
        rest = con.expr.evaluate({**point, up.id: 0.0})
        limit = (con.rhs - rest) / c_y
        if c_y > 0:
            hi = min(hi, limit)
        else:
            lo = max(lo, limit)
    return lo, hi


@pytest.mark.parametrize("n_u", range(1, 5))
@pytest.mark.parametrize("with_remainder", [False, True])
def test_product_constraints_pin_y(n_u, with_remainder):
    if n_u == 1 and not with_remainder:
        pytest.skip("a single unit is its own product")
    units = tuple(f"u.v{i}.1" for i in range(n_u))
    up = UnitProduct("y.1", units, "r.w" if with_remainder else None)
    rng = random.Random(n_u)
    for bits in itertools.product((0.0, 1.0), repeat=n_u):
        for r in [0.0, 1.0] + [rng.random() for _ in range(5)]:
            point = dict(zip(units, bits))
            if with_remainder:
                point["r.w"] = r
            product = math.prod(bits) * (r if with_remainder else 1.0)
            for con in product_constraints(up):
                assert con.violation({**point, "y.1": product}) <= 1e-12
            lo, hi = y_range(up, point)
            assert lo == pytest.approx(product, abs=1e-12)
            assert hi == pytest.approx(product, abs=1e-12)


def constraint_set(cons):
    return {(frozenset(c.expr.terms.items()), c.rhs) for c in cons}


class TestPP1ProductConstraints:
    def setup_method(self):
        self.params = ReformParams(sigma=PP1_SIGMA)

    def product(self, pp1, units, remainder):
        reform = reformulate(pp1, self.params)
        (up,) = [p for p in reform.registry.products() if p.signature == (units, remainder)]
        return up

    def test_two_units(self, pp1):
        # u21 >= y, u31 >= y, u21 + u31 <= 1 + y
        up = self.product(pp1, ("u.x2.1", "u.x3.1"), None)
        y = up.id
        assert constraint_set(product_constraints(up)) == {
            (frozenset({y: 1.0, "u.x2.1": -1.0}.items()), 0.0),
            (frozenset({y: 1.0, "u.x3.1": -1.0}.items()), 0.0),
            (frozenset({"u.x2.1": 1.0, "u.x3.1": 1.0, y: -1.0}.items()), 1.0),
        }

    def test_unit_and_remainder(self, pp1):
        # u21 >= y, u21 + r3 <= 1 + y, r3 >= y
        up = self.product(pp1, ("u.x2.1",), "r.x3")
        y = up.id
        assert constraint_set(product_constraints(up)) == {
            (frozenset({y: 1.0, "u.x2.1": -1.0}.items()), 0.0),
            (frozenset({"u.x2.1": 1.0, "r.x3": 1.0, y: -1.0}.items()), 1.0),
            (frozenset({y: 1.0, "r.x3": -1.0}.items()), 0.0),
        }


# --- determinism ------------------------------------------------------------------


def test_reformulating_twice_is_identical(pp3):
    first = reformulate(pp3, ReformParams(sigma=PP3_SIGMA))
    second = reformulate(pp3, ReformParams(sigma=PP3_SIGMA))
    assert [p.signature for p in first.registry.products()] == [
        p.signature for p in second.registry.products()
    ]
    assert first.objective == second.objective
    assert first.constraints == second.constraints
    assert first.product_constraints == second.product_constraints
