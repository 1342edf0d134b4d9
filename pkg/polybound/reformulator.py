"""
Binary reformulation of polynomial programs.

Each bounded variable is written as

    x = alpha + kappa * sum_j 2^(j-1) u_j + kappa * r

with binary unit variables u and a continuous remainder r in [0, 1] (absent
for discrete variables). Distributing a monomial over these expansions gives
elements: products of lower bounds, units and remainders. Products of several
remainders are replaced by their mean, which leaves only products of units
with at most one remainder. Those become unit-product variables y, tied to
their factors by linear constraints. The linearization error of every
element is bounded, which yields linear lower and upper bounding expressions
for every polynomial.
"""

import itertools
import math
import sys
import threading
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .polynomial import (
    Monomial,
    Polynomial,
    PolynomialProgram,
    UnassignedVariableError,
    VariableSpec,
    normalize_program,
)

# Unit variables used for a nonlinear continuous variable with no override.
DEFAULT_SIGMA = 4

# An expansion "overshoots" when its maximum exceeds beta by more than this
# (relative to max(1, |beta|)).
BOUND_SLACK = 1e-12

ALPHA = "alpha"
UNIT = "unit"
REMAINDER = "remainder"


class ReformulationError(ValueError):
    """Invalid reformulation parameters or inputs."""


# ----------------------------------------
# PARAMETERS AND THE SIGMA/KAPPA FORMULAS
# ----------------------------------------


@dataclass(frozen=True)
class ReformParams:
    """
    Per-variable resolution settings.

    For each variable at most one of ``sigma`` (number of unit variables) and
    ``kappa`` (error limit) may be given; the other is derived.
    """

    sigma: Mapping[str, int] = field(default_factory=dict)
    kappa: Mapping[str, float] = field(default_factory=dict)
    default_sigma: int = DEFAULT_SIGMA

    def __post_init__(self):
        object.__setattr__(self, "sigma", dict(self.sigma))
        object.__setattr__(self, "kappa", dict(self.kappa))
        both = sorted(set(self.sigma) & set(self.kappa))
        if both:
            raise ReformulationError(
                f"sigma and kappa both given for {', '.join(both)}; pick one"
            )
        for name, sigma in self.sigma.items():
            if not isinstance(sigma, int) or sigma < 0:
                raise ReformulationError(
                    f"sigma for {name} must be a non-negative integer, got {sigma}"
                )
        for name, kappa in self.kappa.items():
            if not kappa > 0:
                raise ReformulationError(f"kappa for {name} must be positive, got {kappa}")
        if self.default_sigma < 0:
            raise ReformulationError("default sigma must be non-negative")

    @classmethod
    def uniform(cls, names: Iterable[str], sigma: int) -> "ReformParams":
        return cls(sigma={name: sigma for name in names})

    @classmethod
    def from_sequence(cls, names: Sequence[str], sigmas: Sequence[int]) -> "ReformParams":
        if len(names) != len(sigmas):
            raise ReformulationError("one sigma per variable expected")
        return cls(sigma=dict(zip(names, sigmas)))


def sigma_from_kappa(alpha: float, beta: float, kappa: float, discrete: bool) -> int:
    """
    Number of unit variables needed to reach error limit ``kappa``.

    Returns ceil(log2((beta - alpha) / kappa + delta)) with delta = 1 for
    discrete variables, clamped at 0.
    """
    if alpha == beta:
        return 0
    if not kappa > 0:
        raise ReformulationError(
            f"kappa must be positive for a variable with range [{alpha}, {beta}]"
        )
    ratio = (beta - alpha) / kappa + (1.0 if discrete else 0.0)
    # absorb rounding when the ratio is an exact power of two
    return max(0, math.ceil(math.log2(ratio) - 1e-9))


def kappa_from_sigma(alpha: float, beta: float, sigma: int, discrete: bool) -> float:
    """Smallest error limit reachable with ``sigma`` unit variables."""
    if sigma < 0:
        raise ReformulationError(f"sigma must be non-negative, got {sigma}")
    if alpha == beta:
        return 0.0
    if discrete and sigma == 0:
        raise ReformulationError(
            "a discrete variable with sigma = 0 must have lower == upper"
        )
    return (beta - alpha) / (2 ** sigma - (1 if discrete else 0))


# ----------------------------------------
# VARIABLE EXPANSION
# ----------------------------------------


def unit_id(name: str, bit: int) -> str:
    return f"u.{name}.{bit}"


def remainder_id(name: str) -> str:
    return f"r.{name}"


@dataclass(frozen=True)
class Factor:
    """One choice inside an expanded factor: alpha, a weighted unit, or kappa*r."""

    kind: str
    variable: str
    weight: float
    var_id: Optional[str] = None
    bit: int = 0


@dataclass(frozen=True)
class VariableExpansion:
    name: str
    index: int
    alpha: float
    beta: float
    kappa: float
    sigma: int
    discrete: bool
    unit_ids: Tuple[str, ...]
    remainder_id: Optional[str]
    needs_upper_bound_constraint: bool

    @property
    def delta(self) -> int:
        return 1 if self.discrete else 0

    def weights(self) -> Tuple[float, ...]:
        return tuple(self.kappa * 2 ** (j - 1) for j in range(1, self.sigma + 1))

    @property
    def max_value(self) -> float:
        top = self.alpha + self.kappa * (2 ** self.sigma - 1)
        return top + (self.kappa if self.remainder_id else 0.0)

    def options(self) -> List[Factor]:
        """Choices a single factor of this variable contributes to a product."""
        out = []
        if self.alpha != 0.0:
            out.append(Factor(ALPHA, self.name, self.alpha))
        for bit, (uid, weight) in enumerate(zip(self.unit_ids, self.weights()), 1):
            out.append(Factor(UNIT, self.name, weight, uid, bit))
        if self.remainder_id:
            out.append(Factor(REMAINDER, self.name, self.kappa, self.remainder_id))
        return out

    def value(self, assignment: Mapping[str, float]) -> float:
        """x(w) for this variable."""
        total = self.alpha
        try:
            for uid, weight in zip(self.unit_ids, self.weights()):
                total += weight * assignment[uid]
            if self.remainder_id:
                total += self.kappa * assignment[self.remainder_id]
        except KeyError as exc:
            raise UnassignedVariableError(exc.args[0]) from None
        return total

    def __str__(self):
        parts = [repr(self.alpha)]
        parts += [f"{w!r}*{uid}" for uid, w in zip(self.unit_ids, self.weights())]
        if self.remainder_id:
            parts.append(f"{self.kappa!r}*{self.remainder_id}")
        return f"{self.name} = " + " + ".join(parts)


def expand_variable(
    spec: VariableSpec,
    params: ReformParams,
    linear_only: bool = False,
    index: int = 0,
) -> VariableExpansion:
    """
    Build the unit/remainder expansion of one variable.

    Discrete variables always use their grid step as kappa; a sigma override
    may only add bits. Continuous variables take kappa or sigma from params,
    fall back to sigma = 0 when they only appear linearly, and otherwise use
    ``params.default_sigma``.
    """
    if spec.is_fixed:
        raise ReformulationError(
            f"variable {spec.name} is fixed; substitute it before expanding"
        )
    name = spec.name
    alpha, beta = spec.lower, spec.upper
    sigma_set = params.sigma.get(name)
    kappa_set = params.kappa.get(name)

    if spec.is_discrete:
        kappa = spec.step
        if kappa_set is not None and not math.isclose(kappa_set, kappa, rel_tol=1e-9):
            raise ReformulationError(
                f"discrete variable {name} has step {kappa}; kappa {kappa_set} "
                "would leave its grid"
            )
        needed = sigma_from_kappa(alpha, beta, kappa, True)
        if sigma_set is None:
            sigma = needed
        elif sigma_set < needed:
            raise ReformulationError(
                f"discrete variable {name} needs at least {needed} unit variables, "
                f"got sigma = {sigma_set}"
            )
        else:
            sigma = sigma_set
    elif kappa_set is not None:
        if kappa_set > (beta - alpha) * (1 + 1e-12):
            raise ReformulationError(
                f"kappa {kappa_set} for {name} exceeds its range {beta - alpha}"
            )
        kappa = kappa_set
        sigma = sigma_from_kappa(alpha, beta, kappa, False)
    else:
        if sigma_set is not None:
            sigma = sigma_set
        elif linear_only:
            sigma = 0
        else:
            sigma = params.default_sigma
        kappa = kappa_from_sigma(alpha, beta, sigma, False)

    expansion = VariableExpansion(
        name=name,
        index=index,
        alpha=alpha,
        beta=beta,
        kappa=kappa,
        sigma=sigma,
        discrete=spec.is_discrete,
        unit_ids=tuple(unit_id(name, j) for j in range(1, sigma + 1)),
        remainder_id=None if spec.is_discrete else remainder_id(name),
        needs_upper_bound_constraint=False,
    )
    slack = BOUND_SLACK * max(1.0, abs(beta))
    top = expansion.max_value
    if top < beta - slack:
        raise ReformulationError(f"expansion of {name} cannot reach its upper bound")
    if top > beta + slack:
        expansion = replace(expansion, needs_upper_bound_constraint=True)
    return expansion


# ----------------------------------------
# LINEAR EXPRESSIONS AND CONSTRAINTS
# ----------------------------------------


class LinearExpr:
    """constant + sum(coef * var) over lifted variable ids. Treat as immutable."""

    __slots__ = ("constant", "terms")

    def __init__(self, terms: Optional[Mapping[str, float]] = None, constant: float = 0.0):
        self.constant = float(constant)
        self.terms: Dict[str, float] = {
            var: float(coef) for var, coef in (terms or {}).items() if coef != 0.0
        }

    @classmethod
    def of_constant(cls, value: float) -> "LinearExpr":
        return cls(None, value)

    def coefficient(self, var: str) -> float:
        return self.terms.get(var, 0.0)

    def variables(self) -> List[str]:
        return list(self.terms)

    def shifted(self, delta: float) -> "LinearExpr":
        return LinearExpr(self.terms, self.constant + delta)

    def without_constant(self) -> "LinearExpr":
        return LinearExpr(self.terms)

    def scaled(self, factor: float) -> "LinearExpr":
        return LinearExpr(
            {v: c * factor for v, c in self.terms.items()}, self.constant * factor
        )

    def __add__(self, other: "LinearExpr") -> "LinearExpr":
        merged = dict(self.terms)
        for var, coef in other.terms.items():
            merged[var] = merged.get(var, 0.0) + coef
        return LinearExpr(merged, self.constant + other.constant)

    def __neg__(self):
        return self.scaled(-1.0)

    def __sub__(self, other: "LinearExpr") -> "LinearExpr":
        return self + (-other)

    def evaluate(self, assignment: Mapping[str, float]) -> float:
        total = [self.constant]
        try:
            total.extend(coef * assignment[var] for var, coef in self.terms.items())
        except KeyError as exc:
            raise UnassignedVariableError(exc.args[0]) from None
        return math.fsum(total)

    def __eq__(self, other):
        if not isinstance(other, LinearExpr):
            return NotImplemented
        return self.constant == other.constant and self.terms == other.terms

    def __repr__(self):
        return f"LinearExpr({self.terms!r}, {self.constant!r})"

    def __str__(self):
        parts = [f"{c!r}*{v}" for v, c in self.terms.items()]
        if self.constant or not parts:
            parts.append(repr(self.constant))
        return " + ".join(parts)


@dataclass(frozen=True)
class LinearConstraint:
    """expr <= rhs, with the right-hand side kept out of expr."""

    expr: LinearExpr
    rhs: float
    name: str = ""

    def violation(self, assignment: Mapping[str, float]) -> float:
        return max(0.0, self.expr.evaluate(assignment) - self.rhs)


# ----------------------------------------
# ELEMENTS
# ----------------------------------------


@dataclass(frozen=True)
class Element:
    """
    One term of a distributed monomial product.

    The exact value of the term is ``coefficient * n_kl * prod(u) * prod(r)``;
    dividing by the number of remainders makes the linearized form
    ``coefficient * sum_h y(units; r_h)``.
    """

    monomial_index: int
    index: int
    coefficient: float
    unit_vars: Tuple[str, ...]
    remainder_vars: Tuple[str, ...]
    factors: Tuple[Factor, ...] = ()

    @property
    def n_u(self) -> int:
        return len(self.unit_vars)

    @property
    def n_r(self) -> int:
        return len(self.remainder_vars)

    @property
    def n_kl(self) -> int:
        return max(self.n_r, 1)

    @property
    def is_constant(self) -> bool:
        return not self.unit_vars and not self.remainder_vars

    def value(self, assignment: Mapping[str, float]) -> float:
        """Exact (unlinearized) value of the term."""
        out = self.coefficient * self.n_kl
        for var in self.unit_vars + self.remainder_vars:
            out *= assignment[var]
        return out


def element_coefficient(elem: Element, expansions: Mapping[str, VariableExpansion]) -> float:
    """Recompute an element's coefficient from the expansions of its factors."""
    value = 1.0
    for factor in elem.factors:
        exp = expansions[factor.variable]
        if factor.kind == ALPHA:
            value *= exp.alpha
        elif factor.kind == UNIT:
            value *= exp.kappa * 2 ** (factor.bit - 1)
        else:
            value *= exp.kappa
    return value / elem.n_r if elem.n_r else value


def expand_monomial(
    monomial: Monomial,
    expansions: Mapping[str, VariableExpansion],
    monomial_index: int = 0,
) -> List[Element]:
    """
    Distribute a monomial over the expansions of its factors.

    Elements come out in factor-choice lexicographic order (alpha first, then
    units by bit, then the remainder). Constant-only choices merge into one
    leading constant element.

    Raises:
        ReformulationError: a factor has no expansion
    """
    choices = []
    for name in monomial.factors():
        if name not in expansions:
            raise ReformulationError(f"no expansion for variable {name}")
        choices.append(expansions[name].options())

    constant = None
    raw = []
    for combo in itertools.product(*choices):
        units = tuple(f.var_id for f in combo if f.kind == UNIT)
        rems = tuple(f.var_id for f in combo if f.kind == REMAINDER)
        weight = math.prod(f.weight for f in combo)
        if not units and not rems:
            if constant is None:
                constant = (weight, combo)
            else:
                constant = (constant[0] + weight, constant[1])
            continue
        coef = weight / len(rems) if rems else weight
        raw.append((coef, units, rems, combo))

    elements = []
    if constant is not None:
        elements.append(Element(monomial_index, 1, constant[0], (), (), constant[1]))
    for coef, units, rems, combo in raw:
        elements.append(
            Element(monomial_index, len(elements) + 1, coef, units, rems, combo)
        )
    return elements


# ----------------------------------------
# UNIT PRODUCTS
# ----------------------------------------


@dataclass(frozen=True)
class UnitProduct:
    """y = prod(unit_vars) * remainder (remainder optional)."""

    id: str
    unit_vars: Tuple[str, ...]
    remainder: Optional[str] = None

    @property
    def size(self) -> int:
        return len(self.unit_vars) + (1 if self.remainder else 0)

    @property
    def is_trivial(self) -> bool:
        return self.size < 2

    @property
    def signature(self):
        return (self.unit_vars, self.remainder)


def _product_constraint_count(n_units: int, has_remainder: bool) -> int:
    return n_units + (2 if has_remainder else 1)


class UnitProductRegistry:
    """
    Interns unit-product variables by signature.

    Trivial products resolve to the underlying variable (or None for the
    constant 1). Interning is guarded by a lock so several threads may
    linearize polynomials against one registry.
    """

    def __init__(self, prefix: str = "y"):
        self.prefix = prefix
        self._lock = threading.Lock()
        self._by_signature: Dict[tuple, UnitProduct] = {}
        self._order: List[UnitProduct] = []
        self.requested = 0
        self.requested_constraints = 0

    def resolve(self, unit_vars: Iterable[str], remainder: Optional[str] = None) -> Optional[str]:
        """Return the lifted variable id standing for prod(unit_vars) * remainder."""
        units = tuple(sorted(set(unit_vars)))
        size = len(units) + (1 if remainder else 0)
        if size == 0:
            return None
        if size == 1:
            return units[0] if units else remainder
        signature = (units, remainder)
        with self._lock:
            self.requested += 1
            self.requested_constraints += _product_constraint_count(
                len(units), remainder is not None
            )
            product = self._by_signature.get(signature)
            if product is None:
                product = UnitProduct(
                    f"{self.prefix}.{len(self._order) + 1}", units, remainder
                )
                self._by_signature[signature] = product
                self._order.append(product)
        return product.id

    def products(self) -> List[UnitProduct]:
        with self._lock:
            return list(self._order)

    def __len__(self):
        return len(self._order)


def linearize_element(elem: Element, registry: UnitProductRegistry) -> LinearExpr:
    """
    Linear surrogate of an element.

    Products of several remainders are replaced by their mean, so the result
    is ``a * sum_h y(units; r_h)``, or ``a * y(units)`` without remainders.
    """
    a = elem.coefficient
    if not elem.remainder_vars:
        var = registry.resolve(elem.unit_vars, None)
        return LinearExpr.of_constant(a) if var is None else LinearExpr({var: a})
    terms: Dict[str, float] = {}
    for rem in elem.remainder_vars:
        var = registry.resolve(elem.unit_vars, rem)
        terms[var] = terms.get(var, 0.0) + a
    return LinearExpr(terms)


def product_constraints(up: UnitProduct) -> List[LinearConstraint]:
    """
    Constraints forcing y = prod(u) * r once the units are integral.

    y <= u_j for every unit, y >= r + sum(u) - n_u and y <= r. Without a
    remainder r is the constant 1 and ``y <= 1`` is left to the variable
    bound.
    """
    if up.is_trivial:
        return []
    y = up.id
    out = [
        LinearConstraint(LinearExpr({y: 1.0, u: -1.0}), 0.0, f"{y}:{u}")
        for u in up.unit_vars
    ]
    lower = {u: 1.0 for u in up.unit_vars}
    lower[y] = -1.0
    n_u = len(up.unit_vars)
    if up.remainder:
        lower[up.remainder] = 1.0
        out.append(LinearConstraint(LinearExpr(lower), float(n_u), f"{y}:lo"))
        out.append(
            LinearConstraint(LinearExpr({y: 1.0, up.remainder: -1.0}), 0.0, f"{y}:{up.remainder}")
        )
    else:
        out.append(LinearConstraint(LinearExpr(lower), float(n_u - 1), f"{y}:lo"))
    return out


def upper_bound_constraint(exp: VariableExpansion) -> LinearConstraint:
    """Keep the expansion of an overshooting variable below beta."""
    terms = dict(zip(exp.unit_ids, exp.weights()))
    if exp.remainder_id:
        terms[exp.remainder_id] = exp.kappa
    return LinearConstraint(LinearExpr(terms), exp.beta - exp.alpha, f"ub:{exp.name}")


# ----------------------------------------
# POLYNOMIAL LINEARIZATION AND ERROR BOUNDS
# ----------------------------------------


@dataclass(frozen=True)
class ErrorBounds:
    """[g] - g lies in [errlb, errub] over the lifted feasible set."""

    errlb: float = 0.0
    errub: float = 0.0

    def __add__(self, other: "ErrorBounds") -> "ErrorBounds":
        return ErrorBounds(self.errlb + other.errlb, self.errub + other.errub)


class MonomialCache:
    """Expanded and linearized monomials, shared by every polynomial of a program."""

    def __init__(self):
        self._entries: Dict[Monomial, Tuple[List[Element], List[LinearExpr]]] = {}

    def get(self, mono, expansions, registry):
        entry = self._entries.get(mono)
        if entry is None:
            elements = expand_monomial(mono, expansions, len(self._entries) + 1)
            entry = (elements, [linearize_element(e, registry) for e in elements])
            self._entries[mono] = entry
        return entry

    def __len__(self):
        return len(self._entries)


def linearize_polynomial(
    poly: Polynomial,
    expansions: Mapping[str, VariableExpansion],
    registry: UnitProductRegistry,
    cache: Optional[MonomialCache] = None,
) -> Tuple[LinearExpr, ErrorBounds]:
    """
    Linearize a polynomial and bound the linearization error.

    Returns:
        ([g], ErrorBounds) where errlb sums c*a*(n_kl - 1) over elements with
        c*a < 0 and errub over elements with c*a > 0.
    """
    cache = cache if cache is not None else MonomialCache()
    acc: Dict[str, float] = {}
    constant = 0.0
    errlb = 0.0
    errub = 0.0
    for coef, mono in poly.terms:
        elements, linear = cache.get(mono, expansions, registry)
        for elem, lin in zip(elements, linear):
            for var, value in lin.terms.items():
                acc[var] = acc.get(var, 0.0) + coef * value
            constant += coef * lin.constant
            if elem.n_r > 1:
                err = coef * elem.coefficient * (elem.n_kl - 1)
                if err < 0:
                    errlb += err
                else:
                    errub += err
    return LinearExpr(acc, constant), ErrorBounds(errlb, errub)


def linear_bounds(lin: LinearExpr, eb: ErrorBounds) -> Tuple[LinearExpr, LinearExpr]:
    """(llb, lub) = ([g] - errub, [g] - errlb)."""
    return lin.shifted(-eb.errub), lin.shifted(-eb.errlb)


# ----------------------------------------
# WHOLE-PROGRAM REFORMULATION
# ----------------------------------------


@dataclass(frozen=True)
class LinearizedPolynomial:
    name: str
    linear: LinearExpr
    errors: ErrorBounds

    @property
    def llb(self) -> LinearExpr:
        return linear_bounds(self.linear, self.errors)[0]

    @property
    def lub(self) -> LinearExpr:
        return linear_bounds(self.linear, self.errors)[1]


@dataclass(frozen=True)
class ModelStatistics:
    """Problem-size counts of a reformulation."""

    n: int
    phi: int
    psi: int
    rho: int
    t: int
    d: int
    sigma_max: int
    psi_requested: int
    rho_requested: int

    def size_bounds(self) -> Tuple[int, int]:
        return size_bounds(self.t, self.d, self.sigma_max)

    def as_dict(self) -> Dict[str, int]:
        return asdict(self)


def size_bounds(t: int, d: int, sigma_max: int) -> Tuple[int, int]:
    """Upper limits on (psi, rho) for t monomials of degree <= d."""
    per_monomial = (sigma_max + 2) ** d
    return t * d * per_monomial, t * d * d * (d + 1) * per_monomial


class Reformulation:
    """Expansions, linearized polynomials and lifted constraints of one program."""

    def __init__(self, program, params, expansions, registry, objective, constraints, cache):
        self.program = program
        self.params = params
        self.expansions: Dict[str, VariableExpansion] = expansions
        self.registry = registry
        self.objective: LinearizedPolynomial = objective
        self.constraints: List[LinearizedPolynomial] = constraints
        self.cache = cache
        self.bound_constraints = [
            upper_bound_constraint(e) for e in expansions.values()
            if e.needs_upper_bound_constraint
        ]
        self.product_constraints = [
            c for up in registry.products() for c in product_constraints(up)
        ]

    @property
    def unit_ids(self) -> List[str]:
        return [u for e in self.expansions.values() for u in e.unit_ids]

    @property
    def remainder_ids(self) -> List[str]:
        return [e.remainder_id for e in self.expansions.values() if e.remainder_id]

    def lifted_constraints(self) -> List[LinearConstraint]:
        """Constraints describing the lifted box (products, then bounds)."""
        return self.product_constraints + self.bound_constraints

    def statistics(self) -> ModelStatistics:
        sigmas = [e.sigma for e in self.expansions.values()]
        return ModelStatistics(
            n=len(self.expansions),
            phi=sum(sigmas),
            psi=len(self.registry),
            rho=len(self.product_constraints) + len(self.bound_constraints),
            t=len(self.program.monomial_basis()),
            d=self.program.degree,
            sigma_max=max(sigmas, default=0),
            psi_requested=self.registry.requested,
            rho_requested=self.registry.requested_constraints + len(self.bound_constraints),
        )


def linear_only_variables(pp: PolynomialProgram) -> set:
    """Variables that never occur in a monomial of degree two or more."""
    nonlinear = set()
    for poly in pp.polynomials():
        for mono in poly.monomials():
            if mono.degree > 1:
                nonlinear.update(mono.variables)
    return {v.name for v in pp.variables} - nonlinear


class Reformulator:
    """
    Turns a polynomial program into its linearized, lifted form.

    The same reformulation feeds the optimistic, pessimistic and linearized
    programs; only the treatment of the error bounds differs.
    """

    def __init__(self, params: Optional[ReformParams] = None, verbose=False):
        self.params = params or ReformParams()
        self.verbose = verbose

    def log(self, *args):
        """Print log message if verbose mode is enabled."""
        if self.verbose:
            print("[REFORM]", *args, file=sys.stderr)

    def expand_variables(self, pp: PolynomialProgram) -> Dict[str, VariableExpansion]:
        unknown = sorted(
            (set(self.params.sigma) | set(self.params.kappa)) - set(pp.variable_names)
        )
        if unknown:
            raise ReformulationError(f"settings given for unknown variables: {unknown}")
        linear = linear_only_variables(pp)
        expansions = {}
        for i, spec in enumerate(pp.variables):
            expansions[spec.name] = expand_variable(
                spec, self.params, spec.name in linear and not spec.is_discrete, i
            )
            exp = expansions[spec.name]
            self.log(f"{spec.name}: sigma={exp.sigma} kappa={exp.kappa:.6g}")
        return expansions

    def reformulate(self, pp: PolynomialProgram) -> Reformulation:
        pp = normalize_program(pp)
        expansions = self.expand_variables(pp)
        registry = UnitProductRegistry()
        cache = MonomialCache()

        # expand the basis up front so monomial indices follow basis order
        for mono in pp.monomial_basis():
            cache.get(mono, expansions, registry)

        objective = LinearizedPolynomial(
            "objective", *linearize_polynomial(pp.objective, expansions, registry, cache)
        )
        constraints = [
            LinearizedPolynomial(
                con.name or f"c{j + 1}",
                *linearize_polynomial(con.body, expansions, registry, cache),
            )
            for j, con in enumerate(pp.constraints)
        ]
        reform = Reformulation(
            pp, self.params, expansions, registry, objective, constraints, cache
        )
        stats = reform.statistics()
        self.log(
            f"phi={stats.phi} psi={stats.psi} rho={stats.rho} "
            f"(t={stats.t}, d={stats.d})"
        )
        return reform


def reformulate(pp: PolynomialProgram, params: Optional[ReformParams] = None, verbose=False) -> Reformulation:
    return Reformulator(params, verbose=verbose).reformulate(pp)
