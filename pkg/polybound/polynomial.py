"""
Polynomials and polynomial programs over box-bounded variables.

Everything in this module is immutable once constructed. Operations return
new objects, so values can be shared freely between threads.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

CONTINUOUS = "continuous"
DISCRETE = "discrete"
FIXED = "fixed"
VARIABLE_KINDS = (CONTINUOUS, DISCRETE, FIXED)

RELATIONS = ("<=", ">=", "=")

# Tolerance for "is this point feasible" checks on polynomial constraints.
DEFAULT_FEASIBILITY_TOL = 1e-6

# (upper - lower) must be a multiple of a discrete step within this tolerance.
GRID_TOL = 1e-9


class UnassignedVariableError(KeyError):
    """Raised when a point does not assign a value to a needed variable."""

    def __init__(self, name):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"no value assigned to variable '{self.name}'"


# ----------------------------------------
# VARIABLES
# ----------------------------------------


@dataclass(frozen=True)
class VariableSpec:
    """A box-bounded decision variable (continuous, discrete grid, or fixed)."""

    name: str
    lower: float
    upper: float
    kind: str = CONTINUOUS
    step: Optional[float] = None

    def __post_init__(self):
        if self.kind not in VARIABLE_KINDS:
            raise ValueError(f"unknown variable kind '{self.kind}' for {self.name}")
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValueError(f"variable {self.name} needs finite bounds")
        if self.lower > self.upper:
            raise ValueError(
                f"variable {self.name}: lower bound {self.lower} exceeds "
                f"upper bound {self.upper}"
            )
        if self.kind == FIXED and self.lower != self.upper:
            raise ValueError(f"fixed variable {self.name} must have lower == upper")
        if self.kind == DISCRETE:
            if self.step is None or not self.step > 0:
                raise ValueError(f"discrete variable {self.name} needs a positive step")
            count = (self.upper - self.lower) / self.step
            if abs(count - round(count)) > GRID_TOL * max(1.0, count):
                raise ValueError(
                    f"discrete variable {self.name}: range {self.lower}..{self.upper} "
                    f"is not a multiple of step {self.step}"
                )
        elif self.step is not None:
            raise ValueError(f"only discrete variables carry a step ({self.name})")

    @classmethod
    def continuous(cls, name, lower, upper):
        return cls(name, float(lower), float(upper))

    @classmethod
    def discrete(cls, name, lower, upper, step):
        return cls(name, float(lower), float(upper), DISCRETE, float(step))

    @classmethod
    def fixed(cls, name, value):
        return cls(name, float(value), float(value), FIXED)

    @property
    def is_fixed(self) -> bool:
        # a degenerate box pins the variable whatever its declared kind
        return self.kind == FIXED or self.lower == self.upper

    @property
    def is_discrete(self) -> bool:
        return self.kind == DISCRETE

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def values(self) -> List[float]:
        """All admissible values of a discrete (or fixed) variable."""
        if self.kind == FIXED:
            return [self.lower]
        if self.kind != DISCRETE:
            raise ValueError(f"variable {self.name} is continuous")
        count = int(round(self.width / self.step))
        return [self.lower + k * self.step for k in range(count + 1)]

    def grid_distance(self, value: float) -> float:
        """Distance from value to the nearest grid point (0 for continuous)."""
        if self.kind != DISCRETE:
            return 0.0
        k = round((value - self.lower) / self.step)
        return abs(value - (self.lower + k * self.step))


# ----------------------------------------
# MONOMIALS AND POLYNOMIALS
# ----------------------------------------


@dataclass(frozen=True)
class Monomial:
    """
    Product of variables raised to positive integer powers.

    Stored as a sorted tuple of (name, power) pairs. The empty tuple is the
    constant monomial 1.
    """

    powers: Tuple[Tuple[str, int], ...] = ()

    def __post_init__(self):
        names = [name for name, _ in self.powers]
        if names != sorted(set(names)):
            raise ValueError(f"monomial powers must be sorted and unique: {self.powers}")
        for name, power in self.powers:
            if not isinstance(power, int) or power < 1:
                raise ValueError(f"power of {name} must be a positive integer")

    @classmethod
    def from_map(cls, exponents: Mapping[str, int]) -> "Monomial":
        return cls(tuple(sorted((n, int(p)) for n, p in exponents.items() if p)))

    @classmethod
    def variable(cls, name: str, power: int = 1) -> "Monomial":
        return cls(((name, power),)) if power else cls()

    @property
    def degree(self) -> int:
        return sum(power for _, power in self.powers)

    @property
    def variables(self) -> Tuple[str, ...]:
        return tuple(name for name, _ in self.powers)

    def factors(self) -> Tuple[str, ...]:
        """Variable names with repetition, one entry per factor."""
        out = []
        for name, power in self.powers:
            out.extend([name] * power)
        return tuple(out)

    def exponent(self, name: str) -> int:
        for n, p in self.powers:
            if n == name:
                return p
        return 0

    def sort_key(self):
        return (self.degree, self.powers)

    def __mul__(self, other: "Monomial") -> "Monomial":
        merged = dict(self.powers)
        for name, power in other.powers:
            merged[name] = merged.get(name, 0) + power
        return Monomial.from_map(merged)

    def evaluate(self, point: Mapping[str, float]) -> float:
        value = 1.0
        for name, power in self.powers:
            try:
                value *= float(point[name]) ** power
            except KeyError:
                raise UnassignedVariableError(name) from None
        return value

    def __str__(self):
        if not self.powers:
            return "1"
        return "*".join(n if p == 1 else f"{n}^{p}" for n, p in self.powers)


ONE = Monomial()


def format_coefficient(value: float) -> str:
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


class Polynomial:
    """
    Sparse multivariate polynomial in canonical form.

    ``terms`` is a tuple of (coefficient, monomial) pairs with distinct
    monomials, no zero coefficients, ordered by (degree, powers).
    """

    __slots__ = ("terms",)

    def __init__(
        self,
        terms: Union[Mapping[Monomial, float], Iterable[Tuple[float, Monomial]]] = (),
    ):
        merged: Dict[Monomial, float] = {}
        pairs = (
            ((c, m) for m, c in terms.items()) if isinstance(terms, Mapping) else terms
        )
        for coef, mono in pairs:
            merged[mono] = merged.get(mono, 0.0) + float(coef)
        ordered = sorted(merged.items(), key=lambda item: item[0].sort_key())
        self.terms = tuple((c, m) for m, c in ordered if c != 0.0)

    @classmethod
    def constant(cls, value: float) -> "Polynomial":
        return cls([(value, ONE)])

    @classmethod
    def variable(cls, name: str) -> "Polynomial":
        return cls([(1.0, Monomial.variable(name))])

    # -- inspection --------------------------------------------------------

    @property
    def degree(self) -> int:
        return max((m.degree for _, m in self.terms), default=0)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_constant(self) -> bool:
        return all(m == ONE for _, m in self.terms)

    @property
    def constant_term(self) -> float:
        return self.coefficient(ONE)

    def monomials(self) -> Tuple[Monomial, ...]:
        return tuple(m for _, m in self.terms)

    def variables(self) -> Tuple[str, ...]:
        names = set()
        for _, mono in self.terms:
            names.update(mono.variables)
        return tuple(sorted(names))

    def coefficient(self, mono: Monomial) -> float:
        for c, m in self.terms:
            if m == mono:
                return c
        return 0.0

    # -- arithmetic --------------------------------------------------------

    @staticmethod
    def _coerce(other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return other
        if isinstance(other, (int, float)):
            return Polynomial.constant(float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Polynomial(list(self.terms) + list(other.terms))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial([(-c, m) for c, m in self.terms])

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Polynomial([(c * other, m) for c, m in self.terms])
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Polynomial(
            [(c1 * c2, m1 * m2) for c1, m1 in self.terms for c2, m2 in other.terms]
        )

    __rmul__ = __mul__

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError(f"exponent must be a non-negative integer, got {exponent}")
        result = Polynomial.constant(1.0)
        for _ in range(exponent):
            result = result * self
        return result

    def substitute(self, values: Mapping[str, float]) -> "Polynomial":
        """Replace the named variables by constants."""
        out = []
        for coef, mono in self.terms:
            keep = {}
            for name, power in mono.powers:
                if name in values:
                    coef *= float(values[name]) ** power
                else:
                    keep[name] = power
            out.append((coef, Monomial.from_map(keep)))
        return Polynomial(out)

    def evaluate(self, point: Mapping[str, float]) -> float:
        return math.fsum(c * m.evaluate(point) for c, m in self.terms)

    # -- identity ----------------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(self.terms)

    def __repr__(self):
        return f"Polynomial({str(self)!r})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for i, (coef, mono) in enumerate(self.terms):
            sign = "-" if coef < 0 else "+"
            mag = abs(coef)
            if mono == ONE:
                body = format_coefficient(mag)
            elif mag == 1.0:
                body = str(mono)
            else:
                body = f"{format_coefficient(mag)}*{mono}"
            if i == 0:
                parts.append(body if sign == "+" else f"-{body}")
            else:
                parts.append(f" {sign} {body}")
        return "".join(parts)


def evaluate(poly: Polynomial, point: Mapping[str, float]) -> float:
    """
    Evaluate a polynomial at a point.

    Args:
        poly: Polynomial to evaluate
        point: Mapping from variable name to value

    Returns:
        Value of the polynomial in double precision

    Raises:
        UnassignedVariableError: point lacks a variable used by poly
    """
    return poly.evaluate(point)


# ----------------------------------------
# PROGRAMS
# ----------------------------------------


@dataclass(frozen=True)
class Constraint:
    """``body relation rhs`` where relation is one of <=, >=, =."""

    body: Polynomial
    relation: str = "<="
    rhs: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation '{self.relation}'")

    @property
    def is_normalized(self) -> bool:
        return self.relation == "<=" and self.rhs == 0.0


@dataclass(frozen=True)
class PolynomialProgram:
    """
    minimize objective(x) subject to constraints, with x in a box.

    When parsed from ``maximize``, ``objective`` holds the negated function and
    ``maximize`` is set so reports can flip the sign back. ``constants`` holds
    fixed variables that normalization substituted away.
    """

    variables: Tuple[VariableSpec, ...]
    objective: Polynomial
    constraints: Tuple[Constraint, ...] = ()
    name: str = ""
    maximize: bool = False
    constants: Tuple[Tuple[str, float], ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "constants", tuple(self.constants))

        names = [v.name for v in self.variables] + [n for n, _ in self.constants]
        if len(names) != len(set(names)):
            raise ValueError("variable names must be unique")
        declared = set(names)
        for poly in self.polynomials():
            for name in poly.variables():
                if name not in declared:
                    raise ValueError(f"polynomial uses undeclared variable '{name}'")

    @property
    def sense(self) -> str:
        return "minimize"

    @property
    def variable_names(self) -> Tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def variable(self, name: str) -> VariableSpec:
        for spec in self.variables:
            if spec.name == name:
                return spec
        raise KeyError(name)

    def constant_map(self) -> Dict[str, float]:
        return dict(self.constants)

    def polynomials(self) -> List[Polynomial]:
        return [self.objective] + [c.body for c in self.constraints]

    @property
    def is_normalized(self) -> bool:
        return all(c.is_normalized for c in self.constraints) and not any(
            v.is_fixed for v in self.variables
        )

    @property
    def degree(self) -> int:
        return max((p.degree for p in self.polynomials()), default=0)

    def monomial_basis(self) -> List[Monomial]:
        """Distinct monomials over objective and constraints, constant first."""
        found = {ONE}
        for poly in self.polynomials():
            found.update(poly.monomials())
        return sorted(found, key=Monomial.sort_key)

    def with_bounds(self, bounds: Mapping[str, Tuple[float, float]]) -> "PolynomialProgram":
        """Copy of the program with some variable boxes replaced."""
        specs = []
        for spec in self.variables:
            if spec.name not in bounds:
                specs.append(spec)
                continue
            lo, hi = bounds[spec.name]
            if lo == hi:
                specs.append(VariableSpec.fixed(spec.name, lo))
            else:
                specs.append(VariableSpec(spec.name, lo, hi, spec.kind, spec.step))
        return PolynomialProgram(
            variables=specs,
            objective=self.objective,
            constraints=self.constraints,
            name=self.name,
            maximize=self.maximize,
            constants=self.constants,
        )


def normalize_program(pp: PolynomialProgram) -> PolynomialProgram:
    """
    Rewrite every constraint as g(x) <= 0 and substitute fixed variables.

    ``>=`` constraints are negated and each equality becomes the pair
    ``g <= 0`` (named ``<name>_le``) and ``-g <= 0`` (``<name>_ge``).
    Normalizing a normalized program returns it unchanged.
    """
    if pp.is_normalized:
        return pp

    fixed = {v.name: v.lower for v in pp.variables if v.is_fixed}

    def fold(poly):
        return poly.substitute(fixed) if fixed else poly

    constraints = []
    for j, con in enumerate(pp.constraints):
        name = con.name or f"c{j + 1}"
        g = fold(con.body) - con.rhs
        if con.relation == "<=":
            constraints.append(Constraint(g, "<=", 0.0, name))
        elif con.relation == ">=":
            constraints.append(Constraint(-g, "<=", 0.0, name))
        else:
            constraints.append(Constraint(g, "<=", 0.0, f"{name}_le"))
            constraints.append(Constraint(-g, "<=", 0.0, f"{name}_ge"))

    return PolynomialProgram(
        variables=[v for v in pp.variables if not v.is_fixed],
        objective=fold(pp.objective),
        constraints=constraints,
        name=pp.name,
        maximize=pp.maximize,
        constants=tuple(pp.constants) + tuple(sorted(fixed.items())),
    )


@dataclass(frozen=True)
class Violation:
    name: str
    amount: float


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    violations: Tuple[Violation, ...] = ()

    def __bool__(self):
        return self.feasible

    @property
    def violated_names(self) -> List[str]:
        return [v.name for v in self.violations]


def check_feasibility(
    pp: PolynomialProgram,
    point: Mapping[str, float],
    tol: float = DEFAULT_FEASIBILITY_TOL,
) -> FeasibilityReport:
    """
    Check a point against the variable boxes and every constraint.

    Bound violations are named ``bound:<var>``, off-grid discrete values
    ``grid:<var>``, constraint violations by constraint name.

    Args:
        pp: Program (normalized on the fly when needed)
        point: Value for every non-fixed variable
        tol: Allowed violation

    Returns:
        FeasibilityReport listing every violation with its magnitude
    """
    pp = normalize_program(pp)
    full = pp.constant_map()
    violations = []

    for spec in pp.variables:
        if spec.name not in point:
            raise UnassignedVariableError(spec.name)
        value = float(point[spec.name])
        full[spec.name] = value
        if value < spec.lower - tol:
            violations.append(Violation(f"bound:{spec.name}", spec.lower - value))
        elif value > spec.upper + tol:
            violations.append(Violation(f"bound:{spec.name}", value - spec.upper))
        elif spec.grid_distance(value) > tol:
            violations.append(Violation(f"grid:{spec.name}", spec.grid_distance(value)))

    for con in pp.constraints:
        value = con.body.evaluate(full)
        if value > tol:
            violations.append(Violation(con.name, value))

    return FeasibilityReport(not violations, tuple(violations))
