"""
Assembly of the mixed binary linear programs over the lifted variables.

Three programs share one reformulation:

- lower (optimistic): minimize llb[f] s.t. llb[g] <= 0
- upper (pessimistic): minimize lub[f] s.t. lub[g] <= tol
- linearized: minimize [f] s.t. [g] <= 0 (tolerance variant)

All of them carry the lifted-box constraints (unit products and overshoot
bounds). Columns are ordered units, then remainders, then products.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .polynomial import (
    DEFAULT_FEASIBILITY_TOL,
    PolynomialProgram,
    UnassignedVariableError,
)
from .reformulator import (
    LinearConstraint,
    LinearExpr,
    ReformParams,
    Reformulation,
    UnitProduct,
    VariableExpansion,
    reformulate,
)

LOWER = "lower"
UPPER = "upper"
LINEARIZED = "linearized"

INTEGRALITY_TOL = 1e-6


@dataclass
class ModelArrays:
    """Dense numeric view of a model: minimize c @ x + c0, A @ x <= b, lb <= x <= ub."""

    c: np.ndarray
    c0: float
    A: np.ndarray
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binary_columns: np.ndarray
    columns: List[str]


@dataclass(frozen=True)
class MilpModel:
    """
    A mixed binary linear program.

    ``continuous`` holds (id, lower, upper) triples; binaries are implicitly
    bounded by [0, 1]. Constraints are ``expr <= rhs``.
    """

    name: str
    binaries: Tuple[str, ...]
    continuous: Tuple[Tuple[str, float, float], ...]
    constraints: Tuple[LinearConstraint, ...]
    objective: LinearExpr
    metadata: Dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "binaries", tuple(self.binaries))
        object.__setattr__(
            self,
            "continuous",
            tuple((str(v), float(lo), float(hi)) for v, lo, hi in self.continuous),
        )
        object.__setattr__(self, "constraints", tuple(self.constraints))

        ids = self.variable_ids
        if len(ids) != len(set(ids)):
            raise ValueError(f"model {self.name} declares a variable twice")
        known = set(ids)
        for con in self.constraints:
            missing = set(con.expr.terms) - known
            if missing:
                raise ValueError(
                    f"constraint {con.name} uses undeclared variables {sorted(missing)}"
                )
        missing = set(self.objective.terms) - known
        if missing:
            raise ValueError(f"objective uses undeclared variables {sorted(missing)}")

    @property
    def variable_ids(self) -> List[str]:
        return list(self.binaries) + [v for v, _, _ in self.continuous]

    @property
    def phi(self) -> int:
        return len(self.binaries)

    def bounds(self, var: str) -> Tuple[float, float]:
        if var in self.binaries:
            return 0.0, 1.0
        for v, lo, hi in self.continuous:
            if v == var:
                return lo, hi
        raise KeyError(var)

    def arrays(self) -> ModelArrays:
        """Dense arrays for the solvers (built once per model)."""
        cached = self.__dict__.get("_arrays")
        if cached is not None:
            return cached
        columns = self.variable_ids
        index = {v: j for j, v in enumerate(columns)}
        n = len(columns)
        A = np.zeros((len(self.constraints), n))
        b = np.zeros(len(self.constraints))
        for i, con in enumerate(self.constraints):
            for var, coef in con.expr.terms.items():
                A[i, index[var]] += coef
            b[i] = con.rhs - con.expr.constant
        c = np.zeros(n)
        for var, coef in self.objective.terms.items():
            c[index[var]] = coef
        lb = np.zeros(n)
        ub = np.ones(n)
        for j, (_, lo, hi) in enumerate(self.continuous, len(self.binaries)):
            lb[j], ub[j] = lo, hi
        arrays = ModelArrays(
            c=c,
            c0=self.objective.constant,
            A=A,
            b=b,
            lb=lb,
            ub=ub,
            binary_columns=np.arange(len(self.binaries)),
            columns=columns,
        )
        object.__setattr__(self, "_arrays", arrays)
        return arrays

    def objective_value(self, assignment: Mapping[str, float]) -> float:
        return self.objective.evaluate(assignment)

    def violations(
        self, assignment: Mapping[str, float], tol: float = INTEGRALITY_TOL
    ) -> List[Tuple[str, float]]:
        """Every bound, integrality and constraint violation larger than tol."""
        out = []
        for var in self.binaries:
            value = assignment[var]
            if abs(value - round(value)) > tol or not -tol <= value <= 1 + tol:
                out.append((f"integrality:{var}", abs(value - round(value))))
        for var, lo, hi in self.continuous:
            value = assignment[var]
            if value < lo - tol or value > hi + tol:
                out.append((f"bound:{var}", max(lo - value, value - hi)))
        for con in self.constraints:
            amount = con.violation(assignment)
            if amount > tol:
                out.append((con.name, amount))
        return out


@dataclass(frozen=True)
class LiftedPoint:
    """An assignment of values to lifted variable ids."""

    assignment: Dict[str, float]

    def __getitem__(self, var: str) -> float:
        return self.assignment[var]

    def __contains__(self, var: str) -> bool:
        return var in self.assignment

    def get(self, var: str, default=None):
        return self.assignment.get(var, default)

    def rounded(self, binaries: Sequence[str]) -> "LiftedPoint":
        values = dict(self.assignment)
        for var in binaries:
            values[var] = float(round(values[var]))
        return LiftedPoint(values)


# ----------------------------------------
# BUILDING
# ----------------------------------------


def _variable_metadata(reform: Reformulation) -> Dict[str, Dict]:
    info = {}
    for exp in reform.expansions.values():
        for bit, uid in enumerate(exp.unit_ids, 1):
            info[uid] = {"type": "unit", "variable": exp.name, "bit": bit}
        if exp.remainder_id:
            info[exp.remainder_id] = {"type": "remainder", "variable": exp.name}
    for up in reform.registry.products():
        info[up.id] = {
            "type": "product",
            "units": list(up.unit_vars),
            "remainder": up.remainder,
        }
    return info


def _expansion_metadata(reform: Reformulation) -> Dict[str, Dict]:
    return {
        exp.name: {
            "alpha": exp.alpha,
            "beta": exp.beta,
            "kappa": exp.kappa,
            "sigma": exp.sigma,
            "discrete": exp.discrete,
        }
        for exp in reform.expansions.values()
    }


def _assemble(
    reform: Reformulation,
    kind: str,
    objective: LinearExpr,
    rows: List[Tuple[str, LinearExpr, float]],
) -> MilpModel:
    constraints = [
        LinearConstraint(expr.without_constant(), rhs - expr.constant, name)
        for name, expr, rhs in rows
    ]
    constraints.extend(reform.lifted_constraints())
    continuous = [(r, 0.0, 1.0) for r in reform.remainder_ids]
    continuous += [(up.id, 0.0, 1.0) for up in reform.registry.products()]
    program = reform.program
    return MilpModel(
        name=f"{program.name or 'pp'}_{kind}",
        binaries=reform.unit_ids,
        continuous=continuous,
        constraints=constraints,
        objective=objective,
        metadata={
            "kind": kind,
            "program": program.name,
            "expansions": _expansion_metadata(reform),
            "constants": dict(program.constants),
            "variables": _variable_metadata(reform),
        },
    )


def build_lower_program(
    pp: PolynomialProgram,
    params: Optional[ReformParams] = None,
    reformulation: Optional[Reformulation] = None,
) -> MilpModel:
    """
    Optimistic program: minimize llb[f] subject to llb[g_j] <= 0.

    Its optimum is a lower bound on the global minimum of pp, and it is
    infeasible only if pp is.
    """
    reform = reformulation or reformulate(pp, params)
    rows = [(c.name, c.llb, 0.0) for c in reform.constraints]
    return _assemble(reform, LOWER, reform.objective.llb, rows)


def build_upper_program(
    pp: PolynomialProgram,
    params: Optional[ReformParams] = None,
    reformulation: Optional[Reformulation] = None,
    constraint_tolerance: float = DEFAULT_FEASIBILITY_TOL,
) -> MilpModel:
    """
    Pessimistic program: minimize lub[f] subject to lub[g_j] <= tol.

    Because g <= lub[g], every feasible lifted point maps to an original
    point violating no constraint by more than ``constraint_tolerance``.
    """
    reform = reformulation or reformulate(pp, params)
    rows = [(c.name, c.lub, constraint_tolerance) for c in reform.constraints]
    return _assemble(reform, UPPER, reform.objective.lub, rows)


def build_linearized_program(
    pp: PolynomialProgram,
    params: Optional[ReformParams] = None,
    reformulation: Optional[Reformulation] = None,
) -> MilpModel:
    """Single program of the tolerance variant: minimize [f] s.t. [g_j] <= 0."""
    reform = reformulation or reformulate(pp, params)
    rows = [(c.name, c.linear, 0.0) for c in reform.constraints]
    return _assemble(reform, LINEARIZED, reform.objective.linear, rows)


# ----------------------------------------
# MOVING BETWEEN SPACES
# ----------------------------------------


def _expansion_map(expansions) -> Dict[str, VariableExpansion]:
    if isinstance(expansions, Mapping):
        return dict(expansions)
    return {exp.name: exp for exp in expansions}


def map_to_original(
    point,
    expansions,
    constants: Optional[Mapping[str, float]] = None,
) -> Dict[str, float]:
    """
    x(w): original variable values of a lifted point.

    Args:
        point: LiftedPoint or mapping covering every unit and remainder id
        expansions: VariableExpansion objects (mapping or sequence)
        constants: substituted fixed variables to reattach

    Raises:
        UnassignedVariableError: a unit or remainder id is missing
    """
    assignment = point.assignment if isinstance(point, LiftedPoint) else point
    out = {
        name: exp.value(assignment) for name, exp in _expansion_map(expansions).items()
    }
    out.update(constants or {})
    return out


def lift_point(
    x: Mapping[str, float],
    expansions,
    products: Sequence[UnitProduct] = (),
) -> LiftedPoint:
    """
    Greedy digit extraction: a lifted point whose image is x.

    Unit bits encode floor((x - alpha) / kappa), the remainder carries the
    fractional part, and every unit product gets its exact value.
    """
    assignment: Dict[str, float] = {}
    for name, exp in _expansion_map(expansions).items():
        if name not in x:
            raise UnassignedVariableError(name)
        t = (x[name] - exp.alpha) / exp.kappa if exp.kappa > 0 else 0.0
        top = 2 ** exp.sigma - 1
        if exp.discrete:
            k = min(max(int(round(t)), 0), top)
        else:
            k = min(max(int(math.floor(t + 1e-12)), 0), top)
            assignment[exp.remainder_id] = min(max(t - k, 0.0), 1.0)
        for bit, uid in enumerate(exp.unit_ids):
            assignment[uid] = float((k >> bit) & 1)
    for up in products:
        value = assignment[up.remainder] if up.remainder else 1.0
        for u in up.unit_vars:
            value *= assignment[u]
        assignment[up.id] = value
    return LiftedPoint(assignment)
