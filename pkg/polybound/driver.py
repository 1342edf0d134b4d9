"""
Interval bounding of the global minimum of a polynomial program.

The optimistic program gives a lower bound. An upper bound needs a point that
is feasible for the original program: either the optimistic solution itself,
the pessimistic program's solution, or a solution found on a box focused
around the optimistic solution.
"""

import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

from .branch_and_bound import (
    DEFAULT_ABS_GAP,
    LIMIT,
    UNDECIDED as MILP_UNDECIDED,
    MilpOutcome,
    OracleLimitError,
    enumerate_oracle,
    solve_milp,
)
from .milp_model import (
    LiftedPoint,
    MilpModel,
    build_linearized_program,
    build_lower_program,
    build_upper_program,
    map_to_original,
)
from .polynomial import (
    DEFAULT_FEASIBILITY_TOL,
    PolynomialProgram,
    check_feasibility,
    normalize_program,
)
from .reformulator import (
    ModelStatistics,
    ReformParams,
    Reformulation,
    Reformulator,
    VariableExpansion,
)
from .simplex import INFEASIBLE, OPTIMAL, SimplexError

BOUNDED = "bounded"
LOWER_ONLY = "lower-only"
UPPER_ONLY = "upper-only"
INFEASIBLE_PROVEN = "infeasible-proven"
UNDECIDED = "undecided"

# the oracle is only run when it stays affordable
ORACLE_MAX_BINARIES = 22

# witnesses passing at this tolerance rank ahead of ones only feasible
# within SolveOptions.feasibility_tol
STRICT_FEASIBILITY_TOL = 1e-9


@dataclass
class SolveOptions:
    """Solver limits and driver switches shared by every entry point."""

    abs_gap: float = DEFAULT_ABS_GAP
    node_limit: Optional[int] = None
    time_limit: Optional[float] = None
    feasibility_tol: float = DEFAULT_FEASIBILITY_TOL
    refine: bool = False
    refine_rounds: int = 1
    threads: int = 1
    concurrent: bool = False
    oracle: bool = False
    audit: bool = False
    verbose: bool = False


@dataclass
class Witness:
    """A lifted solution, its image in the original variables and f there."""

    lifted: LiftedPoint
    original: Dict[str, float]
    objective: float
    model_value: float
    feasible: bool
    violations: List[str] = field(default_factory=list)
    strict: bool = False

    def rank(self) -> Tuple[bool, float]:
        """Sort key for upper-bound candidates: strict points first, then f."""
        return (not self.strict, self.objective)


@dataclass
class IntervalResult:
    """
    Bracket [lower, upper] on the global minimum (of the minimized objective).

    ``upper_source`` tells where the upper bound came from: "lower-witness"
    (x(w-) was feasible), "upper-program" or "refinement".
    """

    lower: Optional[float]
    upper: Optional[float]
    verdict: str
    witness_lower: Optional[Witness] = None
    witness_upper: Optional[Witness] = None
    refinement_trace: List["RefinementStep"] = field(default_factory=list)
    statistics: Optional[ModelStatistics] = None
    upper_source: Optional[str] = None
    lower_outcome: Optional[MilpOutcome] = None
    upper_outcome: Optional[MilpOutcome] = None
    oracle: Optional[Dict] = None
    notes: List[str] = field(default_factory=list)
    reformulation: Optional[Reformulation] = None

    @property
    def width(self) -> Optional[float]:
        if self.lower is None or self.upper is None:
            return None
        return self.upper - self.lower


@dataclass
class RefinementStep:
    """One focused subproblem: its box, re-derived error limits and outcome."""

    bounds: Dict[str, Tuple[float, float]]
    kappa: Dict[str, float]
    program: PolynomialProgram
    result: IntervalResult

    def __iter__(self):
        # unpacks as (focused program, result)
        return iter((self.program, self.result))


@dataclass
class TauResult:
    """
    Outcome of the single linearized program.

    ``interval`` brackets the optimum of the tolerance-relaxed program where
    constraint i may be violated by up to ``tau_per_constraint[i]``.
    """

    status: str
    constraint_names: List[str]
    tau_per_constraint: List[float]
    value: Optional[float] = None
    interval: Optional[Tuple[float, float]] = None
    witness: Optional[Witness] = None
    statistics: Optional[ModelStatistics] = None
    outcome: Optional[MilpOutcome] = None
    reformulation: Optional[Reformulation] = None
    notes: List[str] = field(default_factory=list)

    @property
    def tau(self) -> float:
        return max(self.tau_per_constraint, default=0.0)


# ----------------------------------------
# FOCUSED BOXES
# ----------------------------------------


def focused_bounds(
    pp: PolynomialProgram,
    center: Mapping[str, float],
    kappas: Mapping[str, float],
) -> Dict[str, Tuple[float, float]]:
    """
    Box [center - kappa, center + kappa] intersected with the original box.

    Discrete variables snap inward to their grid.
    """
    bounds = {}
    for spec in normalize_program(pp).variables:
        c = center[spec.name]
        k = kappas[spec.name]
        lo = max(spec.lower, c - k)
        hi = min(spec.upper, c + k)
        if spec.is_discrete:
            steps_lo = -(-(lo - spec.lower - 1e-9) // spec.step)
            steps_hi = (hi - spec.lower + 1e-9) // spec.step
            lo = spec.lower + steps_lo * spec.step
            hi = spec.lower + steps_hi * spec.step
        bounds[spec.name] = (lo, max(lo, hi))
    return bounds


class IntervalBounder:
    """
    Runs the optimistic/pessimistic bounding procedure on a program.

    Args:
        params: Reformulation resolution settings
        options: Solver limits and switches
    """

    def __init__(self, params: Optional[ReformParams] = None, options: Optional[SolveOptions] = None):
        self.params = params or ReformParams()
        self.options = options or SolveOptions()
        self.verbose = self.options.verbose

    def log(self, *args):
        """Print log message if verbose mode is enabled."""
        if self.verbose:
            print("[DRIVER]", *args, file=sys.stderr)

    # ----------------------------------------
    # HELPERS
    # ----------------------------------------

    def _solve(self, model: MilpModel) -> MilpOutcome:
        opts = self.options
        return solve_milp(
            model,
            abs_gap=opts.abs_gap,
            node_limit=opts.node_limit,
            time_limit=opts.time_limit,
            threads=opts.threads,
            audit=opts.audit,
            verbose=opts.verbose,
        )

    def _witness(self, pp: PolynomialProgram, reform: Reformulation, outcome: MilpOutcome) -> Witness:
        x = map_to_original(outcome.point, reform.expansions)
        full = {**x, **pp.constant_map()}
        report = check_feasibility(pp, x, self.options.feasibility_tol)
        return Witness(
            lifted=outcome.point,
            original=full,
            objective=pp.objective.evaluate(full),
            model_value=outcome.value,
            feasible=report.feasible,
            violations=report.violated_names,
            strict=report.feasible and bool(check_feasibility(pp, x, STRICT_FEASIBILITY_TOL)),
        )

    def _oracle(self, model: MilpModel, outcome: MilpOutcome) -> Dict:
        if model.phi > ORACLE_MAX_BINARIES:
            return {"skipped": f"{model.phi} binaries exceed {ORACLE_MAX_BINARIES}"}
        try:
            reference = enumerate_oracle(model, verbose=self.verbose)
        except OracleLimitError as exc:
            return {"skipped": str(exc)}
        agrees = reference.status == outcome.status and (
            reference.value is None
            or abs(reference.value - outcome.value) <= max(self.options.abs_gap, 1e-6)
        )
        self.log(f"oracle {reference.status} {reference.value}, agrees={agrees}")
        return {"status": reference.status, "value": reference.value, "agrees": agrees}

    # ----------------------------------------
    # BOUNDING
    # ----------------------------------------

    def bound(self, pp: PolynomialProgram) -> IntervalResult:
        pp = normalize_program(pp)
        reform = Reformulator(self.params, verbose=self.verbose).reformulate(pp)
        lower_model = build_lower_program(pp, reformulation=reform)
        upper_model = build_upper_program(
            pp, reformulation=reform, constraint_tolerance=self.options.feasibility_tol
        )
        stats = reform.statistics()

        try:
            if self.options.concurrent:
                with ThreadPoolExecutor(max_workers=2) as pool:
                    lower_future = pool.submit(self._solve, lower_model)
                    upper_future = pool.submit(self._solve, upper_model)
                    lower_out = lower_future.result()
                    upper_out = upper_future.result()
            else:
                lower_out = self._solve(lower_model)
                upper_out = None
        except SimplexError as exc:
            self.log(f"solver failure: {exc}")
            return IntervalResult(
                None, None, UNDECIDED, statistics=stats, notes=[str(exc)], reformulation=reform
            )

        result = IntervalResult(
            None, None, UNDECIDED, statistics=stats, lower_outcome=lower_out, reformulation=reform
        )
        if self.options.oracle:
            result.oracle = self._oracle(lower_model, lower_out)

        if lower_out.status == INFEASIBLE:
            self.log("optimistic program infeasible: the program has no feasible point")
            result.verdict = INFEASIBLE_PROVEN
            return result
        result.lower = lower_out.bound
        if lower_out.status == MILP_UNDECIDED:
            result.notes.append("optimistic program stopped before finding a solution")
            return result
        if lower_out.status == LIMIT:
            result.notes.append(
                f"optimistic program stopped early, lower bound is the best node bound (gap {lower_out.gap:.3g})"
            )

        w_lower = self._witness(pp, reform, lower_out)
        result.witness_lower = w_lower
        self.log(f"lower {result.lower:.10g}, x(w-) feasible: {w_lower.feasible}")
        if w_lower.feasible:
            self._offer_upper(result, w_lower, "lower-witness")

        if not w_lower.feasible or upper_out is not None:
            try:
                if upper_out is None:
                    upper_out = self._solve(upper_model)
            except SimplexError as exc:
                result.notes.append(str(exc))
                upper_out = None
            result.upper_outcome = upper_out
            if upper_out is not None and upper_out.point is not None:
                w_upper = self._witness(pp, reform, upper_out)
                if w_upper.feasible:
                    self._offer_upper(result, w_upper, "upper-program")
                else:
                    result.notes.append(
                        f"pessimistic solution violates {w_upper.violations}"
                    )
            elif upper_out is not None:
                self.log(f"pessimistic program {upper_out.status}")

        if result.upper is None and self.options.refine:
            self._refine(pp, reform, result)

        if result.upper is None:
            result.verdict = LOWER_ONLY
            return result

        result.verdict = BOUNDED
        if not result.witness_upper.strict:
            result.notes.append(
                f"upper bound comes from a point feasible only within "
                f"{self.options.feasibility_tol:g}"
            )
        reconcile_bounds(result, self.options.abs_gap)
        return result

    def _offer_upper(self, result: IntervalResult, witness: Witness, source: str):
        if result.witness_upper is None or witness.rank() < result.witness_upper.rank():
            result.upper = witness.objective
            result.witness_upper = witness
            result.upper_source = source

    def _refine(self, pp: PolynomialProgram, reform: Reformulation, result: IntervalResult):
        center = {k: v for k, v in result.witness_lower.original.items() if k in reform.expansions}
        kappas = {name: e.kappa for name, e in reform.expansions.items()}
        sigma = pinned_sigma(pp, reform.expansions)
        for round_no in range(1, max(1, self.options.refine_rounds) + 1):
            self.log(f"refinement round {round_no} around {center}")
            step = refine_focused(pp, center, kappas, self.params, self.options, sigma=sigma)
            result.refinement_trace.append(step)
            focused = step.result
            if focused.witness_upper is not None:
                self._offer_upper(result, focused.witness_upper, "refinement")
                return
            if focused.witness_lower is None:
                return
            center = {
                k: v for k, v in focused.witness_lower.original.items() if k in kappas
            }
            kappas = dict(step.kappa)
            kappas.update({k: 0.0 for k in center if k not in kappas})


def reconcile_bounds(result: IntervalResult, tol: float) -> IntervalResult:
    """
    Settle a lower bound that ended up above the upper bound.

    An overshoot within tol (scaled by the magnitude of the bounds) is
    rounding noise and the lower bound is clamped. Anything larger means
    the two bounds disagree; both are kept and flagged in the notes.
    """
    if result.lower is None or result.upper is None or result.lower <= result.upper:
        return result
    excess = result.lower - result.upper
    if excess <= tol * max(1.0, abs(result.upper)):
        result.notes.append(
            f"lower {result.lower:.10g} clamped to upper {result.upper:.10g}"
        )
        result.lower = result.upper
    else:
        result.notes.append(
            f"inconsistent bounds: lower {result.lower:.10g} exceeds upper "
            f"{result.upper:.10g} by {excess:.3g}"
        )
    return result


def pinned_sigma(pp: PolynomialProgram, expansions: Mapping[str, VariableExpansion]) -> Dict[str, int]:
    """Unit counts of the continuous variables, to be reused on a narrowed box."""
    return {
        name: e.sigma
        for name, e in expansions.items()
        if not e.discrete and name in normalize_program(pp).variable_names
    }


def refine_focused(
    pp: PolynomialProgram,
    center: Mapping[str, float],
    kappas: Mapping[str, float],
    params: Optional[ReformParams] = None,
    options: Optional[SolveOptions] = None,
    sigma: Optional[Mapping[str, int]] = None,
) -> RefinementStep:
    """
    Search for a feasible point on the box center +- kappa.

    The same unit counts are kept, so every error limit shrinks with the box.
    The pessimistic program of the focused problem is solved first; if it is
    infeasible the optimistic one is solved and its image is tried directly.

    Returns:
        RefinementStep whose result has verdict upper-only (with a witness)
        or undecided. Its witness_lower is the focused optimistic solution,
        the next center for iterated refinement.
    """
    params = params or ReformParams()
    options = options or SolveOptions()
    pp = normalize_program(pp)
    bounder = IntervalBounder(params, options)
    if sigma is None:
        sigma = pinned_sigma(pp, Reformulator(params).expand_variables(pp))

    bounds = focused_bounds(pp, center, kappas)
    focused = normalize_program(pp.with_bounds(bounds))
    kept = set(focused.variable_names)
    focused_params = ReformParams(
        sigma={k: v for k, v in sigma.items() if k in kept},
        default_sigma=params.default_sigma,
    )
    reform = Reformulator(focused_params, verbose=options.verbose).reformulate(focused)
    new_kappa = {name: e.kappa for name, e in reform.expansions.items()}
    bounder.log(f"focused box {bounds}, kappa {new_kappa}")

    result = IntervalResult(
        None, None, UNDECIDED, statistics=reform.statistics(), reformulation=reform
    )
    step = RefinementStep(bounds, new_kappa, focused, result)
    try:
        upper_model = build_upper_program(
            focused, reformulation=reform, constraint_tolerance=options.feasibility_tol
        )
        upper_out = bounder._solve(upper_model)
        result.upper_outcome = upper_out
        if upper_out.point is not None:
            witness = bounder._witness(focused, reform, upper_out)
            if witness.feasible and check_feasibility(pp, witness.original, options.feasibility_tol):
                result.upper, result.witness_upper = witness.objective, witness
                result.upper_source = "upper-program"
                result.verdict = UPPER_ONLY
                return step

        lower_out = bounder._solve(build_lower_program(focused, reformulation=reform))
        result.lower_outcome = lower_out
        if lower_out.point is not None:
            witness = bounder._witness(focused, reform, lower_out)
            result.witness_lower = witness
            if witness.feasible and check_feasibility(pp, witness.original, options.feasibility_tol):
                result.upper, result.witness_upper = witness.objective, witness
                result.upper_source = "lower-witness"
                result.verdict = UPPER_ONLY
    except SimplexError as exc:
        result.notes.append(str(exc))
    return step


def bound_global_minimum(
    pp: PolynomialProgram,
    params: Optional[ReformParams] = None,
    options: Optional[SolveOptions] = None,
) -> IntervalResult:
    """
    Bracket the global minimum of pp.

    Args:
        pp: The program (normalized on the fly)
        params: Per-variable sigma/kappa settings
        options: Solver limits, refinement and concurrency switches

    Returns:
        IntervalResult with verdict bounded, lower-only, infeasible-proven or
        undecided
    """
    return IntervalBounder(params, options).bound(pp)


def tau_variant(
    pp: PolynomialProgram,
    params: Optional[ReformParams] = None,
    options: Optional[SolveOptions] = None,
) -> TauResult:
    """
    Solve the single linearized program and report its tolerances.

    tau_i = max(0, -errlb[g_i]) bounds how far constraint i can be violated
    by a solution of the linearized program; the optimum z of that program
    gives the interval [z - errub[f], z - errlb[f]]. Infeasibility here says
    nothing about the original program.
    """
    params = params or ReformParams()
    options = options or SolveOptions()
    bounder = IntervalBounder(params, options)
    pp = normalize_program(pp)
    reform = Reformulator(params, verbose=options.verbose).reformulate(pp)
    model = build_linearized_program(pp, reformulation=reform)

    names = [c.name for c in reform.constraints]
    taus = [max(0.0, -c.errors.errlb) for c in reform.constraints]
    result = TauResult(
        status=UNDECIDED,
        constraint_names=names,
        tau_per_constraint=taus,
        statistics=reform.statistics(),
        reformulation=reform,
    )
    outcome = bounder._solve(model)
    result.outcome = outcome
    if outcome.status == INFEASIBLE:
        result.status = INFEASIBLE
        bounder.log("linearized program infeasible; the original may still be feasible")
        return result
    if outcome.point is None:
        return result

    errors = reform.objective.errors
    z = outcome.value
    result.status = OPTIMAL if outcome.status == OPTIMAL else outcome.status
    result.value = z
    result.interval = (z - errors.errub, z - errors.errlb)
    if outcome.status == LIMIT:
        result.notes.append(
            f"linearized program stopped early (gap {outcome.gap:.3g}); the interval is "
            "built from the incumbent and is not proven"
        )
    result.witness = bounder._witness(pp, reform, outcome)
    bounder.log(f"tau {result.tau:.6g}, interval {result.interval}")
    return result
