"""
Bound reports: what was solved, with which resolution, and what came out.

Values are reported in the program's own sense: for a maximization program
the internal interval on min(-f) is flipped back to an interval on max f.
"""

import json
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

from .branch_and_bound import MilpOutcome
from .driver import (
    BOUNDED,
    INFEASIBLE_PROVEN,
    LOWER_ONLY,
    IntervalResult,
    TauResult,
    Witness,
)
from .polynomial import PolynomialProgram
from .program_parser import print_program
from .reformulator import Reformulation
from .utils import format_number, timestamp_now
from .version import __version__

SCHEMA = "report_v1"

FEASIBILITY_UNKNOWN = "feasibility-unknown"
REPORT_VERDICTS = (BOUNDED, LOWER_ONLY, INFEASIBLE_PROVEN, FEASIBILITY_UNKNOWN)


@dataclass
class BoundReport:
    """
    Serializable summary of one run.

    ``interval`` is [lower, upper] in the program's sense, either end None
    when unknown; it is None altogether when there is nothing to report.
    ``status`` keeps the raw driver verdict (e.g. undecided) next to the
    report-level ``verdict``.
    """

    problem: str
    mode: str
    sense: str
    verdict: Optional[str] = None
    status: Optional[str] = None
    interval: Optional[List[Optional[float]]] = None
    variables: Dict[str, Dict] = field(default_factory=dict)
    constants: Dict[str, float] = field(default_factory=dict)
    error_bounds: Dict[str, Dict[str, float]] = field(default_factory=dict)
    statistics: Dict[str, int] = field(default_factory=dict)
    solver: Dict[str, Dict] = field(default_factory=dict)
    witness_lower: Optional[Dict] = None
    witness_upper: Optional[Dict] = None
    upper_source: Optional[str] = None
    refinement: List[Dict] = field(default_factory=list)
    tau: Optional[Dict] = None
    oracle: Optional[Dict] = None
    notes: List[str] = field(default_factory=list)
    meta: Optional[Dict] = None

    def as_dict(self, include_meta: bool = True) -> Dict:
        data = {"schema": SCHEMA}
        data.update(asdict(self))
        if not include_meta or self.meta is None:
            data.pop("meta")
        return data


# ----------------------------------------
# BUILDING REPORTS
# ----------------------------------------


def _flip(pp: PolynomialProgram, value: Optional[float]) -> Optional[float]:
    if value is None:
        return None
    return -value if pp.maximize else value


def _interval(pp: PolynomialProgram, lower, upper) -> List[Optional[float]]:
    if pp.maximize:
        return [_flip(pp, upper), _flip(pp, lower)]
    return [lower, upper]


def _witness(pp: PolynomialProgram, witness: Optional[Witness]) -> Optional[Dict]:
    if witness is None:
        return None
    return {
        "x": dict(witness.original),
        "objective": _flip(pp, witness.objective),
        "model_value": _flip(pp, witness.model_value),
        "feasible": witness.feasible,
        "violations": list(witness.violations),
        "strict": witness.strict,
        "lifted": {k: v for k, v in witness.lifted.assignment.items() if v != 0.0},
    }


def _outcome(outcome: Optional[MilpOutcome]) -> Optional[Dict]:
    if outcome is None:
        return None
    gap = outcome.gap
    return {
        "status": outcome.status,
        "nodes": outcome.nodes,
        "lp_iterations": outcome.lp_iterations,
        "gap": gap if gap != float("inf") else None,
    }


def _reformulation_sections(report: BoundReport, reform: Optional[Reformulation]):
    if reform is None:
        return
    for name, exp in reform.expansions.items():
        report.variables[name] = {
            "lower": exp.alpha,
            "upper": exp.beta,
            "kind": "discrete" if exp.discrete else "continuous",
            "sigma": exp.sigma,
            "kappa": exp.kappa,
        }
    report.constants = dict(reform.program.constants)
    for lin in [reform.objective] + list(reform.constraints):
        report.error_bounds[lin.name] = {
            "errlb": lin.errors.errlb,
            "errub": lin.errors.errub,
        }
    stats = reform.statistics()
    psi_bound, rho_bound = stats.size_bounds()
    report.statistics = {**stats.as_dict(), "psi_bound": psi_bound, "rho_bound": rho_bound}


def _new_report(pp: PolynomialProgram, mode: str) -> BoundReport:
    return BoundReport(
        problem=pp.name or "unnamed",
        mode=mode,
        sense="maximize" if pp.maximize else "minimize",
    )


def report_verdict(verdict: str) -> str:
    """Map a driver verdict onto the report's verdict vocabulary."""
    return verdict if verdict in REPORT_VERDICTS else FEASIBILITY_UNKNOWN


def interval_report(pp: PolynomialProgram, result: IntervalResult, mode: str = "bound") -> BoundReport:
    """Report for a bound_global_minimum result."""
    report = _new_report(pp, mode)
    report.status = result.verdict
    report.verdict = report_verdict(result.verdict)
    if result.lower is not None or result.upper is not None:
        report.interval = _interval(pp, result.lower, result.upper)
    _reformulation_sections(report, result.reformulation)
    report.solver = {
        "lower_program": _outcome(result.lower_outcome),
        "upper_program": _outcome(result.upper_outcome),
    }
    report.witness_lower = _witness(pp, result.witness_lower)
    report.witness_upper = _witness(pp, result.witness_upper)
    report.upper_source = result.upper_source
    report.oracle = result.oracle
    report.notes = list(result.notes)

    for step in result.refinement_trace:
        sub = step.result
        report.refinement.append(
            {
                "bounds": {k: list(v) for k, v in step.bounds.items()},
                "kappa": dict(step.kappa),
                "verdict": sub.verdict,
                "upper": _flip(pp, sub.upper),
                "witness": _witness(pp, sub.witness_upper or sub.witness_lower),
                "solver": {
                    "lower_program": _outcome(sub.lower_outcome),
                    "upper_program": _outcome(sub.upper_outcome),
                },
                "program": print_program(step.program),
            }
        )
    return report


def tau_report(pp: PolynomialProgram, result: TauResult) -> BoundReport:
    """Report for a tau_variant result."""
    report = _new_report(pp, "tau")
    report.status = result.status
    report.notes = list(result.notes)
    if result.interval is not None:
        report.interval = _interval(pp, *result.interval)
        report.verdict = BOUNDED
    else:
        report.verdict = FEASIBILITY_UNKNOWN
        report.notes.append(
            "the linearized program has no solution; this decides nothing about "
            "the original program"
        )
    _reformulation_sections(report, result.reformulation)
    report.solver = {"linearized_program": _outcome(result.outcome)}
    report.witness_lower = _witness(pp, result.witness)
    report.tau = {
        "tau": result.tau,
        "per_constraint": dict(zip(result.constraint_names, result.tau_per_constraint)),
        "value": _flip(pp, result.value),
    }
    return report


def reformulation_report(pp: PolynomialProgram, reform: Reformulation) -> BoundReport:
    """Report for reformulate-only runs: sizes, resolutions and error bounds."""
    report = _new_report(pp, "reformulate-only")
    _reformulation_sections(report, reform)
    return report


def attach_meta(report: BoundReport, wall_time: float) -> BoundReport:
    report.meta = {
        "version": __version__,
        "timestamp": timestamp_now(),
        "wall_time": wall_time,
    }
    return report


# ----------------------------------------
# WRITING
# ----------------------------------------


def _text_lines(report: BoundReport) -> List[str]:
    lines = [f"Problem: {report.problem} ({report.sense})"]
    lines.append(f"Mode:    {report.mode}")
    if report.verdict:
        lines.append(f"Verdict: {report.verdict} ({report.status})")
    if report.interval is not None:
        lo, hi = report.interval
        lines.append(f"Interval: [{format_number(lo)}, {format_number(hi)}]")
    if report.tau:
        lines.append(f"Tau:     {format_number(report.tau['tau'])}")
        for name, tau in report.tau["per_constraint"].items():
            lines.append(f"  {name}: {format_number(tau)}")

    if report.variables:
        lines.append("\nVariables:")
        for name, info in report.variables.items():
            lines.append(
                f"  {name}: [{format_number(info['lower'])}, {format_number(info['upper'])}] "
                f"{info['kind']} sigma={info['sigma']} kappa={format_number(info['kappa'])}"
            )
    for name, value in report.constants.items():
        lines.append(f"  {name} = {format_number(value)} (constant)")

    if report.error_bounds:
        lines.append("\nError bounds:")
        for name, eb in report.error_bounds.items():
            lines.append(
                f"  {name}: errlb={format_number(eb['errlb'])} errub={format_number(eb['errub'])}"
            )
    if report.statistics:
        s = report.statistics
        lines.append(
            f"\nSize: phi={s['phi']} psi={s['psi']} rho={s['rho']} t={s['t']} d={s['d']}"
        )

    for label, witness in (("x(w-)", report.witness_lower), ("upper witness", report.witness_upper)):
        if witness is None:
            continue
        xs = ", ".join(f"{k}={format_number(v)}" for k, v in witness["x"].items())
        state = "feasible" if witness["feasible"] else f"violates {', '.join(witness['violations'])}"
        lines.append(f"\n{label}: ({xs})")
        lines.append(f"  f = {format_number(witness['objective'])}, {state}")
    if report.upper_source:
        lines.append(f"Upper bound from: {report.upper_source}")

    for i, step in enumerate(report.refinement, 1):
        bounds = ", ".join(
            f"{k} in [{format_number(lo)}, {format_number(hi)}]" for k, (lo, hi) in step["bounds"].items()
        )
        lines.append(f"\nRefinement {i}: {step['verdict']} upper={format_number(step['upper'])}")
        lines.append(f"  box: {bounds}")

    for name, info in report.solver.items():
        if info:
            lines.append(
                f"{name}: {info['status']}, {info['nodes']} nodes, "
                f"{info['lp_iterations']} LP iterations"
            )
    if report.oracle:
        lines.append(f"oracle: {report.oracle}")
    for note in report.notes:
        lines.append(f"note: {note}")
    if report.meta:
        lines.append(f"\nwall time {report.meta['wall_time']:.3f}s at {report.meta['timestamp']}")
    return lines


def write_report(report: BoundReport, fmt: str = "text", include_meta: bool = True) -> bytes:
    """
    Serialize a report.

    Args:
        report: The report
        fmt: ``text`` or ``json``
        include_meta: Keep timestamps and wall time (drop for reproducible output)

    Returns:
        UTF-8 encoded bytes ending in a newline
    """
    if fmt == "json":
        text = json.dumps(report.as_dict(include_meta), indent=2, ensure_ascii=False)
    elif fmt == "text":
        if not include_meta:
            report = BoundReport(**{**report.__dict__, "meta": None})
        text = "\n".join(_text_lines(report))
    else:
        raise ValueError(f"unknown report format '{fmt}'")
    return (text + "\n").encode("utf-8")
