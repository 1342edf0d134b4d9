import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

from .branch_and_bound import DEFAULT_ABS_GAP
from .driver import INFEASIBLE_PROVEN, SolveOptions, bound_global_minimum, tau_variant
from .milp_model import (
    LINEARIZED,
    LOWER,
    UPPER,
    build_linearized_program,
    build_lower_program,
    build_upper_program,
)
from .mps_writer import MPS_FIXED, NATIVE_JSON, export_milp, mps_name_map
from .polynomial import DEFAULT_FEASIBILITY_TOL, UnassignedVariableError, normalize_program
from .program_parser import ProgramSyntaxError, read_program
from .reformulator import DEFAULT_SIGMA, ReformParams, Reformulator
from .report import (
    FEASIBILITY_UNKNOWN,
    attach_meta,
    interval_report,
    reformulation_report,
    tau_report,
    write_report,
)
from .simplex import SimplexError
from .utils import ensure_parent_dir, parse_assignments
from .version import __version__

MODES = ("bound", "tau", "reformulate-only")

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_UNDECIDED = 3


@dataclass
class RunConfig:
    """Everything one invocation needs; built from argparse or by hand."""

    input: str
    mode: str = "bound"
    sigma: Dict[str, int] = field(default_factory=dict)
    kappa: Dict[str, float] = field(default_factory=dict)
    default_sigma: int = DEFAULT_SIGMA
    fmt: str = "text"
    export: Optional[str] = None
    export_model: Optional[str] = None
    tol: float = DEFAULT_FEASIBILITY_TOL
    abs_gap: float = DEFAULT_ABS_GAP
    time_limit: Optional[float] = None
    node_limit: Optional[int] = None
    refine: bool = False
    refine_rounds: int = 1
    concurrent: bool = False
    threads: int = 1
    oracle: bool = False
    include_meta: bool = True
    verbose: bool = False

    def reform_params(self) -> ReformParams:
        return ReformParams(sigma=self.sigma, kappa=self.kappa, default_sigma=self.default_sigma)

    def solve_options(self) -> SolveOptions:
        return SolveOptions(
            abs_gap=self.abs_gap,
            node_limit=self.node_limit,
            time_limit=self.time_limit,
            feasibility_tol=self.tol,
            refine=self.refine,
            refine_rounds=self.refine_rounds,
            threads=self.threads,
            concurrent=self.concurrent,
            oracle=self.oracle,
            verbose=self.verbose,
        )


def export_format(path: str) -> str:
    """native-json for ``.json`` targets, fixed MPS otherwise."""
    return NATIVE_JSON if Path(path).suffix.lower() == ".json" else MPS_FIXED


def _write_export(config: RunConfig, pp, reform):
    which = config.export_model or (LINEARIZED if config.mode == "tau" else LOWER)
    if which == LOWER:
        model = build_lower_program(pp, reformulation=reform)
    elif which == UPPER:
        model = build_upper_program(pp, reformulation=reform, constraint_tolerance=config.tol)
    else:
        model = build_linearized_program(pp, reformulation=reform)

    fmt = export_format(config.export)
    ensure_parent_dir(config.export)
    with open(config.export, "wb") as f:
        f.write(export_milp(model, fmt))
    if fmt == MPS_FIXED:
        with open(config.export + ".names.json", "w", encoding="utf-8") as f:
            json.dump(mps_name_map(model), f, indent=1)
    return which, fmt


def _status(config: RunConfig, *lines):
    # status lines only decorate text output
    if config.fmt == "text":
        for line in lines:
            print(line)


def run(config: RunConfig) -> int:
    """
    Execute one invocation and write its report to standard output.

    Returns:
        0 on success, 1 on input errors, 2 when the program is proven
        infeasible, 3 when feasibility stays undecided
    """
    if config.mode not in MODES:
        print(f"Error: unknown mode '{config.mode}'", file=sys.stderr)
        return EXIT_INPUT_ERROR
    started = time.perf_counter()
    try:
        pp = read_program(config.input)
        params = config.reform_params()
        options = config.solve_options()

        _status(config, f"Polybound v{__version__}", f"Reading: {config.input}")
        normalized = normalize_program(pp)
        reform = Reformulator(params, verbose=config.verbose).reformulate(normalized)
        if config.export:
            which, fmt = _write_export(config, normalized, reform)
            _status(config, f"Export:  {config.export} ({which} program, {fmt})")
        _status(config, "")

        if config.mode == "reformulate-only":
            report = reformulation_report(pp, reform)
        elif config.mode == "tau":
            report = tau_report(pp, tau_variant(pp, params, options))
        else:
            report = interval_report(pp, bound_global_minimum(pp, params, options))
    except ProgramSyntaxError as exc:
        print(f"Error: {config.input}: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except (OSError, ValueError, UnassignedVariableError) as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except SimplexError as exc:
        print(f"Error: solver failure: {exc}", file=sys.stderr)
        return EXIT_UNDECIDED

    if config.include_meta:
        attach_meta(report, time.perf_counter() - started)
    sys.stdout.write(write_report(report, config.fmt, config.include_meta).decode("utf-8"))

    if report.verdict == INFEASIBLE_PROVEN:
        return EXIT_INFEASIBLE
    if report.verdict == FEASIBILITY_UNKNOWN:
        return EXIT_UNDECIDED
    return EXIT_OK


def _assignments(convert):
    def parse(text):
        try:
            return parse_assignments(text, convert)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc))

    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polybound",
        description="Bracket the global minimum of a polynomial program with mixed binary LPs",
        epilog="Example: polybound bound pp1.pp --sigma x1=3,x2=2,x3=2",
    )
    parser.add_argument("--version", action="version", version=f"polybound {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input", help="Path to a .pp program file")
    common.add_argument(
        "--sigma",
        type=_assignments(int),
        default={},
        help="Unit variables per variable, e.g. x1=3,x2=2",
    )
    common.add_argument(
        "--kappa",
        type=_assignments(float),
        default={},
        help="Error limit per variable, e.g. x3=0.5 (not together with --sigma for one variable)",
    )
    common.add_argument(
        "--default-sigma",
        type=int,
        default=DEFAULT_SIGMA,
        help=f"Unit variables for unlisted nonlinear variables (default: {DEFAULT_SIGMA})",
    )
    common.add_argument(
        "--tol",
        type=float,
        default=DEFAULT_FEASIBILITY_TOL,
        help=f"Constraint feasibility tolerance (default: {DEFAULT_FEASIBILITY_TOL})",
    )
    common.add_argument("--gap", type=float, default=DEFAULT_ABS_GAP, help="Absolute optimality gap")
    common.add_argument("--time-limit", type=float, help="Seconds per branch-and-bound run")
    common.add_argument("--node-limit", type=int, help="Nodes per branch-and-bound run")
    common.add_argument(
        "--refine",
        action="store_true",
        help="Search a box around the optimistic solution when no upper bound is found",
    )
    common.add_argument("--refine-rounds", type=int, default=1, help="Focused refinement rounds")
    common.add_argument(
        "--concurrent", action="store_true", help="Solve both bounding programs side by side"
    )
    common.add_argument("--threads", type=int, default=1, help="Nodes solved per batch")
    common.add_argument(
        "--oracle",
        action="store_true",
        help="Cross-check the optimistic program by enumeration (small models only)",
    )
    common.add_argument(
        "--format", dest="fmt", choices=["text", "json"], default="text", help="Report format"
    )
    common.add_argument(
        "--export",
        help="Write a model to this path (.json for native-json, anything else for MPS)",
    )
    common.add_argument(
        "--export-model",
        choices=[LOWER, UPPER, LINEARIZED],
        help="Which program --export writes (default: lower, linearized in tau mode)",
    )
    common.add_argument(
        "--no-meta", action="store_true", help="Leave timestamps and timings out of the report"
    )
    common.add_argument("--verbose", "-v", action="store_true", help="Enable verbose logging")

    sub = parser.add_subparsers(dest="mode", required=True)
    sub.add_parser("bound", parents=[common], help="Bracket the global minimum")
    sub.add_parser("tau", parents=[common], help="Solve the single linearized program")
    sub.add_parser(
        "reformulate-only", parents=[common], help="Reformulate (and export) without solving"
    )
    return parser


def main(argv=None) -> int:
    """Command-line interface for polybound."""
    args = build_parser().parse_args(argv)
    config = RunConfig(
        input=args.input,
        mode=args.mode,
        sigma=args.sigma,
        kappa=args.kappa,
        default_sigma=args.default_sigma,
        fmt=args.fmt,
        export=args.export,
        export_model=args.export_model,
        tol=args.tol,
        abs_gap=args.gap,
        time_limit=args.time_limit,
        node_limit=args.node_limit,
        refine=args.refine,
        refine_rounds=args.refine_rounds,
        concurrent=args.concurrent,
        threads=args.threads,
        oracle=args.oracle,
        include_meta=not args.no_meta,
        verbose=args.verbose,
    )
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
