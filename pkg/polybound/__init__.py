from .driver import (
    IntervalResult,
    SolveOptions,
    bound_global_minimum,
    refine_focused,
    tau_variant,
)
from .milp_model import (
    MilpModel,
    build_linearized_program,
    build_lower_program,
    build_upper_program,
    lift_point,
    map_to_original,
)
from .polynomial import Polynomial, PolynomialProgram, check_feasibility, evaluate
from .program_parser import parse_program, print_program, read_program
from .reformulator import ReformParams, Reformulator, reformulate
from .version import __version__
