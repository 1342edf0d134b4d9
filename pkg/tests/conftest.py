"""
pytest configuration and fixtures for polybound tests.
"""

import random
import shutil
import tempfile
from pathlib import Path

import pytest

from polybound.polynomial import Constraint, Monomial, Polynomial, PolynomialProgram, VariableSpec
from polybound.program_parser import read_program

SAMPLE_DIR = Path(__file__).parent / "sample_programs"

# sigma settings the reproduction runs use
PP1_SIGMA = {"x1": 3, "x2": 2, "x3": 2}
PP2_SIGMA = {"x1": 3, "x2": 3, "x3": 9, "x4": 5}
PP3_SIGMA = {"x1": 7, "x2": 7, "x3": 7}


@pytest.fixture
def temp_dir():
    """Create a temporary directory for test output."""
    tmpdir = tempfile.mkdtemp()
    yield Path(tmpdir)
    shutil.rmtree(tmpdir)


@pytest.fixture
def sample_path():
    """Path of a file in tests/sample_programs."""

    def path(name):
        return SAMPLE_DIR / name

    return path


@pytest.fixture
def pp1():
    return read_program(SAMPLE_DIR / "pp1.pp")


@pytest.fixture
def pp2():
    return read_program(SAMPLE_DIR / "pp2.pp")


@pytest.fixture
def pp3():
    return read_program(SAMPLE_DIR / "pp3.pp")


def random_polynomial(rng, names, max_degree, n_terms, scale=5.0):
    terms = []
    for _ in range(n_terms):
        degree = rng.randint(0, max_degree)
        exps = {}
        for _ in range(degree):
            name = rng.choice(names)
            exps[name] = exps.get(name, 0) + 1
        terms.append((round(rng.uniform(-scale, scale), 2), Monomial.from_map(exps)))
    return Polynomial(terms)


def make_random_program(seed, n_vars=2, max_degree=3, n_constraints=1):
    """
    Small random program over integer-ish boxes.

    Constraints are shifted so the box center satisfies them, which keeps
    most instances feasible.
    """
    rng = random.Random(seed)
    names = [f"x{i + 1}" for i in range(n_vars)]
    specs = []
    center = {}
    for name in names:
        lo = rng.randint(-3, 1)
        hi = lo + rng.randint(1, 4)
        specs.append(VariableSpec.continuous(name, lo, hi))
        center[name] = (lo + hi) / 2
    objective = random_polynomial(rng, names, max_degree, rng.randint(2, 5))
    constraints = []
    for j in range(n_constraints):
        body = random_polynomial(rng, names, max_degree, rng.randint(1, 3))
        body = body - body.evaluate(center) - rng.uniform(0.5, 3.0)
        constraints.append(Constraint(body, "<=", 0.0, f"g{j + 1}"))
    return PolynomialProgram(specs, objective, constraints, name=f"random{seed}")


@pytest.fixture
def random_program():
    """Factory for seeded random programs: random_program(seed, n_vars=2, ...)."""
    return make_random_program
