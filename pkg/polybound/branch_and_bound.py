"""
Branch-and-bound over the binary unit variables of a MilpModel.

Nodes are explored best-bound first, so the smallest open LP bound is always
a valid lower bound on the optimum. Branching fixes the most fractional
binary to 0 and to 1; the only heuristic is rounding the root relaxation.
"""

import heapq
import itertools
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from .milp_model import INTEGRALITY_TOL, LiftedPoint, MilpModel
from .simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, LpOutcome, SimplexError, solve_lp

LIMIT = "limit"
UNDECIDED = "undecided"

DEFAULT_ABS_GAP = 1e-6

# integral LP points further than this from 0/1 are re-solved with the
# binaries fixed so the continuous part matches the rounded pattern
EXACT_TOL = 1e-9

ORACLE_LIMIT = 25

Fixes = Dict[str, Tuple[float, float]]


class OracleLimitError(ValueError):
    """Exhaustive enumeration refused because there are too many binaries."""


@dataclass
class MilpOutcome:
    """
    Result of a MILP solve.

    ``status`` is optimal, infeasible, limit (incumbent found but the search
    stopped early) or undecided (stopped early without an incumbent).
    ``bound`` is a proven lower bound on the optimum whenever the model is
    not infeasible.
    """

    status: str
    value: Optional[float] = None
    point: Optional[LiftedPoint] = None
    bound: Optional[float] = None
    nodes: int = 0
    lp_iterations: int = 0

    @property
    def gap(self) -> float:
        if self.status == INFEASIBLE:
            return 0.0
        if self.value is None or self.bound is None:
            return float("inf")
        return max(0.0, self.value - self.bound)

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL


def _fix(binaries, pattern) -> Fixes:
    return {u: (float(v), float(v)) for u, v in zip(binaries, pattern)}


def _fractionality(lp: LpOutcome, columns: np.ndarray) -> np.ndarray:
    values = lp.x[columns]
    return np.abs(values - np.round(values))


class BranchAndBound:
    """
    Exact best-bound branch-and-bound for a MilpModel.

    Args:
        model: The mixed binary program
        abs_gap: Stop once incumbent - best bound <= abs_gap
        node_limit: Maximum number of LP relaxations solved
        time_limit: Wall-clock seconds
        threads: Children of up to this many nodes are solved concurrently
        audit: Check that child bounds never drop below their parent's
        verbose: Log progress to stderr and show a progress bar
    """

    def __init__(
        self,
        model: MilpModel,
        abs_gap: float = DEFAULT_ABS_GAP,
        node_limit: Optional[int] = None,
        time_limit: Optional[float] = None,
        threads: int = 1,
        audit: bool = False,
        verbose=False,
    ):
        self.model = model
        self.abs_gap = abs_gap
        self.node_limit = node_limit
        self.time_limit = time_limit
        self.threads = max(1, threads)
        self.audit = audit
        self.verbose = verbose

        arrays = model.arrays()
        self.columns = arrays.columns
        self.binary_columns = arrays.binary_columns
        self.binaries = list(model.binaries)

        self.nodes = 0
        self.lp_iterations = 0
        self.incumbent: Optional[LiftedPoint] = None
        self.incumbent_value = float("inf")
        self._seq = itertools.count()

    def log(self, *args):
        """Print log message if verbose mode is enabled."""
        if self.verbose:
            print("[BNB]", *args, file=sys.stderr)

    # ----------------------------------------
    # LP HELPERS
    # ----------------------------------------

    def _solve(self, fixes: Fixes) -> LpOutcome:
        lp = solve_lp(self.model, fixes)
        self.nodes += 1
        self.lp_iterations += lp.iterations
        if lp.status == UNBOUNDED:
            raise SimplexError(f"relaxation of {self.model.name} is unbounded")
        return lp

    def _solve_many(self, batch: List[Fixes]) -> List[LpOutcome]:
        if self.threads == 1 or len(batch) == 1:
            return [self._solve(f) for f in batch]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            results = list(pool.map(lambda f: solve_lp(self.model, f), batch))
        for lp in results:
            self.nodes += 1
            self.lp_iterations += lp.iterations
            if lp.status == UNBOUNDED:
                raise SimplexError(f"relaxation of {self.model.name} is unbounded")
        return results

    def _point(self, lp: LpOutcome) -> LiftedPoint:
        values = dict(zip(self.columns, lp.x.tolist()))
        for u in self.binaries:
            values[u] = float(round(values[u]))
        return LiftedPoint(values)

    def _offer(self, lp: LpOutcome, fixes: Fixes) -> bool:
        """
        Try an integral LP solution as incumbent.

        Returns False when the rounded pattern turns out infeasible, so the
        caller can keep branching.
        """
        frac = _fractionality(lp, self.binary_columns)
        if frac.size and frac.max() > EXACT_TOL:
            pattern = np.round(lp.x[self.binary_columns])
            exact = self._solve({**fixes, **_fix(self.binaries, pattern)})
            if exact.status != OPTIMAL:
                return False
            lp = exact
        point = self._point(lp)
        violations = self.model.violations(point.assignment)
        if violations:
            self.log(f"rejected candidate, violations: {violations[:3]}")
            return False
        value = self.model.objective_value(point.assignment)
        if value < self.incumbent_value:
            self.incumbent_value = value
            self.incumbent = point
            self.log(f"incumbent {value:.10g} after {self.nodes} nodes")
        return True

    def _branch_column(self, lp: LpOutcome) -> Optional[int]:
        """Most fractional binary, lowest index on ties; None when integral."""
        if not self.binaries:
            return None
        frac = _fractionality(lp, self.binary_columns)
        best = int(np.argmax(frac))
        if frac[best] <= INTEGRALITY_TOL:
            return None
        return best

    def _limits_hit(self, start: float) -> bool:
        if self.node_limit is not None and self.nodes >= self.node_limit:
            return True
        if self.time_limit is not None and time.monotonic() - start >= self.time_limit:
            return True
        return False

    # ----------------------------------------
    # SEARCH
    # ----------------------------------------

    def solve(self) -> MilpOutcome:
        start = time.monotonic()
        root = self._solve({})
        if root.status == INFEASIBLE:
            self.log("root relaxation infeasible")
            return MilpOutcome(INFEASIBLE, nodes=self.nodes, lp_iterations=self.lp_iterations)

        if self.binaries:
            pattern = np.round(root.x[self.binary_columns])
            rounded = self._solve(_fix(self.binaries, pattern))
            if rounded.status == OPTIMAL:
                self._offer(rounded, _fix(self.binaries, pattern))

        heap: List[Tuple[float, int, Fixes, LpOutcome]] = [(root.value, next(self._seq), {}, root)]
        progress = tqdm(
            desc=f"B&B {self.model.name}", unit="node", disable=not self.verbose, file=sys.stderr
        )
        stopped = False
        try:
            while heap:
                if heap[0][0] >= self.incumbent_value - self.abs_gap:
                    heap.clear()
                    break
                if self._limits_hit(start):
                    stopped = True
                    break

                batch = []
                while heap and len(batch) < self.threads:
                    bound, _, fixes, lp = heapq.heappop(heap)
                    if bound >= self.incumbent_value - self.abs_gap:
                        continue
                    j = self._branch_column(lp)
                    if j is None and self._offer(lp, fixes):
                        continue
                    if j is None:
                        # nearly integral pattern that does not survive exact
                        # fixing: branch on whatever fractionality is left
                        j = int(np.argmax(_fractionality(lp, self.binary_columns)))
                        if _fractionality(lp, self.binary_columns)[j] == 0.0:
                            continue
                    batch.append((bound, fixes, self.binaries[j]))

                children = [
                    (bound, {**fixes, u: (v, v)})
                    for bound, fixes, u in batch
                    for v in (0.0, 1.0)
                ]
                if not children:
                    continue
                outcomes = self._solve_many([fixes for _, fixes in children])
                progress.update(len(outcomes))
                for (parent_bound, fixes), lp in zip(children, outcomes):
                    if lp.status != OPTIMAL:
                        continue
                    if self.audit:
                        assert lp.value >= parent_bound - 1e-6 * max(1.0, abs(parent_bound)), (
                            f"child bound {lp.value} below parent bound {parent_bound}"
                        )
                    if lp.value < self.incumbent_value - self.abs_gap:
                        heapq.heappush(heap, (lp.value, next(self._seq), fixes, lp))
        finally:
            progress.close()

        return self._result(heap, stopped)

    def _result(self, heap, stopped: bool) -> MilpOutcome:
        common = dict(nodes=self.nodes, lp_iterations=self.lp_iterations)
        if not stopped or not heap:
            if self.incumbent is None:
                self.log(f"infeasible after {self.nodes} nodes")
                return MilpOutcome(INFEASIBLE, **common)
            self.log(f"optimal {self.incumbent_value:.10g} after {self.nodes} nodes")
            return MilpOutcome(
                OPTIMAL, self.incumbent_value, self.incumbent, self.incumbent_value, **common
            )

        best_bound = min(bound for bound, _, _, _ in heap)
        if self.incumbent is None:
            self.log(f"limit reached without incumbent, bound {best_bound:.10g}")
            return MilpOutcome(UNDECIDED, bound=best_bound, **common)
        bound = min(best_bound, self.incumbent_value)
        self.log(f"limit reached, gap {self.incumbent_value - bound:.3g}")
        return MilpOutcome(LIMIT, self.incumbent_value, self.incumbent, bound, **common)


def solve_milp(
    model: MilpModel,
    abs_gap: float = DEFAULT_ABS_GAP,
    node_limit: Optional[int] = None,
    time_limit: Optional[float] = None,
    threads: int = 1,
    audit: bool = False,
    verbose=False,
) -> MilpOutcome:
    """Solve a mixed binary program to global optimality (within abs_gap)."""
    return BranchAndBound(
        model,
        abs_gap=abs_gap,
        node_limit=node_limit,
        time_limit=time_limit,
        threads=threads,
        audit=audit,
        verbose=verbose,
    ).solve()


# ----------------------------------------
# ENUMERATION ORACLE
# ----------------------------------------


def enumerate_oracle(model: MilpModel, verbose=False) -> MilpOutcome:
    """
    Reference answer by enumerating every binary pattern.

    Each complete pattern is fixed and its continuous LP solved. A prefix
    whose LP is already infeasible is skipped with all of its completions,
    which never changes the answer. Ties keep the first pattern found in
    lexicographic order.

    Raises:
        OracleLimitError: more than ORACLE_LIMIT binaries
    """
    binaries = list(model.binaries)
    phi = len(binaries)
    if phi > ORACLE_LIMIT:
        raise OracleLimitError(
            f"{model.name} has {phi} binaries; enumeration is limited to {ORACLE_LIMIT}"
        )

    columns = model.arrays().columns
    best_value = float("inf")
    best_point: Optional[LiftedPoint] = None
    solved = 0
    progress = tqdm(total=2 ** phi, desc=f"oracle {model.name}", unit="pattern",
                    disable=not verbose, file=sys.stderr)

    def visit(depth: int, fixes: Fixes):
        nonlocal best_value, best_point, solved
        lp = solve_lp(model, fixes)
        solved += 1
        if lp.status != OPTIMAL:
            progress.update(2 ** (phi - depth))
            return
        if depth == phi:
            progress.update(1)
            if lp.value < best_value:
                best_value = lp.value
                best_point = LiftedPoint(dict(zip(columns, lp.x.tolist())))
            return
        u = binaries[depth]
        for v in (0.0, 1.0):
            visit(depth + 1, {**fixes, u: (v, v)})

    try:
        visit(0, {})
    finally:
        progress.close()

    if verbose:
        print("[ORACLE]", f"{solved} LP solves for {2 ** phi} patterns", file=sys.stderr)
    if best_point is None:
        return MilpOutcome(INFEASIBLE, nodes=solved)
    return MilpOutcome(OPTIMAL, best_value, best_point, best_value, nodes=solved)
