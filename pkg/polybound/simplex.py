"""
Bounded-variable primal simplex on dense numpy arrays.

Solves

    minimize    c @ x + c0
    subject to  A @ x <= b
                lb <= x <= ub

Variables carry their own bounds, so the basis only ever holds one row per
constraint. Rows whose slack is negative at the starting point get an
artificial variable; phase 1 drives those to zero, phase 2 optimizes c.
"""

import sys
from dataclasses import dataclass
from typing import Mapping, Optional, Tuple

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

FEASIBILITY_TOL = 1e-7
OPTIMALITY_TOL = 1e-7
PIVOT_TOL = 1e-9
MAX_ITERATIONS = 50000

# Dantzig pricing until then, Bland's rule afterwards
BLAND_AFTER = 5000
# consecutive zero-length steps before switching to Bland early
DEGENERATE_LIMIT = 200

REFACTOR_INTERVAL = 100


class SimplexError(RuntimeError):
    """Numerical breakdown or iteration limit; the LP was not decided."""


@dataclass
class LpOutcome:
    """Result of one LP solve. value and x are set only when optimal."""

    status: str
    value: Optional[float] = None
    x: Optional[np.ndarray] = None
    iterations: int = 0
    reduced_costs: Optional[np.ndarray] = None

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL


class BoundedSimplex:
    """
    Two-phase bounded-variable primal simplex with an explicit basis inverse.

    An instance solves exactly one LP and is not meant to be shared between
    threads.

    Columns are laid out as n structural variables, m slacks and k
    artificials. A row i flipped at the start reads
    ``-A_i x - s_i + a_i = -b_i`` so the initial basis is the identity.
    """

    def __init__(
        self,
        c,
        A,
        b,
        lb,
        ub,
        c0: float = 0.0,
        max_iterations: int = MAX_ITERATIONS,
        verbose=False,
    ):
        self.c = np.asarray(c, dtype=float)
        self.A = np.asarray(A, dtype=float).reshape(-1, self.c.size)
        self.b = np.asarray(b, dtype=float)
        self.lb = np.asarray(lb, dtype=float)
        self.ub = np.asarray(ub, dtype=float)
        self.c0 = float(c0)
        self.max_iterations = max_iterations
        self.verbose = verbose
        self.iterations = 0

        m, n = self.A.shape
        if self.b.shape != (m,):
            raise ValueError(f"b has shape {self.b.shape}, expected ({m},)")
        if self.lb.shape != (n,) or self.ub.shape != (n,):
            raise ValueError("bounds must have one entry per column")

    def log(self, *args):
        """Print log message if verbose mode is enabled."""
        if self.verbose:
            print("[SIMPLEX]", *args, file=sys.stderr)

    # ----------------------------------------
    # COLUMN ACCESS
    # ----------------------------------------

    def _column(self, j: int) -> np.ndarray:
        n, m = self._n, self._m
        if j < n:
            return self._A[:, j]
        e = np.zeros(m)
        if j < n + m:
            e[j - n] = self._sign[j - n]
        else:
            e[self._art_rows[j - n - m]] = 1.0
        return e

    def _reduced_costs(self, cost: np.ndarray, y: np.ndarray) -> np.ndarray:
        n, m = self._n, self._m
        d = cost.copy()
        d[:n] -= y @ self._A
        d[n:n + m] -= y * self._sign
        d[n + m:] -= y[self._art_rows]
        return d

    def _refactor(self):
        """Rebuild the basis inverse and recompute basic values from scratch."""
        n, m = self._n, self._m
        if m == 0:
            return
        B = np.column_stack([self._column(j) for j in self._basis])
        try:
            binv = np.linalg.solve(B, np.eye(m))
        except np.linalg.LinAlgError as exc:
            raise SimplexError(
                f"singular basis after {self.iterations} iterations: {exc}"
            ) from exc
        if not np.all(np.isfinite(binv)):
            raise SimplexError(f"basis inverse not finite after {self.iterations} iterations")
        self._binv = binv

        xn = self._x.copy()
        xn[self._basis] = 0.0
        rhs = self._b - self._A @ xn[:n] - self._sign * xn[n:n + m]
        rhs[self._art_rows] -= xn[n + m:]
        self._x[self._basis] = binv @ rhs

    # ----------------------------------------
    # PIVOTING
    # ----------------------------------------

    def _price(self, d: np.ndarray, bland: bool) -> Tuple[Optional[int], int]:
        movable = ~self._is_basic & (self._hi > self._lo)
        up = movable & ~self._at_upper & (d < -OPTIMALITY_TOL)
        down = movable & (self._at_upper | ~np.isfinite(self._lo)) & (d > OPTIMALITY_TOL)
        candidates = up | down
        if not candidates.any():
            return None, 0
        if bland:
            q = int(np.flatnonzero(candidates)[0])
        else:
            q = int(np.argmax(np.where(candidates, np.abs(d), 0.0)))
        return q, 1 if up[q] else -1

    def _ratio_test(self, q: int, direction: int, alpha: np.ndarray, bland: bool):
        """
        Longest step for entering column q.

        Returns:
            (step, leaving row or None for a bound flip, leaving goes to upper)
        """
        basis = self._basis
        xb = self._x[basis]
        lo = self._lo[basis]
        hi = self._hi[basis]
        delta = direction * alpha

        ratios = np.full(self._m, np.inf)
        dec = delta > PIVOT_TOL
        inc = delta < -PIVOT_TOL
        ratios[dec] = (xb[dec] - lo[dec]) / delta[dec]
        ratios[inc] = (hi[inc] - xb[inc]) / -delta[inc]
        ratios = np.maximum(ratios, 0.0)

        flip = self._hi[q] - self._lo[q]
        step = ratios.min() if self._m else np.inf
        if flip <= step:
            return flip, None, False
        if not np.isfinite(step):
            return np.inf, None, False

        ties = np.flatnonzero(ratios <= step + 1e-12)
        if bland:
            r = int(ties[np.argmin(basis[ties])])
        else:
            r = int(ties[np.argmax(np.abs(delta[ties]))])
        return step, r, bool(inc[r])

    def _pivot(self, r: int, q: int, alpha: np.ndarray):
        row = self._binv[r] / alpha[r]
        self._binv -= np.outer(alpha, row)
        self._binv[r] = row
        self._basis[r] = q

    def _run(self, cost: np.ndarray, phase: int) -> Tuple[str, np.ndarray]:
        degenerate = 0
        since_refactor = 0
        while True:
            y = cost[self._basis] @ self._binv if self._m else np.zeros(0)
            d = self._reduced_costs(cost, y)
            bland = self.iterations >= BLAND_AFTER or degenerate >= DEGENERATE_LIMIT
            q, direction = self._price(d, bland)
            if q is None:
                return OPTIMAL, d
            if self.iterations >= self.max_iterations:
                raise SimplexError(
                    f"iteration limit {self.max_iterations} reached in phase {phase}"
                )

            alpha = self._binv @ self._column(q) if self._m else np.zeros(0)
            step, r, to_upper = self._ratio_test(q, direction, alpha, bland)
            if not np.isfinite(step):
                return UNBOUNDED, d

            self._x[q] += direction * step
            if self._m:
                self._x[self._basis] -= step * direction * alpha
            if r is None:
                self._at_upper[q] = direction > 0
            else:
                out = int(self._basis[r])
                self._x[out] = self._hi[out] if to_upper else self._lo[out]
                self._at_upper[out] = to_upper
                self._is_basic[out] = False
                self._is_basic[q] = True
                self._at_upper[q] = False
                self._pivot(r, q, alpha)
                since_refactor += 1
                if since_refactor >= REFACTOR_INTERVAL:
                    self._refactor()
                    since_refactor = 0

            degenerate = degenerate + 1 if step <= 1e-12 else 0
            self.iterations += 1
            if self.iterations % 1000 == 0:
                self.log(f"phase {phase}: {self.iterations} iterations")

    # ----------------------------------------
    # SOLVE
    # ----------------------------------------

    def solve(self) -> LpOutcome:
        """
        Solve the LP.

        Returns:
            LpOutcome with status optimal, infeasible or unbounded

        Raises:
            SimplexError: singular basis or iteration limit
        """
        m, n = self.A.shape
        if np.any(self.lb > self.ub + FEASIBILITY_TOL):
            return LpOutcome(INFEASIBLE)
        lb = self.lb
        ub = np.maximum(self.ub, self.lb)

        x0 = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
        residual = self.b - self.A @ x0
        flipped = residual < 0
        self._n, self._m = n, m
        self._sign = np.where(flipped, -1.0, 1.0)
        self._A = self.A * self._sign[:, None]
        self._b = self.b * self._sign
        self._art_rows = np.flatnonzero(flipped)
        k = self._art_rows.size
        total = n + m + k

        self._lo = np.concatenate([lb, np.zeros(m + k)])
        self._hi = np.concatenate([ub, np.full(m + k, np.inf)])
        self._x = np.concatenate(
            [x0, np.where(flipped, 0.0, residual), -residual[self._art_rows]]
        )
        self._basis = n + np.arange(m)
        self._basis[self._art_rows] = n + m + np.arange(k)
        self._is_basic = np.zeros(total, dtype=bool)
        self._is_basic[self._basis] = True
        self._at_upper = np.zeros(total, dtype=bool)
        self._at_upper[:n] = ~np.isfinite(lb) & np.isfinite(ub)
        self._binv = np.eye(m)

        if k:
            self.log(f"phase 1 with {k} artificial variables")
            cost = np.zeros(total)
            cost[n + m:] = 1.0
            status, _ = self._run(cost, 1)
            if status != OPTIMAL:
                raise SimplexError("phase 1 reported an unbounded direction")
            infeasibility = float(self._x[n + m:].sum())
            scale = max(1.0, float(np.abs(self.b).max(initial=0.0)))
            if infeasibility > FEASIBILITY_TOL * scale:
                self.log(f"infeasible: artificial sum {infeasibility:.3g}")
                return LpOutcome(INFEASIBLE, iterations=self.iterations)
            self._hi[n + m:] = 0.0

        cost = np.concatenate([self.c, np.zeros(m + k)])
        status, d = self._run(cost, 2)
        if status == UNBOUNDED:
            return LpOutcome(UNBOUNDED, iterations=self.iterations)

        x = np.clip(self._x[:n], lb, ub)
        value = float(self.c @ x + self.c0)
        self.log(f"optimal {value:.10g} after {self.iterations} iterations")
        return LpOutcome(OPTIMAL, value, x, self.iterations, d[:n].copy())


def solve_arrays(c, A, b, lb, ub, c0: float = 0.0, verbose=False) -> LpOutcome:
    """Solve min c@x + c0 s.t. A@x <= b, lb <= x <= ub."""
    return BoundedSimplex(c, A, b, lb, ub, c0=c0, verbose=verbose).solve()


def solve_lp(
    model,
    extra_bounds: Optional[Mapping[str, Tuple[float, float]]] = None,
    verbose=False,
) -> LpOutcome:
    """
    Solve the continuous relaxation of a MilpModel.

    Args:
        model: MilpModel
        extra_bounds: tightened (lo, hi) per variable id, e.g. branching fixes
        verbose: Log pivots to stderr

    Returns:
        LpOutcome with x ordered like ``model.variable_ids``
    """
    arrays = model.arrays()
    lb = arrays.lb.copy()
    ub = arrays.ub.copy()
    if extra_bounds:
        index = {v: j for j, v in enumerate(arrays.columns)}
        for var, (lo, hi) in extra_bounds.items():
            j = index[var]
            lb[j] = max(lb[j], lo)
            ub[j] = min(ub[j], hi)
    return BoundedSimplex(
        arrays.c, arrays.A, arrays.b, lb, ub, c0=arrays.c0, verbose=verbose
    ).solve()
