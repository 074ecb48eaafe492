"""Reference MILP solver: branch and bound over the bounded-variable simplex.

Rules are fixed for reproducibility: best-bound node selection with a
depth-first dive as tiebreak (newest node wins ties), branching on the most
fractional binary (closest to 0.5, smallest variable index on ties). Adequate
for desk-scale instances (a few hundred binaries); an external solver can be
plugged in by replacing :func:`solve` behind the same result contract.
"""

from __future__ import annotations

import heapq
import math
import time

import numpy as np

from .model import MilpModel, SolveOptions, SolveResult
from . import simplex
from .simplex import solve_lp, SimplexFailure

INT_TOL = 1e-6           # integrality tolerance on binaries
FEAS_CHECK_TOL = 1e-6    # row-norm-scaled residual allowed in returned values
WORK_PER_PIVOT = 1e-4    # deterministic "work units" per simplex pivot


class TimeLimitNoIncumbentError(Exception):
    """The time limit expired before any integer-feasible point was found."""


class _Arrays:
    """Model flattened to simplex standard form (slacks appended)."""

    def __init__(self, model: MilpModel):
        nvar = model.num_variables
        rows = model.constraints
        n_slack = sum(1 for con in rows if con.sense != "=")
        m = len(rows)
        A = np.zeros((m, nvar + n_slack))
        b = np.zeros(m)
        slack_lb = []
        slack_ub = []
        row_slacks = np.full(m, -1, dtype=int)
        k = nvar
        for i, con in enumerate(rows):
            for v, coef in con.expr.terms.items():
                A[i, v.index] += coef
            b[i] = con.rhs
            if con.sense == "<=":
                A[i, k] = 1.0
                slack_lb.append(0.0)
                slack_ub.append(np.inf)
                row_slacks[i] = k
                k += 1
            elif con.sense == ">=":
                A[i, k] = 1.0
                slack_lb.append(-np.inf)
                slack_ub.append(0.0)
                row_slacks[i] = k
                k += 1
        self.row_slacks = row_slacks
        self.A = A
        self.b = b
        self.nvar = nvar
        self.senses = [con.sense for con in rows]
        c = np.zeros(nvar + n_slack)
        for v, coef in model.objective.terms.items():
            c[v.index] += coef
        self.c = c
        self.obj_const = model.objective.constant
        self.lb = np.concatenate([np.asarray(model.lb, float), np.array(slack_lb)])
        self.ub = np.concatenate([np.asarray(model.ub, float), np.array(slack_ub)])
        self.binary_cols = np.array(
            [v.index for v in model.variables if v.kind == "binary"], dtype=int)
        self.row_scale = np.maximum(1.0, np.abs(A[:, :nvar]).sum(axis=1)) if m else None

    def solve_node(self, fixed: dict[int, float]):
        lb = self.lb.copy()
        ub = self.ub.copy()
        for j, val in fixed.items():
            lb[j] = val
            ub[j] = val
        sol = solve_lp(self.A, self.b, self.c, lb, ub,
                       row_slacks=self.row_slacks)
        if sol.status == simplex.OPTIMAL:
            sol.objective += self.obj_const
        return sol

    def residuals(self, x: np.ndarray) -> float:
        """Max row-scaled constraint violation of a structural point."""
        if len(self.b) == 0:
            return 0.0
        ax = self.A[:, :self.nvar] @ x
        viol = np.empty(len(self.b))
        for i, sense in enumerate(self.senses):
            if sense == "=":
                viol[i] = abs(ax[i] - self.b[i])
            elif sense == "<=":
                viol[i] = max(0.0, ax[i] - self.b[i])
            else:
                viol[i] = max(0.0, self.b[i] - ax[i])
        return float(np.max(viol / self.row_scale))


def solve_lp_relaxation(model: MilpModel) -> SolveResult:
    """Exact LP optimum of the model with integrality dropped.

    The simplex certifies dual feasibility at 1e-8 (relative to the largest
    objective coefficient) before returning; a failure raises SimplexFailure.
    """
    t0 = time.perf_counter()
    arr = _Arrays(model)
    sol = arr.solve_node({})
    wall = time.perf_counter() - t0
    work = sol.pivots * WORK_PER_PIVOT
    if sol.status == simplex.INFEASIBLE:
        return SolveResult("infeasible", solve_seconds=wall, work_units=work)
    if sol.status == simplex.UNBOUNDED:
        return SolveResult("unbounded", solve_seconds=wall, work_units=work)
    values = {v: float(sol.x[v.index]) for v in model.variables}
    return SolveResult("optimal", objective=float(sol.objective),
                       best_bound=float(sol.objective), values=values,
                       gap_achieved=0.0, solve_seconds=wall,
                       work_units=work, nodes=1)


class _Node:
    __slots__ = ("bound", "node_id", "fixed")

    def __init__(self, bound, node_id, fixed):
        self.bound = bound
        self.node_id = node_id
        self.fixed = fixed

    def __lt__(self, other):
        # best bound first; newest node (deepest dive) breaks ties
        if self.bound != other.bound:
            return self.bound < other.bound
        return self.node_id > other.node_id


def _fractional(x, binary_cols):
    """Index of the most fractional binary column, or -1 if all integral."""
    if binary_cols.size == 0:
        return -1
    vals = x[binary_cols]
    frac = np.abs(vals - np.round(vals))
    if frac.max(initial=0.0) <= INT_TOL:
        return -1
    # closest to 0.5 wins; clean binaries are kept out of the argmin
    score = np.abs(frac - 0.5)
    score[frac <= INT_TOL] = np.inf
    pick = int(np.argmin(score))          # first minimum = smallest index
    return int(binary_cols[pick])


def solve(model: MilpModel, options: SolveOptions | None = None) -> SolveResult:
    """Branch-and-bound solve of a minimization MILP.

    Status semantics: `optimal` when the relative gap closed to
    options.rel_mipgap; `feasible_gap_unmet` when the time limit struck with
    an incumbent; `infeasible`/`unbounded` from the root relaxation. A time
    limit with no incumbent raises :class:`TimeLimitNoIncumbentError`.
    """
    options = options or SolveOptions()
    options.validate()
    t0 = time.perf_counter()
    arr = _Arrays(model)
    total_pivots = 0
    nodes_solved = 0

    root = arr.solve_node({})
    total_pivots += root.pivots
    nodes_solved += 1
    if root.status in (simplex.INFEASIBLE, simplex.UNBOUNDED):
        status = "infeasible" if root.status == simplex.INFEASIBLE else "unbounded"
        return SolveResult(status, solve_seconds=time.perf_counter() - t0,
                           work_units=total_pivots * WORK_PER_PIVOT, nodes=1)

    incumbent_x = None
    incumbent_obj = math.inf
    heap: list[_Node] = []
    heapq.heappush(heap, _Node(root.objective, 0, {}))
    root_sol = root
    next_id = 0
    best_bound = root.objective

    def gap_of(obj, bound):
        return (obj - bound) / max(1.0, abs(obj))

    def prune_level():
        return incumbent_obj - 1e-9 * max(1.0, abs(incumbent_obj))

    timed_out = False
    while heap:
        best_bound = heap[0].bound
        if incumbent_x is not None and \
                gap_of(incumbent_obj, best_bound) <= options.rel_mipgap + 1e-12:
            break
        if time.perf_counter() - t0 > options.time_limit:
            timed_out = True
            break
        node = heapq.heappop(heap)
        if node.bound >= prune_level():
            continue
        if node.node_id == 0 and root_sol is not None:
            sol, root_sol = root_sol, None
        else:
            sol = arr.solve_node(node.fixed)
            total_pivots += sol.pivots
            nodes_solved += 1
            if sol.status != simplex.OPTIMAL or sol.objective >= prune_level():
                continue
        branch_col = _fractional(sol.x, arr.binary_cols)
        if branch_col < 0:
            if sol.objective < incumbent_obj:
                incumbent_obj = sol.objective
                incumbent_x = sol.x.copy()
            continue
        # push the preferred rounding last so the dive explores it first
        frac_val = sol.x[branch_col]
        for fix_val in ((1.0, 0.0) if frac_val < 0.5 else (0.0, 1.0)):
            next_id += 1
            fixed = dict(node.fixed)
            fixed[branch_col] = fix_val
            heapq.heappush(heap, _Node(sol.objective, next_id, fixed))

    if not heap:
        best_bound = incumbent_obj

    wall = time.perf_counter() - t0
    work = total_pivots * WORK_PER_PIVOT
    if incumbent_x is None:
        if timed_out:
            raise TimeLimitNoIncumbentError(
                f"time limit {options.time_limit}s hit with no incumbent")
        return SolveResult("infeasible", solve_seconds=wall, work_units=work,
                           nodes=nodes_solved)

    best_bound = min(best_bound, incumbent_obj)
    gap = gap_of(incumbent_obj, best_bound)
    status = "optimal" if gap <= options.rel_mipgap + 1e-12 else "feasible_gap_unmet"
    values = {v: float(incumbent_x[v.index]) for v in model.variables}

    resid = arr.residuals(incumbent_x[:arr.nvar])
    if resid > FEAS_CHECK_TOL:
        raise SimplexFailure(
            f"incumbent violates constraints (scaled residual {resid:.2e})")

    return SolveResult(status, objective=float(incumbent_obj),
                       best_bound=float(best_bound), values=values,
                       gap_achieved=float(gap), solve_seconds=wall,
                       work_units=work, nodes=nodes_solved)
