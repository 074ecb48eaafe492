"""Dense bounded-variable primal simplex.

Standard form used internally: minimize c'x subject to Ax = b with per-column
bounds lb <= x <= ub (infinities allowed, free columns sit nonbasic at 0).
Inequality rows are converted by the caller into slack columns whose bounds
encode the sense; passing `row_slacks` lets the solver crash-start from those
slacks so artificial columns are only created for rows whose residual the
slack cannot absorb (equality rows, mostly).

Numerics: dense tableau (B^-1 A) updated in place by BLAS rank-1 pivots,
Dantzig pricing with a Bland's-rule fallback after a degeneracy stall, and
refactorization from the original columns at each phase end plus an
optimality recheck loop, so the returned point satisfies primal feasibility
at 1e-9 scale and dual feasibility at 1e-8.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg.blas import dger

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

PIVOT_TOL = 1e-9         # reject smaller pivot elements
COST_TOL = 1e-9          # reduced-cost eligibility threshold during iteration
DUAL_TOL = 1e-8          # final dual-feasibility requirement (relative)
FEAS_TOL = 1e-7          # phase-1 residual considered infeasible above this
STALL_LIMIT = 60         # degenerate pivots before switching to Bland's rule
REFRESH_EVERY = 2000     # periodic refactorization interval (pivots)


class SimplexFailure(Exception):
    """Iteration or numerical budget exhausted without a clean optimum."""


class LpSolution:
    __slots__ = ("status", "x", "objective", "duals", "pivots")

    def __init__(self, status, x=None, objective=np.nan, duals=None, pivots=0):
        self.status = status
        self.x = x
        self.objective = objective
        self.duals = duals
        self.pivots = pivots


def solve_lp(A, b, c, lb, ub, row_slacks=None, max_pivots=200000):
    """Solve min c'x, Ax = b, lb <= x <= ub. Returns an :class:`LpSolution`.

    `row_slacks[i]` may name the slack column of row i (-1 when none); it is
    an optimization hint only and never changes the answer.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    m, n = A.shape

    if m == 0:
        x = np.where(c > 0, lb, np.where(c < 0, ub, _nearest_zero(lb, ub)))
        if np.any(~np.isfinite(x) & (c != 0)):
            return LpSolution(UNBOUNDED)
        x = np.where(np.isfinite(x), x, 0.0)
        return LpSolution(OPTIMAL, x, float(c @ x), np.zeros(0), 0)

    worker = _Simplex(A, b, c, lb, ub, row_slacks, max_pivots)
    return worker.run()


def _nearest_zero(lb, ub):
    """Finite bound closest to zero per column; 0 for free columns."""
    lo = np.where(np.isfinite(lb), lb, np.nan)
    hi = np.where(np.isfinite(ub), ub, np.nan)
    pick_lo = np.abs(np.nan_to_num(lo, nan=np.inf)) <= np.abs(np.nan_to_num(hi, nan=np.inf))
    out = np.where(pick_lo, lo, hi)
    return np.where(np.isnan(out), 0.0, out)


class _Simplex:
    def __init__(self, A, b, c, lb, ub, row_slacks, max_pivots):
        m, n = A.shape
        self.m = m
        self.n_struct = n
        self.max_pivots = max_pivots
        self.pivots = 0
        self.orig_b = b

        x0 = _nearest_zero(lb, ub)
        resid = b - A @ x0

        # crash basis: use a row's slack when its bounds absorb the residual,
        # otherwise append a signed artificial column for that row
        basis = np.empty(m, dtype=int)
        xB = np.empty(m)
        art_rows = []
        if row_slacks is None:
            row_slacks = np.full(m, -1, dtype=int)
        for i in range(m):
            j = row_slacks[i]
            ok = False
            if j >= 0:
                val = x0[j] + resid[i]          # slack absorbs the residual
                if lb[j] - 1e-12 <= val <= ub[j] + 1e-12:
                    basis[i] = j
                    xB[i] = val
                    ok = True
            if not ok:
                art_rows.append(i)
        art_rows = np.array(art_rows, dtype=int)
        n_art = len(art_rows)
        art_cols = np.zeros((m, n_art))
        sign = np.where(resid[art_rows] >= 0, 1.0, -1.0)
        art_cols[art_rows, np.arange(n_art)] = sign
        for k, i in enumerate(art_rows):
            basis[i] = n + k
            xB[i] = abs(resid[i])

        self.A = np.asfortranarray(np.hstack([A, art_cols]))
        self.lb = np.concatenate([lb, np.zeros(n_art)])
        self.ub = np.concatenate([ub, np.full(n_art, np.inf)])
        self.cost2 = np.concatenate([c, np.zeros(n_art)])
        self.n_art = n_art

        self.basis = basis
        self.in_basis = np.zeros(n + n_art, dtype=bool)
        self.in_basis[self.basis] = True
        self.xN = np.concatenate([x0, np.zeros(n_art)])
        self.xB = xB

        # initial B is diagonal (+1 slacks, signed artificials)
        diag = np.ones(m)
        diag[art_rows] = sign
        self.T = np.asfortranarray(self.A * (1.0 / diag)[:, None])
        self._bound_masks()

    def _bound_masks(self):
        self.fin_lb = np.isfinite(self.lb)
        self.fin_ub = np.isfinite(self.ub)
        self.free_col = ~self.fin_lb & ~self.fin_ub
        self.fixed_col = self.fin_lb & self.fin_ub & (self.ub - self.lb <= 1e-30)
        self.lb0 = np.where(self.fin_lb, self.lb, 0.0)

    # -- helpers -----------------------------------------------------------

    def _recompute_z(self, cost):
        return cost - cost[self.basis] @ self.T

    def _full_x(self):
        x = self.xN.copy()
        x[self.basis] = self.xB
        return x

    def _refactor(self):
        """Rebuild tableau and basic values from original data (drift control)."""
        B = self.A[:, self.basis]
        nb_mask = ~self.in_basis
        rhs = self.orig_b - self.A[:, nb_mask] @ self.xN[nb_mask]
        try:
            out = np.linalg.solve(B, np.column_stack([self.A, rhs]))
        except np.linalg.LinAlgError:
            raise SimplexFailure("singular basis during refactorization")
        self.T = np.asfortranarray(out[:, :-1])
        self.xB = out[:, -1]

    def _drop_nonbasic_artificials(self):
        """Shrink the working arrays to structural + still-basic artificials."""
        n = self.n_struct
        keep = np.ones(n + self.n_art, dtype=bool)
        keep[n:] = self.in_basis[n:]
        if keep.all():
            return
        remap = np.cumsum(keep) - 1
        self.A = np.asfortranarray(self.A[:, keep])
        self.T = np.asfortranarray(self.T[:, keep])
        self.lb = self.lb[keep]
        self.ub = self.ub[keep]
        self.cost2 = self.cost2[keep]
        self.xN = self.xN[keep]
        self.in_basis = self.in_basis[keep]
        self.basis = remap[self.basis]
        self.n_art = int(keep[n:].sum())
        self._bound_masks()

    # -- core loop -----------------------------------------------------------

    def _iterate(self, cost, allow_unbounded):
        """Run pivots until no eligible entering column. Returns status string."""
        z = self._recompute_z(cost)
        stall = 0
        bland = False
        since_refresh = 0
        nb = ~self.in_basis

        while True:
            if self.pivots >= self.max_pivots:
                raise SimplexFailure(f"pivot budget {self.max_pivots} exhausted")

            at_lower = self.fin_lb & (np.abs(self.xN - self.lb0) <= 1e-11)
            movable = nb & ~self.fixed_col
            can_up = movable & (z < -COST_TOL) & (at_lower | self.free_col)
            can_dn = movable & (z > COST_TOL) & ((self.fin_ub & ~at_lower)
                                                 | self.free_col)
            eligible = can_up | can_dn
            if not eligible.any():
                return OPTIMAL

            idx = np.nonzero(eligible)[0]
            if bland:
                q = int(idx[0])
            else:
                q = int(idx[np.argmax(np.abs(z[idx]))])
            direction = 1.0 if can_up[q] else -1.0

            d = self.T[:, q] * direction          # xB changes by -d * step
            lo_q, hi_q = self.lb[q], self.ub[q]
            step_own = hi_q - lo_q if np.isfinite(hi_q) and np.isfinite(lo_q) \
                else np.inf

            lbB = self.lb[self.basis]
            ubB = self.ub[self.basis]
            dec = d > PIVOT_TOL
            inc = d < -PIVOT_TOL
            ratios = np.full(self.m, np.inf)
            dec &= np.isfinite(lbB)
            inc &= np.isfinite(ubB)
            ratios[dec] = (self.xB[dec] - lbB[dec]) / d[dec]
            ratios[inc] = (self.xB[inc] - ubB[inc]) / d[inc]
            np.maximum(ratios, 0.0, out=ratios)

            min_row_ratio = ratios.min() if self.m else np.inf
            step = min(step_own, min_row_ratio)

            if not np.isfinite(step):
                if allow_unbounded:
                    return UNBOUNDED
                raise SimplexFailure("phase-1 subproblem reported unbounded")

            if step_own <= min_row_ratio and np.isfinite(step_own):
                # bound flip: entering column moves to its other bound
                self.xB -= d * step_own
                self.xN[q] = hi_q if direction > 0 else lo_q
                stall = 0
                continue

            cand = np.nonzero(ratios <= step + 1e-12)[0]
            if bland:
                r = int(cand[np.argmin(self.basis[cand])])
            else:
                r = int(cand[np.argmax(np.abs(d[cand]))])

            # pivot: q enters, basis[r] leaves at the bound it hit
            leaving = self.basis[r]
            self.xB -= d * step
            enter_val = self.xN[q] + direction * step
            self.xN[leaving] = lbB[r] if d[r] > 0 else ubB[r]
            piv = self.T[r, q]
            row = self.T[r, :] / piv
            col = self.T[:, q].copy()
            col[r] -= piv                       # zero the pivot row's update
            self.T = dger(-1.0, col, row, a=self.T, overwrite_a=True)
            self.T[r, :] = row
            self.xB[r] = enter_val
            zq = z[q]
            if zq != 0.0:
                z -= zq * row
                z[q] = 0.0
            self.basis[r] = q
            self.in_basis[leaving] = False
            self.in_basis[q] = True
            nb[leaving] = True
            nb[q] = False
            self.pivots += 1
            since_refresh += 1

            if step <= 1e-10:
                stall += 1
                if stall >= STALL_LIMIT:
                    bland = True
            else:
                stall = 0
                bland = False

            if since_refresh >= REFRESH_EVERY:
                self._refactor()
                z = self._recompute_z(cost)
                since_refresh = 0

    # -- driver ------------------------------------------------------------

    def run(self):
        m, n = self.m, self.n_struct

        if self.n_art:
            cost1 = np.concatenate([np.zeros(n), np.ones(self.n_art)])
            self._iterate(cost1, allow_unbounded=False)
            self._refactor()
            art_basic = self.basis >= n
            infeas = float(np.abs(self.xB[art_basic]).sum()) if art_basic.any() else 0.0
            if infeas > FEAS_TOL:
                return LpSolution(INFEASIBLE, pivots=self.pivots)
            self._pivot_out_artificials()
            self._drop_nonbasic_artificials()
            # surviving artificials cover redundant rows; lock them at zero
            self.ub[n:] = 0.0
            self.xN[n:] = 0.0
            self._bound_masks()
        else:
            # crash start is feasible; verify and go straight to phase 2
            self._refactor()
            if np.any(self.xB < self.lb[self.basis] - FEAS_TOL) or \
                    np.any(self.xB > self.ub[self.basis] + FEAS_TOL):
                raise SimplexFailure("crash basis lost feasibility")

        status = OPTIMAL
        for _ in range(8):
            status = self._iterate(self.cost2, allow_unbounded=True)
            if status == UNBOUNDED:
                return LpSolution(UNBOUNDED, pivots=self.pivots)
            self._refactor()
            z = self._recompute_z(self.cost2)
            if self._dual_feasible(z):
                break
        else:
            raise SimplexFailure("optimality not certified after recheck rounds")

        x = self._full_x()[:n]
        obj = float(self.cost2[:n] @ x)
        duals = self._duals()
        return LpSolution(OPTIMAL, x, obj, duals, self.pivots)

    def _pivot_out_artificials(self):
        """Replace basic artificials (value ~0) by structural columns when possible."""
        n = self.n_struct
        changed = False
        for r in range(self.m):
            if self.basis[r] < n:
                continue
            row = self.T[r, :n]
            cand = np.nonzero(~self.in_basis[:n] & (np.abs(row) > 1e-7))[0]
            if cand.size == 0:
                continue  # redundant row; artificial stays basic, locked at 0
            q = int(cand[np.argmax(np.abs(row[cand]))])
            piv = self.T[r, q]
            leaving = self.basis[r]
            nrow = self.T[r, :] / piv
            col = self.T[:, q].copy()
            col[r] -= piv
            self.T = dger(-1.0, col, nrow, a=self.T, overwrite_a=True)
            self.T[r, :] = nrow
            self.basis[r] = q
            self.in_basis[leaving] = False
            self.in_basis[q] = True
            self.xN[leaving] = 0.0
            self.xB[r] = self.xN[q]  # degenerate swap: entering keeps its value
            self.pivots += 1
            changed = True
        if changed:
            self._refactor()

    def _dual_feasible(self, z) -> bool:
        nb = ~self.in_basis
        at_lower = self.fin_lb & (np.abs(self.xN - self.lb0) <= 1e-11)
        movable = nb & ~self.fixed_col
        scale = max(1.0, float(np.abs(self.cost2).max()))
        tol = DUAL_TOL * scale
        if np.any(z[movable & at_lower] < -tol):
            return False
        if np.any(z[movable & self.fin_ub & ~at_lower] > tol):
            return False
        if np.any(np.abs(z[movable & self.free_col]) > tol):
            return False
        return True

    def _duals(self):
        B = self.A[:, self.basis]
        return np.linalg.solve(B.T, self.cost2[self.basis])
