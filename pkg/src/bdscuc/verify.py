"""Independent post-solve verification.

Everything here re-derives its arithmetic from raw schedule values and case
data, sharing no expression objects with the model builders: a feasibility
audit over every constraint family, a forward-pass recomputation of the
degradation cost (the parity check against the embedded network), and an
exhaustive commitment-enumeration oracle for desk-scale optimality checks.
The oracle's per-assignment LPs run on scipy's HiGHS backend, a different
numerical kernel from the package's own simplex, so the two routes to an
optimum stay independent end to end.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .degradation import DegradationNet, FeatureVector, forward
from .formulation import Schedule, degradation_cost_coefficient
from .grid import GridCase

AUDIT_TOL = 1e-6
PARITY_TOL = 1e-5
ENUMERATION_BUDGET = 24    # max commitment/mode binaries: T*(2|G| + 2|S|)


@dataclass
class AuditViolation:
    family: str
    indices: tuple
    residual: float


@dataclass
class AuditReport:
    violations: list[AuditViolation] = field(default_factory=list)
    max_residual: float = 0.0
    tolerance: float = AUDIT_TOL

    @property
    def ok(self) -> bool:
        return self.max_residual <= self.tolerance

    def families(self) -> set[str]:
        return {v.family for v in self.violations}


@dataclass
class ParityReport:
    milp_degradation_cost: float
    recomputed_cost: float
    relative_difference: float
    tolerance: float = PARITY_TOL

    @property
    def ok(self) -> bool:
        return self.relative_difference <= self.tolerance


@dataclass
class RecomputedDegradation:
    cost: float
    per_unit_soh_loss: np.ndarray          # (S, T) forward-pass outputs
    out_of_box: list[tuple[int, int, str]]  # (storage, period, feature) flags


class BudgetExceededError(Exception):
    """The case needs more binaries than the enumeration oracle allows."""


class InfeasibleCaseError(Exception):
    """Every commitment/mode assignment was LP-infeasible."""


def audit_feasibility(schedule: Schedule, case: GridCase) -> AuditReport:
    """Recheck every constraint family from raw values at 1e-6."""
    T = case.horizon.periods
    dt = case.horizon.dt
    nG, nK = len(case.generators), len(case.lines)
    nS, nR = len(case.storage), len(case.renewables)
    if schedule.gen_p.shape != (nG, T):
        raise ValueError("schedule dimensions do not match the case")

    report = AuditReport()

    def flag(family, indices, residual):
        residual = float(residual)
        if residual > report.tolerance:
            report.violations.append(AuditViolation(family, indices, residual))
        report.max_residual = max(report.max_residual, residual)

    bus_pos = {bus: i for i, bus in enumerate(case.buses)}

    # nodal balance
    for t in range(T):
        for bus in case.buses:
            acc = -case.demand_at(bus, t)
            for g, gen in enumerate(case.generators):
                if gen.bus == bus:
                    acc += schedule.gen_p[g, t]
            for r, prof in enumerate(case.renewables):
                if prof.bus == bus:
                    acc += schedule.renewable[r, t]
            for k, line in enumerate(case.lines):
                if line.to_bus == bus:
                    acc += schedule.flow[k, t]
                if line.from_bus == bus:
                    acc -= schedule.flow[k, t]
            for s, st in enumerate(case.storage):
                if st.bus == bus:
                    acc += schedule.st_disc[s, t] - schedule.st_char[s, t]
            if schedule.shed is not None:
                acc += schedule.shed[bus_pos[bus], t]
            flag("nodal_balance", (bus, t), abs(acc))

    # generator families
    for g, gen in enumerate(case.generators):
        u_prev = 1.0 if gen.initial_on else 0.0
        p_prev = gen.initial_output
        for t in range(T):
            p, u, v = (schedule.gen_p[g, t], schedule.gen_on[g, t],
                       schedule.gen_start[g, t])
            flag("gen_limits", (g, t), max(p - gen.p_max * u,
                                           gen.p_min * u - p, 0.0))
            flag("ramp", (g, t), max(abs(p - p_prev) - dt * gen.ramp, 0.0))
            resid = max(u - u_prev - v,          # startup must cover the jump
                        v - u,                   # no startup while off
                        0.0)
            if t > 0:
                resid = max(resid, v + u_prev - 1.0)   # no restart while on
            flag("startup", (g, t), resid)
            u_prev, p_prev = u, p

    # network families
    for k, line in enumerate(case.lines):
        for t in range(T):
            f = schedule.flow[k, t]
            flag("flow_bounds", (k, t), max(abs(f) - line.limit, 0.0))
            th_n = schedule.theta[bus_pos[line.from_bus], t]
            th_m = schedule.theta[bus_pos[line.to_bus], t]
            flag("flow_physics", (k, t),
                 abs(f - line.susceptance * (th_n - th_m)))

    # renewable dispatch
    for r, prof in enumerate(case.renewables):
        for t in range(T):
            pr = schedule.renewable[r, t]
            flag("renewable_bounds", (r, t),
                 max(pr - prof.available[t], -pr, 0.0))

    # storage families
    for s, st in enumerate(case.storage):
        e_prev = st.e_initial
        for t in range(T):
            pd, pc = schedule.st_disc[s, t], schedule.st_char[s, t]
            ud, uc = schedule.st_udisc[s, t], schedule.st_uchar[s, t]
            e, soc = schedule.st_energy[s, t], schedule.st_soc[s, t]
            flag("storage_power", (s, t), max(
                pd - st.p_max * ud, st.p_min * ud - pd,
                pc - st.p_max * uc, st.p_min * uc - pc, 0.0))
            flag("mode_exclusivity", (s, t), max(ud + uc - 1.0, ud * uc, 0.0))
            flag("energy_update", (s, t), abs(
                e - e_prev + dt * (pd / st.eff_discharge - pc * st.eff_charge)))
            flag("soc_link", (s, t), abs(soc - e / st.e_max))
            flag("energy_bounds", (s, t), max(e - st.e_max, st.e_min - e, 0.0))
            e_prev = e
        flag("terminal_soc", (s,), abs(schedule.st_energy[s, T - 1] - st.e_initial))

    return report


def _snap(value: float, lo: float, hi: float, tol: float = AUDIT_TOL) -> float:
    """Pull solver noise within `tol` back onto the domain edge."""
    if lo - tol <= value < lo:
        return lo
    if hi < value <= hi + tol:
        return hi
    return value


def schedule_features(schedule: Schedule, case: GridCase, s: int, t: int
                      ) -> FeatureVector:
    """Numeric degradation features of unit s in period t (same wiring as the
    embedded network, recomputed from raw schedule values)."""
    st = case.storage[s]
    dt = case.horizon.dt
    e_prev = st.e_initial if t == 0 else float(schedule.st_energy[s, t - 1])
    e_now = float(schedule.st_energy[s, t])
    pd, pc = float(schedule.st_disc[s, t]), float(schedule.st_char[s, t])
    return FeatureVector(
        temp=st.ambient_temp,
        c_rate=_snap((pd + pc) / st.e_max, 0.0, math.inf),
        soc=_snap((e_prev + e_now) / (2.0 * st.e_max), 0.0, 1.0),
        dod=_snap(dt * (pd / st.eff_discharge + pc * st.eff_charge) / st.e_max,
                  0.0, 1.0),
        soh=st.soh_initial)


def recompute_degradation_cost(schedule: Schedule, case: GridCase,
                               net: DegradationNet) -> RecomputedDegradation:
    """Ex-post degradation cost: forward passes over the solved profile.

    Features outside the net's training box (with the same slack the model
    builder allows for min-max fit shrinkage) are flagged but still scored.
    """
    from .embedding import CONTAINMENT_SLACK

    T = case.horizon.periods
    nS = len(case.storage)
    losses = np.zeros((nS, T))
    out_of_box = []
    t_lo, t_hi = net.training_box()
    slack = CONTAINMENT_SLACK * net.scaler_scale
    names = ("temp", "c_rate", "soc", "dod", "soh")
    cost = 0.0
    for s, st in enumerate(case.storage):
        coeff = degradation_cost_coefficient(st)
        for t in range(T):
            fv = schedule_features(schedule, case, s, t)
            arr = fv.as_array()
            for j, nm in enumerate(names):
                if arr[j] < t_lo[j] - slack[j] or arr[j] > t_hi[j] + slack[j]:
                    out_of_box.append((s, t, nm))
            losses[s, t] = forward(net, fv)
        cost += coeff * float(losses[s].sum())
    return RecomputedDegradation(cost=cost, per_unit_soh_loss=losses,
                                 out_of_box=out_of_box)


def verify_parity(milp_cost: float, recomputed_cost: float) -> ParityReport:
    """Compare the solver's degradation term against the forward-pass value."""
    if milp_cost < 0 or recomputed_cost < 0:
        raise ValueError("degradation costs must be nonnegative")
    rel = abs(milp_cost - recomputed_cost) / max(1.0, abs(recomputed_cost))
    return ParityReport(milp_degradation_cost=milp_cost,
                        recomputed_cost=recomputed_cost,
                        relative_difference=rel)


# --- exhaustive optimality oracle ----------------------------------------------

class _OracleLp:
    """Constant LP skeleton; commitment/mode assignments only move bounds."""

    def __init__(self, case: GridCase):
        self.case = case
        T = case.horizon.periods
        dt = case.horizon.dt
        nG, nK = len(case.generators), len(case.lines)
        nR, nS, nN = len(case.renewables), len(case.storage), len(case.buses)

        # column layout
        ofs = 0
        def block(count):
            nonlocal ofs
            start = ofs
            ofs += count
            return start
        self.o_p = block(nG * T)
        self.o_pr = block(nR * T)
        self.o_f = block(nK * T)
        self.o_th = block(nN * T)
        self.o_pd = block(nS * T)
        self.o_pc = block(nS * T)
        self.o_e = block(nS * T)
        self.ncols = ofs
        self.T, self.dt = T, dt
        self.nG, self.nK, self.nR, self.nS, self.nN = nG, nK, nR, nS, nN
        bus_pos = {bus: i for i, bus in enumerate(case.buses)}

        def p(g, t): return self.o_p + g * T + t
        def pr(r, t): return self.o_pr + r * T + t
        def f(k, t): return self.o_f + k * T + t
        def th(n, t): return self.o_th + n * T + t
        def pd(s, t): return self.o_pd + s * T + t
        def pc(s, t): return self.o_pc + s * T + t
        def e(s, t): return self.o_e + s * T + t
        self._p, self._pd, self._pc, self._e = p, pd, pc, e

        eq_rows, eq_rhs = [], []
        ub_rows, ub_rhs = [], []

        def eq(cols_coefs, rhs):
            row = np.zeros(self.ncols)
            for col, coef in cols_coefs:
                row[col] += coef
            eq_rows.append(row)
            eq_rhs.append(rhs)

        def leq(cols_coefs, rhs):
            row = np.zeros(self.ncols)
            for col, coef in cols_coefs:
                row[col] += coef
            ub_rows.append(row)
            ub_rhs.append(rhs)

        for t in range(T):
            for bus in case.buses:
                terms = []
                for g, gen in enumerate(case.generators):
                    if gen.bus == bus:
                        terms.append((p(g, t), 1.0))
                for r, prof in enumerate(case.renewables):
                    if prof.bus == bus:
                        terms.append((pr(r, t), 1.0))
                for k, line in enumerate(case.lines):
                    if line.to_bus == bus:
                        terms.append((f(k, t), 1.0))
                    if line.from_bus == bus:
                        terms.append((f(k, t), -1.0))
                for s, st in enumerate(case.storage):
                    if st.bus == bus:
                        terms.append((pd(s, t), 1.0))
                        terms.append((pc(s, t), -1.0))
                eq(terms, case.demand_at(bus, t))
            for k, line in enumerate(case.lines):
                eq([(f(k, t), 1.0),
                    (th(bus_pos[line.from_bus], t), -line.susceptance),
                    (th(bus_pos[line.to_bus], t), line.susceptance)], 0.0)

        for g, gen in enumerate(case.generators):
            ramp = dt * gen.ramp
            for t in range(T):
                if t == 0:
                    leq([(p(g, 0), 1.0)], gen.initial_output + ramp)
                    leq([(p(g, 0), -1.0)], ramp - gen.initial_output)
                else:
                    leq([(p(g, t), 1.0), (p(g, t - 1), -1.0)], ramp)
                    leq([(p(g, t - 1), 1.0), (p(g, t), -1.0)], ramp)

        for s, st in enumerate(case.storage):
            for t in range(T):
                terms = [(e(s, t), 1.0),
                         (pd(s, t), dt / st.eff_discharge),
                         (pc(s, t), -dt * st.eff_charge)]
                if t == 0:
                    eq(terms, st.e_initial)
                else:
                    eq(terms + [(e(s, t - 1), -1.0)], 0.0)
            eq([(e(s, T - 1), 1.0)], st.e_initial)

        self.A_eq = np.array(eq_rows) if eq_rows else None
        self.b_eq = np.array(eq_rhs) if eq_rhs else None
        self.A_ub = np.array(ub_rows) if ub_rows else None
        self.b_ub = np.array(ub_rhs) if ub_rhs else None

        # bound templates and objective
        self.lb = np.zeros(self.ncols)
        self.ub = np.zeros(self.ncols)
        for r, prof in enumerate(case.renewables):
            for t in range(T):
                self.ub[pr(r, t)] = prof.available[t]
        for k, line in enumerate(case.lines):
            for t in range(T):
                self.lb[f(k, t)] = -line.limit
                self.ub[f(k, t)] = line.limit
        for i, bus in enumerate(case.buses):
            for t in range(T):
                if bus == case.reference_bus:
                    self.lb[th(i, t)] = self.ub[th(i, t)] = 0.0
                else:
                    self.lb[th(i, t)] = -np.inf
                    self.ub[th(i, t)] = np.inf
        for s, st in enumerate(case.storage):
            for t in range(T):
                self.lb[e(s, t)] = st.e_min
                self.ub[e(s, t)] = st.e_max

        self.c = np.zeros(self.ncols)
        for g, gen in enumerate(case.generators):
            for t in range(T):
                self.c[p(g, t)] = dt * gen.cost_linear

    def solve(self, commit: np.ndarray, modes: np.ndarray):
        """LP value for one commitment (G,T in {0,1}) and mode matrix
        (S,T in {0: idle, 1: charge, 2: discharge}); returns cost or None."""
        case, T = self.case, self.T
        lb = self.lb.copy()
        ub = self.ub.copy()
        const = 0.0
        for g, gen in enumerate(case.generators):
            u_prev = 1.0 if gen.initial_on else 0.0
            for t in range(T):
                u = commit[g, t]
                lb[self._p(g, t)] = gen.p_min * u
                ub[self._p(g, t)] = gen.p_max * u
                v = max(0.0, u - u_prev)
                const += self.dt * gen.cost_noload * u + gen.cost_startup * v
                u_prev = u
        for s, st in enumerate(case.storage):
            for t in range(T):
                mode = modes[s, t]
                if mode == 2:
                    lb[self._pd(s, t)] = st.p_min
                    ub[self._pd(s, t)] = st.p_max
                else:
                    lb[self._pd(s, t)] = ub[self._pd(s, t)] = 0.0
                if mode == 1:
                    lb[self._pc(s, t)] = st.p_min
                    ub[self._pc(s, t)] = st.p_max
                else:
                    lb[self._pc(s, t)] = ub[self._pc(s, t)] = 0.0
        res = linprog(self.c, A_ub=self.A_ub, b_ub=self.b_ub,
                      A_eq=self.A_eq, b_eq=self.b_eq,
                      bounds=np.column_stack([lb, ub]), method="highs")
        if res.status != 0:
            return None
        return float(res.fun) + const


def brute_force_reference(case: GridCase) -> float:
    """Exhaustive T-SCUC optimum: enumerate commitments and storage modes,
    derive startups from the off-to-on transitions, solve an LP per leaf.

    Infeasible commitment patterns are pre-pruned with an aggregate
    capacity check (total committable power + renewables + discharge versus
    load per period), which never excludes a feasible assignment.
    """
    T = case.horizon.periods
    nG, nS = len(case.generators), len(case.storage)
    n_binaries = T * (2 * nG + 2 * nS)
    if n_binaries > ENUMERATION_BUDGET:
        raise BudgetExceededError(
            f"case needs {n_binaries} binaries, budget is {ENUMERATION_BUDGET}")

    lp = _OracleLp(case)
    load_total = np.array([sum(p.demand[t] for p in case.loads)
                           for t in range(T)])
    wind_total = np.array([sum(p.available[t] for p in case.renewables)
                           for t in range(T)])
    disc_total = sum(st.p_max for st in case.storage)

    best = math.inf
    feasible_found = False

    commit_patterns = list(itertools.product([0.0, 1.0], repeat=nG * T))
    mode_patterns = list(itertools.product([0, 1, 2], repeat=nS * T))

    for flat_commit in commit_patterns:
        commit = np.array(flat_commit).reshape(nG, T)
        cap = np.array([sum(case.generators[g].p_max * commit[g, t]
                            for g in range(nG)) for t in range(T)])
        if np.any(cap + wind_total + disc_total < load_total - 1e-9):
            continue
        for flat_modes in mode_patterns:
            modes = np.array(flat_modes, dtype=int).reshape(nS, T)
            val = lp.solve(commit, modes)
            if val is None:
                continue
            feasible_found = True
            if val < best:
                best = val
    if not feasible_found:
        raise InfeasibleCaseError("no commitment/mode assignment is feasible")
    return best
