"""Compilation of a GridCase into the day-ahead unit-commitment MILP.

The traditional model (no degradation term) covers: fuel objective, nodal
balance, generator limits/ramping/startup logic, DC power flow with explicit
line-flow variables, and storage power/energy/SOC dynamics with mode
exclusivity and an end-of-day energy restoration constraint.

Sign conventions: line flow is positive from `from_bus` to `to_bus` and equals
susceptance * (theta_from - theta_to); the reference-bus angle is fixed at 0.
Susceptance is in MW/rad so flows come out directly in MW.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import GridCase, validate_case, CaseValidationError
from .milp.model import MilpModel, VarId, LinExpr, SolveResult

SHED_PENALTY = 1e6           # $/MWh on the optional load-shedding slack
BINARY_ROUND_TOL = 1e-6


class ExtractionError(Exception):
    """A solver value violated integrality beyond tolerance."""


@dataclass
class VariableIndex:
    """Maps model variables back to case entities (indices are 0-based)."""
    p: dict = field(default_factory=dict)        # (g, t) -> VarId
    on: dict = field(default_factory=dict)       # (g, t) -> VarId (commitment)
    start: dict = field(default_factory=dict)    # (g, t) -> VarId (startup)
    flow: dict = field(default_factory=dict)     # (k, t) -> VarId
    theta: dict = field(default_factory=dict)    # (bus, t) -> VarId
    renewable: dict = field(default_factory=dict)  # (r, t) -> VarId
    p_disc: dict = field(default_factory=dict)   # (s, t) -> VarId
    p_char: dict = field(default_factory=dict)   # (s, t) -> VarId
    u_disc: dict = field(default_factory=dict)   # (s, t) -> VarId
    u_char: dict = field(default_factory=dict)   # (s, t) -> VarId
    energy: dict = field(default_factory=dict)   # (s, t) -> VarId
    soc: dict = field(default_factory=dict)      # (s, t) -> VarId
    shed: dict = field(default_factory=dict)     # (bus, t) -> VarId, if enabled
    deg_output: dict = field(default_factory=dict)   # (s, t) -> VarId, L-BD only
    deg_coeff: dict = field(default_factory=dict)    # s -> $ per SOH fraction
    unstable_neurons: dict = field(default_factory=dict)  # s -> binaries per eval


@dataclass
class CostBreakdown:
    fuel: float
    degradation: float

    @property
    def total(self) -> float:
        return self.fuel + self.degradation


@dataclass
class Schedule:
    """Solved decision trajectory, arrays indexed [entity, period]."""
    gen_p: np.ndarray
    gen_on: np.ndarray
    gen_start: np.ndarray
    flow: np.ndarray
    theta: np.ndarray          # [bus position, t] following case.buses order
    renewable: np.ndarray
    st_disc: np.ndarray
    st_char: np.ndarray
    st_udisc: np.ndarray
    st_uchar: np.ndarray
    st_energy: np.ndarray
    st_soc: np.ndarray
    shed: np.ndarray | None
    deg_output: np.ndarray | None   # solver-side degradation per (s, t), L-BD only
    breakdown: CostBreakdown


def degradation_cost_coefficient(storage) -> float:
    """$ per unit of SOH-loss fraction: (capital - salvage) / (1 - soh_eol)."""
    return (storage.capital_cost - storage.salvage_value) / (1.0 - storage.soh_eol)


def build_tscuc(case: GridCase, allow_shedding: bool = False
                ) -> tuple[MilpModel, VariableIndex]:
    """Build the traditional (degradation-blind) unit-commitment MILP."""
    report = validate_case(case)
    if not report.ok:
        raise CaseValidationError(report)

    T = case.horizon.periods
    dt = case.horizon.dt
    model = MilpModel("tscuc")
    ix = VariableIndex()

    for t in range(T):
        tt = t + 1
        for g, gen in enumerate(case.generators):
            ix.p[g, t] = model.add_continuous(0.0, gen.p_max, f"p_{gen.id}_{tt}")
            ix.on[g, t] = model.add_binary(f"u_{gen.id}_{tt}")
            ix.start[g, t] = model.add_binary(f"v_{gen.id}_{tt}")
        for k, line in enumerate(case.lines):
            ix.flow[k, t] = model.add_continuous(-line.limit, line.limit,
                                                 f"f_{line.id}_{tt}")
        for bus in case.buses:
            if bus == case.reference_bus:
                ix.theta[bus, t] = model.add_continuous(0.0, 0.0, f"th_{bus}_{tt}")
            else:
                ix.theta[bus, t] = model.add_continuous(-np.inf, np.inf,
                                                        f"th_{bus}_{tt}")
        for r, prof in enumerate(case.renewables):
            ix.renewable[r, t] = model.add_continuous(0.0, prof.available[t],
                                                      f"pr_{prof.bus}_{tt}")
        for s, st in enumerate(case.storage):
            ix.p_disc[s, t] = model.add_continuous(0.0, st.p_max, f"pd_{st.id}_{tt}")
            ix.p_char[s, t] = model.add_continuous(0.0, st.p_max, f"pc_{st.id}_{tt}")
            ix.u_disc[s, t] = model.add_binary(f"ud_{st.id}_{tt}")
            ix.u_char[s, t] = model.add_binary(f"uc_{st.id}_{tt}")
            ix.energy[s, t] = model.add_continuous(st.e_min, st.e_max,
                                                   f"e_{st.id}_{tt}")
            ix.soc[s, t] = model.add_continuous(st.e_min / st.e_max, 1.0,
                                                f"soc_{st.id}_{tt}")
        if allow_shedding:
            for bus in case.buses:
                ix.shed[bus, t] = model.add_continuous(
                    0.0, case.demand_at(bus, t), f"shed_{bus}_{tt}")

    # nodal power balance
    for t in range(T):
        for bus in case.buses:
            expr = LinExpr()
            for g, gen in enumerate(case.generators):
                if gen.bus == bus:
                    expr.add_term(ix.p[g, t], 1.0)
            for r, prof in enumerate(case.renewables):
                if prof.bus == bus:
                    expr.add_term(ix.renewable[r, t], 1.0)
            for k, line in enumerate(case.lines):
                if line.to_bus == bus:
                    expr.add_term(ix.flow[k, t], 1.0)
                if line.from_bus == bus:
                    expr.add_term(ix.flow[k, t], -1.0)
            for s, st in enumerate(case.storage):
                if st.bus == bus:
                    expr.add_term(ix.p_disc[s, t], 1.0)
                    expr.add_term(ix.p_char[s, t], -1.0)
            if allow_shedding:
                expr.add_term(ix.shed[bus, t], 1.0)
            model.add_constraint(expr, "=", case.demand_at(bus, t),
                                 f"bal_{bus}_{t+1}")

    # generator limits, ramping, startup logic
    for g, gen in enumerate(case.generators):
        u0 = 1.0 if gen.initial_on else 0.0
        for t in range(T):
            model.add_constraint(ix.p[g, t] - gen.p_max * ix.on[g, t], "<=", 0.0,
                                 f"pmax_{gen.id}_{t+1}")
            model.add_constraint(gen.p_min * ix.on[g, t] - ix.p[g, t], "<=", 0.0,
                                 f"pmin_{gen.id}_{t+1}")
            ramp = dt * gen.ramp
            if t == 0:
                model.add_constraint(ix.p[g, 0] * 1.0, "<=",
                                     gen.initial_output + ramp, f"rup_{gen.id}_1")
                model.add_constraint(-1.0 * ix.p[g, 0], "<=",
                                     ramp - gen.initial_output, f"rdn_{gen.id}_1")
            else:
                model.add_constraint(ix.p[g, t] - ix.p[g, t - 1], "<=", ramp,
                                     f"rup_{gen.id}_{t+1}")
                model.add_constraint(ix.p[g, t - 1] - ix.p[g, t], "<=", ramp,
                                     f"rdn_{gen.id}_{t+1}")
            if t == 0:
                model.add_constraint(ix.start[g, 0] - ix.on[g, 0], ">=", -u0,
                                     f"vup_{gen.id}_1")
            else:
                model.add_constraint(
                    ix.start[g, t] - ix.on[g, t] + ix.on[g, t - 1], ">=", 0.0,
                    f"vup_{gen.id}_{t+1}")
                # no startup in t if the unit was already on in t-1
                model.add_constraint(ix.start[g, t] + ix.on[g, t - 1], "<=", 1.0,
                                     f"vcap_{gen.id}_{t+1}")
            model.add_constraint(ix.start[g, t] - ix.on[g, t], "<=", 0.0,
                                 f"von_{gen.id}_{t+1}")

    # DC power flow
    for t in range(T):
        for k, line in enumerate(case.lines):
            expr = (ix.flow[k, t]
                    - line.susceptance * ix.theta[line.from_bus, t]
                    + line.susceptance * ix.theta[line.to_bus, t])
            model.add_constraint(expr, "=", 0.0, f"dcflow_{line.id}_{t+1}")

    # storage dynamics
    for s, st in enumerate(case.storage):
        for t in range(T):
            tt = t + 1
            model.add_constraint(
                ix.p_disc[s, t] - st.p_max * ix.u_disc[s, t], "<=", 0.0,
                f"pdmax_{st.id}_{tt}")
            model.add_constraint(
                st.p_min * ix.u_disc[s, t] - ix.p_disc[s, t], "<=", 0.0,
                f"pdmin_{st.id}_{tt}")
            model.add_constraint(
                ix.p_char[s, t] - st.p_max * ix.u_char[s, t], "<=", 0.0,
                f"pcmax_{st.id}_{tt}")
            model.add_constraint(
                st.p_min * ix.u_char[s, t] - ix.p_char[s, t], "<=", 0.0,
                f"pcmin_{st.id}_{tt}")
            model.add_constraint(
                ix.u_disc[s, t] + ix.u_char[s, t], "<=", 1.0, f"mode_{st.id}_{tt}")
            step = (ix.energy[s, t]
                    + (dt / st.eff_discharge) * ix.p_disc[s, t]
                    - (dt * st.eff_charge) * ix.p_char[s, t])
            if t == 0:
                model.add_constraint(step, "=", st.e_initial, f"edyn_{st.id}_1")
            else:
                model.add_constraint(step - ix.energy[s, t - 1], "=", 0.0,
                                     f"edyn_{st.id}_{tt}")
            model.add_constraint(
                st.e_max * ix.soc[s, t] - ix.energy[s, t], "=", 0.0,
                f"socdef_{st.id}_{tt}")
        model.add_constraint(ix.energy[s, T - 1] * 1.0, "=", st.e_initial,
                             f"eterm_{st.id}")

    obj = LinExpr()
    for g, gen in enumerate(case.generators):
        for t in range(T):
            obj.add_term(ix.p[g, t], gen.cost_linear * dt)
            obj.add_term(ix.on[g, t], gen.cost_noload * dt)
            obj.add_term(ix.start[g, t], gen.cost_startup)
    if allow_shedding:
        for key in ix.shed:
            obj.add_term(ix.shed[key], SHED_PENALTY * dt)
    model.set_objective(obj)
    return model, ix


def evaluate_fuel_cost(schedule: Schedule, case: GridCase) -> float:
    """Generator cost of a schedule: energy + no-load + startup terms."""
    T = case.horizon.periods
    dt = case.horizon.dt
    if schedule.gen_p.shape != (len(case.generators), T):
        raise ValueError(
            f"schedule has {schedule.gen_p.shape} generator values, case "
            f"needs {(len(case.generators), T)}")
    total = 0.0
    for g, gen in enumerate(case.generators):
        total += dt * gen.cost_linear * float(schedule.gen_p[g].sum())
        total += dt * gen.cost_noload * float(schedule.gen_on[g].sum())
        total += gen.cost_startup * float(schedule.gen_start[g].sum())
    return total


def _grab(values, varid) -> float:
    return float(values[varid])


def _round_binary(val: float, name: str) -> float:
    nearest = round(val)
    if abs(val - nearest) > BINARY_ROUND_TOL:
        raise ExtractionError(
            f"binary {name} = {val!r} is not integral within {BINARY_ROUND_TOL}")
    return float(nearest)


def extract_schedule(result: SolveResult, index: VariableIndex,
                     case: GridCase) -> Schedule:
    """Copy solver values into a Schedule; costs are recomputed, not trusted."""
    if result.status not in ("optimal", "feasible_gap_unmet"):
        raise ValueError(f"cannot extract from status {result.status!r}")
    T = case.horizon.periods
    vals = result.values
    nG, nK = len(case.generators), len(case.lines)
    nR, nS, nN = len(case.renewables), len(case.storage), len(case.buses)

    gen_p = np.zeros((nG, T))
    gen_on = np.zeros((nG, T))
    gen_start = np.zeros((nG, T))
    for (g, t), var in index.p.items():
        gen_p[g, t] = _grab(vals, var)
    for (g, t), var in index.on.items():
        gen_on[g, t] = _round_binary(_grab(vals, var), var.name)
    for (g, t), var in index.start.items():
        gen_start[g, t] = _round_binary(_grab(vals, var), var.name)

    flow = np.zeros((nK, T))
    for (k, t), var in index.flow.items():
        flow[k, t] = _grab(vals, var)
    theta = np.zeros((nN, T))
    bus_pos = {bus: i for i, bus in enumerate(case.buses)}
    for (bus, t), var in index.theta.items():
        theta[bus_pos[bus], t] = _grab(vals, var)
    renewable = np.zeros((nR, T))
    for (r, t), var in index.renewable.items():
        renewable[r, t] = _grab(vals, var)

    st_disc = np.zeros((nS, T))
    st_char = np.zeros((nS, T))
    st_udisc = np.zeros((nS, T))
    st_uchar = np.zeros((nS, T))
    st_energy = np.zeros((nS, T))
    st_soc = np.zeros((nS, T))
    for (s, t), var in index.p_disc.items():
        st_disc[s, t] = _grab(vals, var)
    for (s, t), var in index.p_char.items():
        st_char[s, t] = _grab(vals, var)
    for (s, t), var in index.u_disc.items():
        st_udisc[s, t] = _round_binary(_grab(vals, var), var.name)
    for (s, t), var in index.u_char.items():
        st_uchar[s, t] = _round_binary(_grab(vals, var), var.name)
    for (s, t), var in index.energy.items():
        st_energy[s, t] = _grab(vals, var)
    for (s, t), var in index.soc.items():
        st_soc[s, t] = _grab(vals, var)

    shed = None
    if index.shed:
        shed = np.zeros((nN, T))
        for (bus, t), var in index.shed.items():
            shed[bus_pos[bus], t] = _grab(vals, var)

    deg_output = None
    degradation = 0.0
    if index.deg_output:
        deg_output = np.zeros((nS, T))
        for (s, t), var in index.deg_output.items():
            deg_output[s, t] = _grab(vals, var)
        degradation = float(sum(
            index.deg_coeff[s] * deg_output[s].sum() for s in range(nS)))

    schedule = Schedule(
        gen_p=gen_p, gen_on=gen_on, gen_start=gen_start, flow=flow, theta=theta,
        renewable=renewable, st_disc=st_disc, st_char=st_char,
        st_udisc=st_udisc, st_uchar=st_uchar, st_energy=st_energy,
        st_soc=st_soc, shed=shed, deg_output=deg_output,
        breakdown=CostBreakdown(fuel=0.0, degradation=degradation))
    schedule.breakdown.fuel = evaluate_fuel_cost(schedule, case)
    return schedule
