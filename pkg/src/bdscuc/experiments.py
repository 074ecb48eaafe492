"""Experiment harnesses and result artifacts.

One solve run produces three artifacts in the output directory:

* ``schedule.csv`` — long-format decision table
  (``period, entity_kind, entity_id, field, value``);
* ``costs.json`` — cost breakdown and solve metadata;
* ``audit.json`` — independent feasibility audit result.

Artifacts are byte-deterministic for a fixed config and seed: floats are
rendered with repr precision, JSON keys are sorted, and the reported
``solve_seconds`` is the solver's deterministic work measure (simplex pivots
scaled to a nominal pivot rate) rather than wall time, which is printed to
stdout instead. Sweeps (optimality-gap ladder, storage-count growth) and the
storage economics report build on the same runner.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
from dataclasses import dataclass

import numpy as np

from .degradation import DegradationNet, NetFormatError, load_net
from .embedding import BoxContainmentError, build_lbdscuc
from .formulation import Schedule, CostBreakdown, build_tscuc, extract_schedule
from .grid import GridCase, CaseError, load_case
from .milp import SolveOptions, SolveResult, solve, TimeLimitNoIncumbentError
from .verify import audit_feasibility, recompute_degradation_cost

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_INVALID_INPUT = 2
EXIT_TIME_LIMIT = 3

DEFAULT_LIFETIME_CAP_YEARS = 25.0

_SCHEDULE_FIELDS = ("p", "U", "V", "flow", "theta", "p_disc", "p_char",
                    "u_disc", "u_char", "energy", "soc", "renewable")


class InvalidRunError(Exception):
    """Bad configuration or unreadable inputs (maps to exit code 2)."""


@dataclass
class RunConfig:
    case_path: str
    mode: str                      # "tscuc" | "lbd"
    out_dir: str
    net_path: str | None = None
    options: SolveOptions = dataclasses.field(default_factory=SolveOptions)
    allow_shedding: bool = False

    def validate(self) -> None:
        if self.mode not in ("tscuc", "lbd"):
            raise InvalidRunError(f"unknown mode {self.mode!r}")
        if self.mode == "lbd" and not self.net_path:
            raise InvalidRunError("mode 'lbd' requires a network file (--net)")
        try:
            self.options.validate()
        except ValueError as exc:
            raise InvalidRunError(str(exc)) from exc


@dataclass
class RunOutput:
    exit_code: int
    result: SolveResult | None = None
    schedule: Schedule | None = None
    costs: dict | None = None


def _fmt(value: float) -> str:
    return "%.17g" % float(value)


def write_schedule_csv(schedule: Schedule, case: GridCase, path) -> None:
    """Long-format dump of every decision value, ordered by period."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "entity_kind", "entity_id", "field", "value"])
        T = case.horizon.periods
        for t in range(T):
            period = t + 1
            for g, gen in enumerate(case.generators):
                writer.writerow([period, "generator", gen.id, "p",
                                 _fmt(schedule.gen_p[g, t])])
                writer.writerow([period, "generator", gen.id, "U",
                                 _fmt(schedule.gen_on[g, t])])
                writer.writerow([period, "generator", gen.id, "V",
                                 _fmt(schedule.gen_start[g, t])])
            for k, line in enumerate(case.lines):
                writer.writerow([period, "line", line.id, "flow",
                                 _fmt(schedule.flow[k, t])])
            for i, bus in enumerate(case.buses):
                writer.writerow([period, "bus", bus, "theta",
                                 _fmt(schedule.theta[i, t])])
            for r, prof in enumerate(case.renewables):
                writer.writerow([period, "renewable", prof.bus, "renewable",
                                 _fmt(schedule.renewable[r, t])])
            for s, st in enumerate(case.storage):
                writer.writerow([period, "storage", st.id, "p_disc",
                                 _fmt(schedule.st_disc[s, t])])
                writer.writerow([period, "storage", st.id, "p_char",
                                 _fmt(schedule.st_char[s, t])])
                writer.writerow([period, "storage", st.id, "u_disc",
                                 _fmt(schedule.st_udisc[s, t])])
                writer.writerow([period, "storage", st.id, "u_char",
                                 _fmt(schedule.st_uchar[s, t])])
                writer.writerow([period, "storage", st.id, "energy",
                                 _fmt(schedule.st_energy[s, t])])
                writer.writerow([period, "storage", st.id, "soc",
                                 _fmt(schedule.st_soc[s, t])])


def read_schedule_csv(path, case: GridCase) -> Schedule:
    """Rebuild a Schedule from the long-format CSV (costs recomputed)."""
    T = case.horizon.periods
    nG, nK = len(case.generators), len(case.lines)
    nR, nS, nN = len(case.renewables), len(case.storage), len(case.buses)
    gen_pos = {g.id: i for i, g in enumerate(case.generators)}
    line_pos = {ln.id: i for i, ln in enumerate(case.lines)}
    bus_pos = {str(b): i for i, b in enumerate(case.buses)}
    st_pos = {s.id: i for i, s in enumerate(case.storage)}
    ren_pos: dict[str, int] = {}
    for r, prof in enumerate(case.renewables):
        ren_pos.setdefault(str(prof.bus), r)

    arrays = {
        "p": np.zeros((nG, T)), "U": np.zeros((nG, T)), "V": np.zeros((nG, T)),
        "flow": np.zeros((nK, T)), "theta": np.zeros((nN, T)),
        "renewable": np.zeros((nR, T)),
        "p_disc": np.zeros((nS, T)), "p_char": np.zeros((nS, T)),
        "u_disc": np.zeros((nS, T)), "u_char": np.zeros((nS, T)),
        "energy": np.zeros((nS, T)), "soc": np.zeros((nS, T)),
    }
    positions = {"p": gen_pos, "U": gen_pos, "V": gen_pos, "flow": line_pos,
                 "theta": bus_pos, "renewable": ren_pos,
                 "p_disc": st_pos, "p_char": st_pos, "u_disc": st_pos,
                 "u_char": st_pos, "energy": st_pos, "soc": st_pos}
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                fld = row["field"]
                if fld not in arrays:
                    raise InvalidRunError(f"unknown schedule field {fld!r}")
                t = int(row["period"]) - 1
                ent = positions[fld].get(str(row["entity_id"]))
                if ent is None or not (0 <= t < T):
                    raise InvalidRunError(
                        f"schedule row does not match the case: {row}")
                arrays[fld][ent, t] = float(row["value"])
    except (OSError, KeyError, ValueError) as exc:
        raise InvalidRunError(f"cannot read schedule {path}: {exc}") from exc

    return Schedule(
        gen_p=arrays["p"], gen_on=arrays["U"], gen_start=arrays["V"],
        flow=arrays["flow"], theta=arrays["theta"],
        renewable=arrays["renewable"], st_disc=arrays["p_disc"],
        st_char=arrays["p_char"], st_udisc=arrays["u_disc"],
        st_uchar=arrays["u_char"], st_energy=arrays["energy"],
        st_soc=arrays["soc"], shed=None, deg_output=None,
        breakdown=CostBreakdown(fuel=0.0, degradation=0.0))


def _write_json(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def audit_to_dict(report) -> dict:
    return {
        "pass": report.ok,
        "max_residual": report.max_residual,
        "tolerance": report.tolerance,
        "violations": [
            {"family": v.family, "indices": list(v.indices),
             "residual": v.residual}
            for v in report.violations],
    }


def run_solve(config: RunConfig, log=print) -> RunOutput:
    """Build, solve, audit, and write artifacts. Never raises for expected
    failure modes; the exit code captures them (0 ok, 1 infeasible, 2 bad
    input, 3 time limit with no incumbent)."""
    try:
        config.validate()
        case = load_case(config.case_path)
        net = load_net(config.net_path) if config.net_path else None
        if config.mode == "lbd":
            model, index = build_lbdscuc(case, net, config.allow_shedding)
        else:
            model, index = build_tscuc(case, config.allow_shedding)
    except (InvalidRunError, CaseError, NetFormatError, BoxContainmentError,
            OSError) as exc:
        log(f"error: {exc}")
        return RunOutput(EXIT_INVALID_INPUT)

    try:
        result = solve(model, config.options)
    except TimeLimitNoIncumbentError as exc:
        log(f"time limit: {exc}")
        return RunOutput(EXIT_TIME_LIMIT)
    if result.status in ("infeasible", "unbounded"):
        log(f"solve ended {result.status}")
        return RunOutput(EXIT_INFEASIBLE, result=result)

    schedule = extract_schedule(result, index, case)
    audit = audit_feasibility(schedule, case)

    # ex-post degradation for both modes (T-SCUC is costed after the fact)
    degradation = 0.0
    if net is not None:
        recomputed = recompute_degradation_cost(schedule, case, net)
        degradation = recomputed.cost

    fuel = schedule.breakdown.fuel
    costs = {
        "mode": config.mode,
        "fuel_cost": fuel,
        "degradation_cost": degradation,
        "total_cost": fuel + degradation,
        "mipgap_achieved": result.gap_achieved,
        "solve_seconds": result.work_units,
        "status": result.status,
    }

    os.makedirs(config.out_dir, exist_ok=True)
    write_schedule_csv(schedule, case, os.path.join(config.out_dir, "schedule.csv"))
    _write_json(costs, os.path.join(config.out_dir, "costs.json"))
    _write_json(audit_to_dict(audit), os.path.join(config.out_dir, "audit.json"))

    log(f"{config.mode}: status={result.status} objective={result.objective:.2f} "
        f"fuel={fuel:.2f} degradation={degradation:.2f} "
        f"nodes={result.nodes} wall={result.solve_seconds:.2f}s")
    if not audit.ok:
        log(f"AUDIT FAILED: max residual {audit.max_residual:.2e}")
    return RunOutput(EXIT_OK, result=result, schedule=schedule, costs=costs)


# --- sweeps ---------------------------------------------------------------------


def sweep_mipgap(case: GridCase, net: DegradationNet, gaps, time_limit=600.0,
                 seed=0, log=print) -> list[dict]:
    """Solve the degradation-aware model once per optimality gap."""
    if not gaps:
        raise InvalidRunError("gap list is empty")
    for gap in gaps:
        if gap < 0:
            raise InvalidRunError(f"negative mipgap {gap}")
    model, index = build_lbdscuc(case, net)
    rows = []
    for gap in gaps:
        opts = SolveOptions(rel_mipgap=float(gap), time_limit=time_limit,
                            seed=seed)
        try:
            result = solve(model, opts)
        except TimeLimitNoIncumbentError:
            rows.append({"gap": gap, "total_cost": "", "degradation_cost": "",
                         "solve_seconds": time_limit, "status": "no_incumbent"})
            continue
        schedule = extract_schedule(result, index, case)
        rows.append({
            "gap": gap,
            "total_cost": result.objective,
            "degradation_cost": schedule.breakdown.degradation,
            "solve_seconds": result.work_units,
            "status": result.status,
        })
        log(f"gap {gap}: {result.status} total={result.objective:.2f} "
            f"degradation={schedule.breakdown.degradation:.2f} "
            f"wall={result.solve_seconds:.2f}s")
    return rows


def sweep_storage_count(case: GridCase, net: DegradationNet, counts,
                        mipgap=0.01, time_limit=600.0, seed=0,
                        log=print) -> list[dict]:
    """Re-solve with only the first m storage units active, for each m."""
    nS = len(case.storage)
    for m in counts:
        if not (0 <= m <= nS):
            raise InvalidRunError(f"count {m} outside [0, {nS}]")
    rows = []
    for m in counts:
        sub = dataclasses.replace(case, storage=case.storage[:m])
        model, _ = (build_lbdscuc(sub, net) if m else build_tscuc(sub))
        opts = SolveOptions(rel_mipgap=mipgap, time_limit=time_limit, seed=seed)
        try:
            result = solve(model, opts)
        except TimeLimitNoIncumbentError:
            rows.append({"count": m, "total_cost": "",
                         "binaries": model.num_binaries,
                         "solve_seconds": time_limit, "status": "no_incumbent"})
            continue
        rows.append({
            "count": m,
            "total_cost": result.objective,
            "binaries": model.num_binaries,
            "solve_seconds": result.work_units,
            "status": result.status,
        })
        log(f"storage count {m}: {result.status} total={result.objective:.2f} "
            f"binaries={model.num_binaries} wall={result.solve_seconds:.2f}s")
    return rows


def write_sweep_csv(rows: list[dict], path) -> None:
    if not rows:
        raise InvalidRunError("no sweep rows to write")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = list(rows[0].keys())
        writer.writerow(header)
        for row in rows:
            writer.writerow([
                _fmt(row[k]) if isinstance(row[k], float) else row[k]
                for k in header])


# --- economics ------------------------------------------------------------------


@dataclass
class StorageEconomics:
    storage_id: str
    capital_cost: float
    daily_degradation: float          # SOH fraction per day
    expected_lifetime_years: float
    lifetime_capped: bool


@dataclass
class EconomicReport:
    per_storage: list[StorageEconomics]
    daily_saving: float               # $ per day vs the no-storage baseline
    lifetime_years_used: float        # min across units, cap applied
    economic_benefit: float           # daily_saving * 365 * lifetime
    horizon_cap_years: float

    def to_dict(self) -> dict:
        return {
            "per_storage": [dataclasses.asdict(s) for s in self.per_storage],
            "daily_saving": self.daily_saving,
            "lifetime_years_used": self.lifetime_years_used,
            "economic_benefit": self.economic_benefit,
            "horizon_cap_years": self.horizon_cap_years,
        }


def expected_lifetime_years(soh_initial: float, soh_eol: float,
                            daily_degradation: float,
                            cap_years: float = DEFAULT_LIFETIME_CAP_YEARS
                            ) -> tuple[float, bool]:
    """Years until SOH hits end of life at the observed daily loss rate."""
    budget = soh_initial - soh_eol
    if daily_degradation <= 0:
        return cap_years, True
    years = budget / (daily_degradation * 365.0)
    if years > cap_years:
        return cap_years, True
    return years, False


def economic_report(case: GridCase, net: DegradationNet,
                    baseline_total: float, with_storage_total: float,
                    with_storage_schedule: Schedule,
                    cap_years: float = DEFAULT_LIFETIME_CAP_YEARS
                    ) -> EconomicReport:
    """Storage value summary: daily saving, unit lifetimes, lifetime benefit.

    `baseline_total` is the no-storage system's daily total cost and
    `with_storage_total` the storage-integrated one (fuel + degradation,
    same accounting on both sides).
    """
    recomputed = recompute_degradation_cost(with_storage_schedule, case, net)
    per_storage = []
    lifetimes = []
    for s, st in enumerate(case.storage):
        daily = float(recomputed.per_unit_soh_loss[s].sum())
        years, capped = expected_lifetime_years(st.soh_initial, st.soh_eol,
                                                daily, cap_years)
        lifetimes.append(years)
        per_storage.append(StorageEconomics(
            storage_id=st.id, capital_cost=st.capital_cost,
            daily_degradation=daily, expected_lifetime_years=years,
            lifetime_capped=capped))
    daily_saving = baseline_total - with_storage_total
    lifetime = min(lifetimes) if lifetimes else 0.0
    return EconomicReport(
        per_storage=per_storage,
        daily_saving=daily_saving,
        lifetime_years_used=lifetime,
        economic_benefit=daily_saving * 365.0 * lifetime,
        horizon_cap_years=cap_years)
