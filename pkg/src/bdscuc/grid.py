"""Power-system case data model: types, validation, JSON persistence, fixtures.

A :class:`GridCase` describes one day-ahead instance: the network (buses,
lines), the generator fleet, storage units, and per-period load/renewable
profiles. Cases are immutable after construction and safe to share across
concurrent solves.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass


class CaseError(Exception):
    """Base class for case loading problems."""


class CaseFormatError(CaseError):
    """The file is not valid JSON or is missing required structure."""


class CaseValidationError(CaseError):
    """The case parsed but violates a model invariant."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("invalid case: " + "; ".join(
            f"[{i.code}] {i.field}: {i.message}" for i in report.issues))


@dataclass(frozen=True)
class ValidationIssue:
    code: str        # machine-readable, e.g. UNKNOWN_BUS
    field: str       # dotted path of the offending field
    message: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.issues

    def codes(self) -> list[str]:
        return [i.code for i in self.issues]


@dataclass(frozen=True)
class Horizon:
    periods: int      # number of dispatch intervals
    dt: float         # interval length in hours


@dataclass(frozen=True)
class Generator:
    id: str
    bus: int
    p_min: float          # MW
    p_max: float          # MW
    cost_linear: float    # $/MWh
    cost_noload: float    # $/h while committed
    cost_startup: float   # $ per start
    ramp: float           # MW/h
    initial_on: bool
    initial_output: float  # MW at t=0


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: int         # sending end
    to_bus: int           # receiving end
    susceptance: float    # MW/rad
    limit: float          # MW, symmetric thermal limit


@dataclass(frozen=True)
class StorageUnit:
    id: str
    bus: int
    e_max: float          # MWh
    e_min: float          # MWh
    e_initial: float      # MWh at t=0
    p_max: float          # MW, charge and discharge
    p_min: float          # MW
    eff_charge: float     # fraction
    eff_discharge: float  # fraction
    capital_cost: float   # $
    salvage_value: float  # $ at end of life
    soh_eol: float        # end-of-life state-of-health fraction
    soh_initial: float    # current state-of-health fraction
    ambient_temp: float   # degrees C


@dataclass(frozen=True)
class LoadProfile:
    bus: int
    demand: tuple[float, ...]    # MW per period


@dataclass(frozen=True)
class RenewableProfile:
    bus: int
    available: tuple[float, ...]  # MW upper bound per period


@dataclass(frozen=True)
class GridCase:
    horizon: Horizon
    buses: tuple[int, ...]
    reference_bus: int
    lines: tuple[Line, ...] = ()
    generators: tuple[Generator, ...] = ()
    storage: tuple[StorageUnit, ...] = ()
    loads: tuple[LoadProfile, ...] = ()
    renewables: tuple[RenewableProfile, ...] = ()

    def demand_at(self, bus: int, t: int) -> float:
        """Total load at a bus in period t (0-based)."""
        return sum(p.demand[t] for p in self.loads if p.bus == bus)


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


def validate_case(case: GridCase) -> ValidationReport:
    """Check every model invariant; returns an empty report iff the case is valid."""
    issues: list[ValidationIssue] = []

    def bad(code, field, message):
        issues.append(ValidationIssue(code, field, message))

    hz = case.horizon
    if not isinstance(hz.periods, int) or hz.periods < 1:
        bad("HORIZON", "horizon.periods", f"periods must be >= 1, got {hz.periods}")
    if not _finite(hz.dt) or hz.dt <= 0:
        bad("HORIZON", "horizon.dt_hours", f"dt must be > 0, got {hz.dt}")
    T = hz.periods if isinstance(hz.periods, int) and hz.periods >= 1 else 0

    buses = set(case.buses)
    if len(buses) != len(case.buses):
        bad("DUPLICATE_ID", "buses", "duplicate bus ids")
    if case.reference_bus not in buses:
        bad("REF_BUS", "reference_bus", f"reference bus {case.reference_bus} not in buses")

    def check_bus(owner, bus):
        if bus not in buses:
            bad("UNKNOWN_BUS", owner, f"references nonexistent bus {bus}")

    seen_ids: set[tuple[str, str]] = set()

    def check_unique(kind, ident, field):
        key = (kind, str(ident))
        if key in seen_ids:
            bad("DUPLICATE_ID", field, f"duplicate {kind} id {ident!r}")
        seen_ids.add(key)

    for i, ln in enumerate(case.lines):
        pre = f"lines[{i}]"
        check_unique("line", ln.id, pre + ".id")
        check_bus(pre + ".from", ln.from_bus)
        check_bus(pre + ".to", ln.to_bus)
        if ln.from_bus == ln.to_bus:
            bad("LINE_LOOP", pre, "from and to bus coincide")
        if not _finite(ln.susceptance) or ln.susceptance <= 0:
            bad("SUSCEPTANCE", pre + ".susceptance_mw_per_rad",
                f"susceptance must be > 0, got {ln.susceptance}")
        if not _finite(ln.limit) or ln.limit <= 0:
            bad("LINE_LIMIT", pre + ".limit_mw", f"limit must be > 0, got {ln.limit}")

    for i, g in enumerate(case.generators):
        pre = f"generators[{i}]"
        check_unique("generator", g.id, pre + ".id")
        check_bus(pre + ".bus", g.bus)
        if not (0 <= g.p_min <= g.p_max):
            bad("POWER_RANGE", pre + ".p_min_mw",
                f"need 0 <= p_min <= p_max, got [{g.p_min}, {g.p_max}]")
        if not _finite(g.ramp) or g.ramp <= 0:
            bad("RAMP", pre + ".ramp_mw_per_h", f"ramp must be > 0, got {g.ramp}")
        for nm, val in (("cost_mwh", g.cost_linear), ("cost_noload", g.cost_noload),
                        ("cost_startup", g.cost_startup)):
            if not _finite(val) or val < 0:
                bad("COST_NEGATIVE", f"{pre}.{nm}", f"cost must be >= 0, got {val}")
        if g.initial_on:
            if not (g.p_min <= g.initial_output <= g.p_max):
                bad("INITIAL_OUTPUT", pre + ".initial_output_mw",
                    f"unit is on at t=0, output {g.initial_output} outside "
                    f"[{g.p_min}, {g.p_max}]")
        elif g.initial_output != 0:
            bad("INITIAL_OUTPUT", pre + ".initial_output_mw",
                f"unit is off at t=0 but initial output is {g.initial_output}")

    for i, s in enumerate(case.storage):
        pre = f"storage[{i}]"
        check_unique("storage", s.id, pre + ".id")
        check_bus(pre + ".bus", s.bus)
        if not (0 <= s.e_min <= s.e_initial <= s.e_max) or s.e_max <= 0:
            bad("SOC_RANGE", pre + ".e_initial_mwh",
                f"need 0 <= e_min <= e_initial <= e_max, got "
                f"[{s.e_min}, {s.e_initial}, {s.e_max}]")
        if not (0 <= s.p_min <= s.p_max):
            bad("POWER_RANGE", pre + ".p_min_mw",
                f"need 0 <= p_min <= p_max, got [{s.p_min}, {s.p_max}]")
        for nm, eff in (("eff_charge", s.eff_charge), ("eff_discharge", s.eff_discharge)):
            if not _finite(eff) or not (0 < eff <= 1):
                bad("EFF_RANGE", f"{pre}.{nm}", f"efficiency must be in (0, 1], got {eff}")
        if not (0 <= s.salvage_value <= s.capital_cost):
            bad("SALVAGE_RANGE", pre + ".salvage_value",
                f"need 0 <= salvage <= capital, got [{s.salvage_value}, {s.capital_cost}]")
        if not (0 < s.soh_eol < s.soh_initial <= 1):
            bad("SOH_RANGE", pre + ".soh_eol",
                f"need 0 < soh_eol < soh_initial <= 1, got "
                f"[{s.soh_eol}, {s.soh_initial}]")

    for kind, profiles, attr in (("loads", case.loads, "demand_mw"),
                                 ("renewables", case.renewables, "available_mw")):
        for i, p in enumerate(profiles):
            pre = f"{kind}[{i}]"
            check_bus(pre + ".bus", p.bus)
            series = p.demand if kind == "loads" else p.available
            if T and len(series) != T:
                bad("PROFILE_LENGTH", f"{pre}.{attr}",
                    f"profile length {len(series)} != horizon {T}")
            if any(not _finite(v) or v < 0 for v in series):
                bad("NEGATIVE_PROFILE", f"{pre}.{attr}", "profile values must be >= 0")

    return ValidationReport(tuple(issues))


# --- JSON persistence ---------------------------------------------------------

def _case_from_dict(doc: dict) -> GridCase:
    try:
        hz = doc["horizon"]
        horizon = Horizon(periods=int(hz["periods"]), dt=float(hz["dt_hours"]))
        lines = tuple(
            Line(id=str(d["id"]), from_bus=int(d["from"]), to_bus=int(d["to"]),
                 susceptance=float(d["susceptance_mw_per_rad"]),
                 limit=float(d["limit_mw"]))
            for d in doc.get("lines", ()))
        gens = tuple(
            Generator(id=str(d["id"]), bus=int(d["bus"]),
                      p_min=float(d["p_min_mw"]), p_max=float(d["p_max_mw"]),
                      cost_linear=float(d["cost_mwh"]),
                      cost_noload=float(d["cost_noload"]),
                      cost_startup=float(d["cost_startup"]),
                      ramp=float(d["ramp_mw_per_h"]),
                      initial_on=bool(d["initial_on"]),
                      initial_output=float(d["initial_output_mw"]))
            for d in doc.get("generators", ()))
        storage = tuple(
            StorageUnit(id=str(d["id"]), bus=int(d["bus"]),
                        e_max=float(d["e_max_mwh"]), e_min=float(d["e_min_mwh"]),
                        e_initial=float(d["e_initial_mwh"]),
                        p_max=float(d["p_max_mw"]), p_min=float(d["p_min_mw"]),
                        eff_charge=float(d["eff_charge"]),
                        eff_discharge=float(d["eff_discharge"]),
                        capital_cost=float(d["capital_cost"]),
                        salvage_value=float(d.get("salvage_value", 0.0)),
                        soh_eol=float(d["soh_eol"]),
                        soh_initial=float(d["soh_initial"]),
                        ambient_temp=float(d["ambient_temp_c"]))
            for d in doc.get("storage", ()))
        loads = tuple(
            LoadProfile(bus=int(d["bus"]), demand=tuple(float(v) for v in d["demand_mw"]))
            for d in doc.get("loads", ()))
        renewables = tuple(
            RenewableProfile(bus=int(d["bus"]),
                             available=tuple(float(v) for v in d["available_mw"]))
            for d in doc.get("renewables", ()))
        return GridCase(
            horizon=horizon,
            buses=tuple(int(b) for b in doc["buses"]),
            reference_bus=int(doc["reference_bus"]),
            lines=lines, generators=gens, storage=storage,
            loads=loads, renewables=renewables)
    except (KeyError, TypeError, ValueError) as exc:
        raise CaseFormatError(f"malformed case document: {exc!r}") from exc


def _case_to_dict(case: GridCase) -> dict:
    return {
        "horizon": {"periods": case.horizon.periods, "dt_hours": case.horizon.dt},
        "buses": list(case.buses),
        "reference_bus": case.reference_bus,
        "lines": [{"id": ln.id, "from": ln.from_bus, "to": ln.to_bus,
                   "susceptance_mw_per_rad": ln.susceptance, "limit_mw": ln.limit}
                  for ln in case.lines],
        "generators": [{"id": g.id, "bus": g.bus, "p_min_mw": g.p_min,
                        "p_max_mw": g.p_max, "cost_mwh": g.cost_linear,
                        "cost_noload": g.cost_noload, "cost_startup": g.cost_startup,
                        "ramp_mw_per_h": g.ramp, "initial_on": g.initial_on,
                        "initial_output_mw": g.initial_output}
                       for g in case.generators],
        "storage": [{"id": s.id, "bus": s.bus, "e_max_mwh": s.e_max,
                     "e_min_mwh": s.e_min, "e_initial_mwh": s.e_initial,
                     "p_max_mw": s.p_max, "p_min_mw": s.p_min,
                     "eff_charge": s.eff_charge, "eff_discharge": s.eff_discharge,
                     "capital_cost": s.capital_cost, "salvage_value": s.salvage_value,
                     "soh_eol": s.soh_eol, "soh_initial": s.soh_initial,
                     "ambient_temp_c": s.ambient_temp}
                    for s in case.storage],
        "loads": [{"bus": p.bus, "demand_mw": list(p.demand)} for p in case.loads],
        "renewables": [{"bus": p.bus, "available_mw": list(p.available)}
                       for p in case.renewables],
    }


def load_case(path) -> GridCase:
    """Load and fully validate a case file; raises on any parse or invariant failure."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise CaseFormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CaseFormatError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CaseFormatError(f"{path}: top level must be a JSON object")
    case = _case_from_dict(doc)
    report = validate_case(case)
    if not report.ok:
        raise CaseValidationError(report)
    return case


def save_case(case: GridCase, path) -> None:
    """Write a case back to the JSON schema accepted by :func:`load_case`."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_case_to_dict(case), fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- Built-in fixture ---------------------------------------------------------

def toy_case() -> GridCase:
    """Desk-scale three-bus fixture ("toy3"): 2 generators, 1 storage unit, T=4.

    Sized so every exact oracle (exhaustive commitment enumeration, pinned-input
    network checks) stays tractable while exercising every constraint family.
    """
    return GridCase(
        horizon=Horizon(periods=4, dt=1.0),
        buses=(1, 2, 3),
        reference_bus=1,
        lines=(
            Line(id="L12", from_bus=1, to_bus=2, susceptance=1000.0, limit=80.0),
            Line(id="L23", from_bus=2, to_bus=3, susceptance=1000.0, limit=100.0),
            Line(id="L13", from_bus=1, to_bus=3, susceptance=1000.0, limit=100.0),
        ),
        generators=(
            Generator(id="G1", bus=1, p_min=10.0, p_max=100.0, cost_linear=20.0,
                      cost_noload=100.0, cost_startup=50.0, ramp=60.0,
                      initial_on=True, initial_output=60.0),
            Generator(id="G2", bus=2, p_min=5.0, p_max=80.0, cost_linear=45.0,
                      cost_noload=50.0, cost_startup=30.0, ramp=80.0,
                      initial_on=False, initial_output=0.0),
        ),
        storage=(
            # 20 MWh at the Table-style unit price of 100,000 $/MWh
            StorageUnit(id="B1", bus=3, e_max=20.0, e_min=2.0, e_initial=10.0,
                        p_max=10.0, p_min=0.0, eff_charge=0.95, eff_discharge=0.95,
                        capital_cost=2_000_000.0, salvage_value=0.0,
                        soh_eol=0.5, soh_initial=1.0, ambient_temp=25.0),
        ),
        loads=(LoadProfile(bus=3, demand=(60.0, 80.0, 120.0, 70.0)),),
        renewables=(RenewableProfile(bus=2, available=(10.0, 5.0, 0.0, 20.0)),),
    )
