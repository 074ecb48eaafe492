"""In-memory MILP representation: variables, linear expressions, constraints.

The model is a plain intermediate representation; solving lives in
:mod:`bdscuc.milp.branch_bound` and text export in :mod:`bdscuc.milp.lp_format`.
Construction is single-writer; a finished model can be shared read-only.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field


INF = math.inf

_model_counter = itertools.count(1)


class ModelError(Exception):
    pass


class BoundError(ModelError):
    pass


class ForeignVariableError(ModelError):
    """An expression referenced a variable created on a different model."""


@dataclass(frozen=True)
class VarId:
    """Opaque variable handle. Hashable; valid only on its owning model."""
    model_id: int
    index: int
    name: str
    kind: str            # "continuous" | "binary"

    def __mul__(self, coef: float) -> "LinExpr":
        return LinExpr({self: float(coef)})

    __rmul__ = __mul__

    def __add__(self, other) -> "LinExpr":
        return LinExpr({self: 1.0}) + other

    __radd__ = __add__

    def __sub__(self, other) -> "LinExpr":
        return LinExpr({self: 1.0}) - other

    def __rsub__(self, other) -> "LinExpr":
        return (-1.0) * self + other

    def __neg__(self) -> "LinExpr":
        return LinExpr({self: -1.0})


class LinExpr:
    """Sparse linear expression: sum of coefficient*variable plus a constant."""

    __slots__ = ("terms", "constant")

    def __init__(self, terms: dict[VarId, float] | None = None, constant: float = 0.0):
        self.terms: dict[VarId, float] = dict(terms) if terms else {}
        self.constant = float(constant)

    @staticmethod
    def of(value) -> "LinExpr":
        if isinstance(value, LinExpr):
            return value.copy()
        if isinstance(value, VarId):
            return LinExpr({value: 1.0})
        return LinExpr(constant=float(value))

    def copy(self) -> "LinExpr":
        return LinExpr(self.terms, self.constant)

    def add_term(self, var: VarId, coef: float) -> "LinExpr":
        if coef:
            new = self.terms.get(var, 0.0) + float(coef)
            if new == 0.0:
                self.terms.pop(var, None)
            else:
                self.terms[var] = new
        return self

    def __add__(self, other) -> "LinExpr":
        out = self.copy()
        if isinstance(other, LinExpr):
            for v, c in other.terms.items():
                out.add_term(v, c)
            out.constant += other.constant
        elif isinstance(other, VarId):
            out.add_term(other, 1.0)
        else:
            out.constant += float(other)
        return out

    __radd__ = __add__

    def __sub__(self, other) -> "LinExpr":
        return self + (-1.0) * LinExpr.of(other)

    def __rsub__(self, other) -> "LinExpr":
        return LinExpr.of(other) - self

    def __mul__(self, scalar: float) -> "LinExpr":
        scalar = float(scalar)
        return LinExpr({v: c * scalar for v, c in self.terms.items()},
                       self.constant * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "LinExpr":
        return self * -1.0

    def value(self, values: dict[VarId, float]) -> float:
        return self.constant + sum(c * values[v] for v, c in self.terms.items())

    def __repr__(self) -> str:
        parts = [f"{c:+g}*{v.name}" for v, c in self.terms.items()]
        if self.constant or not parts:
            parts.append(f"{self.constant:+g}")
        return " ".join(parts)


@dataclass(frozen=True)
class Constraint:
    expr: LinExpr
    sense: str           # "<=", ">=", "="
    rhs: float
    name: str


_NAME_RE = re.compile(r"[^A-Za-z0-9_]")


def _sanitize(name: str) -> str:
    out = _NAME_RE.sub("_", name)
    if not out or out[0].isdigit():
        out = "v_" + out
    return out[:255]


@dataclass
class SolveOptions:
    rel_mipgap: float = 1e-4     # stop when (incumbent-bound)/max(1,|incumbent|) <= gap
    time_limit: float = 600.0    # wall seconds
    seed: int = 0

    def validate(self) -> None:
        if self.rel_mipgap < 0:
            raise ValueError(f"rel_mipgap must be >= 0, got {self.rel_mipgap}")
        if self.time_limit <= 0:
            raise ValueError(f"time_limit must be > 0, got {self.time_limit}")


@dataclass
class SolveResult:
    status: str                       # optimal | feasible_gap_unmet | infeasible | unbounded
    objective: float = math.nan
    best_bound: float = math.nan
    values: dict[VarId, float] = field(default_factory=dict)
    gap_achieved: float = math.nan
    solve_seconds: float = 0.0        # measured wall time
    work_units: float = 0.0           # deterministic effort (simplex pivots / 1e4)
    nodes: int = 0


class MilpModel:
    """Minimization MILP under construction."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.model_id = next(_model_counter)
        self.variables: list[VarId] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.constraints: list[Constraint] = []
        self.objective: LinExpr = LinExpr()
        self._names: set[str] = set()

    # -- variables -------------------------------------------------------

    def add_variable(self, kind: str, lb: float, ub: float, name: str) -> VarId:
        if kind not in ("continuous", "binary"):
            raise ModelError(f"unknown variable kind {kind!r}")
        lb, ub = float(lb), float(ub)
        if lb > ub:
            raise BoundError(f"{name}: lb {lb} > ub {ub}")
        if kind == "binary" and not (0 <= lb and ub <= 1):
            raise BoundError(f"{name}: binary bounds must lie within [0, 1], "
                             f"got [{lb}, {ub}]")
        base = _sanitize(name)
        unique = base
        k = 1
        while unique in self._names:
            unique = f"{base}_{k}"
            k += 1
        self._names.add(unique)
        var = VarId(self.model_id, len(self.variables), unique, kind)
        self.variables.append(var)
        self.lb.append(lb)
        self.ub.append(ub)
        return var

    def add_continuous(self, lb: float = -INF, ub: float = INF, name: str = "x") -> VarId:
        return self.add_variable("continuous", lb, ub, name)

    def add_binary(self, name: str = "b") -> VarId:
        return self.add_variable("binary", 0.0, 1.0, name)

    def set_bounds(self, var: VarId, lb: float, ub: float) -> None:
        self._check_owned(var)
        if lb > ub:
            raise BoundError(f"{var.name}: lb {lb} > ub {ub}")
        self.lb[var.index] = float(lb)
        self.ub[var.index] = float(ub)

    def bounds(self, var: VarId) -> tuple[float, float]:
        self._check_owned(var)
        return self.lb[var.index], self.ub[var.index]

    def _check_owned(self, var: VarId) -> None:
        if var.model_id != self.model_id:
            raise ForeignVariableError(
                f"variable {var.name!r} belongs to another model")

    def _check_expr(self, expr: LinExpr) -> None:
        for v in expr.terms:
            self._check_owned(v)

    # -- constraints and objective ----------------------------------------

    def add_constraint(self, expr, sense: str, rhs: float, name: str) -> Constraint:
        expr = LinExpr.of(expr)
        self._check_expr(expr)
        if sense not in ("<=", ">=", "="):
            raise ModelError(f"unknown sense {sense!r}")
        rhs = float(rhs) - expr.constant
        if not math.isfinite(rhs):
            raise ModelError(f"{name}: non-finite rhs")
        con = Constraint(LinExpr(expr.terms), sense, rhs, _sanitize(name))
        self.constraints.append(con)
        return con

    def set_objective(self, expr) -> None:
        expr = LinExpr.of(expr)
        self._check_expr(expr)
        self.objective = expr

    # -- census ------------------------------------------------------------

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_binaries(self) -> int:
        return sum(1 for v in self.variables if v.kind == "binary")

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)
