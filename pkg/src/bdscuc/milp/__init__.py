"""Solver-agnostic MILP layer: model IR, LP text round trip, reference solver."""

from .model import (
    LinExpr,
    VarId,
    Constraint,
    MilpModel,
    SolveOptions,
    SolveResult,
    ModelError,
    BoundError,
    ForeignVariableError,
)
from .branch_bound import solve, solve_lp_relaxation, TimeLimitNoIncumbentError
from .lp_format import export_lp, parse_lp

__all__ = [
    "LinExpr", "VarId", "Constraint", "MilpModel", "SolveOptions", "SolveResult",
    "ModelError", "BoundError", "ForeignVariableError",
    "solve", "solve_lp_relaxation", "TimeLimitNoIncumbentError",
    "export_lp", "parse_lp",
]
