"""CPLEX-style LP text export and a reader for the written subset.

The writer emits the sections Minimize / Subject To / Bounds / Binaries / End
with deterministic ordering (model insertion order) and 17-significant-digit
coefficients, so exporting the same model twice is byte-identical and the
text round-trips through mainstream solvers. The reader accepts exactly this
dialect plus the usual whitespace freedom; it exists so exported models can
be re-imported and cross-checked.
"""

from __future__ import annotations

import math

from .model import MilpModel, LinExpr

_FMT = "%.17g"


def _num(x: float) -> str:
    return _FMT % x


def _expr_tokens(expr: LinExpr) -> list[str]:
    toks = []
    for var, coef in sorted(expr.terms.items(), key=lambda kv: kv[0].index):
        sign = "+" if coef >= 0 else "-"
        toks.append(f"{sign} {_num(abs(coef))} {var.name}")
    return toks


def export_lp(model: MilpModel) -> str:
    """Render the model as LP-format text (minimization)."""
    out = [f"\\ {model.name}", "Minimize"]
    toks = _expr_tokens(model.objective)
    if model.objective.constant:
        sign = "+" if model.objective.constant >= 0 else "-"
        toks.append(f"{sign} {_num(abs(model.objective.constant))}")
    if not toks:
        toks = ["+ 0 " + model.variables[0].name] if model.variables else ["+ 0"]
    out.append(" obj: " + _wrap(toks))

    out.append("Subject To")
    for con in model.constraints:
        body = _expr_tokens(con.expr) or ["+ 0 " + model.variables[0].name]
        sense = {"<=": "<=", ">=": ">=", "=": "="}[con.sense]
        out.append(f" {con.name}: " + _wrap(body) + f" {sense} {_num(con.rhs)}")

    out.append("Bounds")
    for var in model.variables:
        lb, ub = model.lb[var.index], model.ub[var.index]
        if var.kind == "binary" and lb == 0.0 and ub == 1.0:
            continue  # implied by the Binaries section
        if lb == ub:
            out.append(f" {var.name} = {_num(lb)}")
        elif math.isinf(lb) and math.isinf(ub):
            out.append(f" {var.name} free")
        elif math.isinf(ub):
            out.append(f" {var.name} >= {_num(lb)}")
        elif math.isinf(lb):
            out.append(f" -inf <= {var.name} <= {_num(ub)}")
        else:
            out.append(f" {_num(lb)} <= {var.name} <= {_num(ub)}")

    binaries = [v.name for v in model.variables if v.kind == "binary"]
    if binaries:
        out.append("Binaries")
        for i in range(0, len(binaries), 8):
            out.append(" " + " ".join(binaries[i:i + 8]))

    out.append("End")
    return "\n".join(out) + "\n"


def _wrap(tokens: list[str], width: int = 80) -> str:
    lines = []
    cur = ""
    for tok in tokens:
        if cur and len(cur) + len(tok) + 1 > width:
            lines.append(cur)
            cur = tok
        else:
            cur = f"{cur} {tok}" if cur else tok
    lines.append(cur)
    return "\n   ".join(lines)


class LpParseError(Exception):
    pass


def parse_lp(text: str) -> MilpModel:
    """Parse LP text written by :func:`export_lp` back into a fresh model."""
    sections = {"minimize", "subject", "bounds", "binaries", "end", "general"}
    model = MilpModel(name="imported")
    # first pass: tokenize into (section, logical statements)
    lines = []
    for raw in text.splitlines():
        line = raw.split("\\")[0].rstrip()
        if line.strip():
            lines.append(line)

    section = None
    statements: list[tuple[str, str]] = []
    buffer = ""

    def flush():
        nonlocal buffer
        if buffer.strip():
            statements.append((section, buffer.strip()))
        buffer = ""

    for line in lines:
        word = line.strip().lower()
        head = word.split()[0] if word else ""
        if head in sections or word in ("subject to", "st", "s.t."):
            flush()
            section = "subject" if head in ("subject", "st", "s.t.") else head
            if head == "maximize":
                raise LpParseError("only minimization models are supported")
            continue
        if section is None:
            raise LpParseError(f"content before first section: {line!r}")
        if section in ("minimize", "subject"):
            # statements start with 'name:'; continuation lines do not
            if ":" in line and not buffer.endswith(("<=", ">=", "=", "+", "-")):
                flush()
            buffer += " " + line.strip()
        else:
            flush()
            statements.append((section, line.strip()))
    flush()

    names: dict[str, object] = {}
    pending_bounds: dict[str, tuple[float, float]] = {}
    binaries: set[str] = set()
    obj_stmt = None
    con_stmts = []
    for sec, stmt in statements:
        if sec == "minimize":
            obj_stmt = stmt
        elif sec == "subject":
            con_stmts.append(stmt)
        elif sec == "bounds":
            _parse_bound(stmt, pending_bounds)
        elif sec == "binaries":
            binaries.update(stmt.split())
        elif sec == "general":
            raise LpParseError("general integers are not supported")

    # collect every referenced name so variables exist before expressions build
    referenced: list[str] = []

    def scan(stmt: str):
        body = stmt.split(":", 1)[1] if ":" in stmt else stmt
        for tok in body.replace("<=", " ").replace(">=", " ").replace("=", " ").split():
            if _is_number(tok) or tok in ("+", "-", "free", "-inf", "inf"):
                continue
            if tok not in referenced:
                referenced.append(tok)

    if obj_stmt:
        scan(obj_stmt)
    for stmt in con_stmts:
        scan(stmt)
    for nm in pending_bounds:
        if nm not in referenced:
            referenced.append(nm)
    for nm in binaries:
        if nm not in referenced:
            referenced.append(nm)

    for nm in referenced:
        if nm in binaries:
            lb, ub = pending_bounds.get(nm, (0.0, 1.0))
            names[nm] = model.add_variable("binary", lb, ub, nm)
        else:
            lb, ub = pending_bounds.get(nm, (0.0, math.inf))
            names[nm] = model.add_variable("continuous", lb, ub, nm)

    if obj_stmt:
        expr, _, _ = _parse_expr(obj_stmt.split(":", 1)[1], names)
        model.set_objective(expr)
    for stmt in con_stmts:
        if ":" not in stmt:
            raise LpParseError(f"constraint missing name: {stmt!r}")
        nm, body = stmt.split(":", 1)
        expr, sense, rhs = _parse_expr(body, names, need_sense=True)
        model.add_constraint(expr, sense, rhs, nm.strip())
    return model


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def _parse_expr(body: str, names, need_sense=False):
    for s in ("<=", ">=", "="):
        if s in body:
            left, right = body.split(s, 1)
            if not need_sense:
                raise LpParseError(f"unexpected sense in objective: {body!r}")
            expr, _, _ = _parse_expr(left, names)
            return expr, s, float(right.strip())
    if need_sense:
        raise LpParseError(f"constraint missing sense: {body!r}")

    expr = LinExpr()
    sign = 1.0
    coef = None
    for tok in body.split():
        if tok == "+":
            continue
        if tok == "-":
            sign = -sign
            continue
        if _is_number(tok):
            if coef is not None:
                # bare constant followed by a number: fold previous constant
                expr.constant += sign * coef
                sign = 1.0
            coef = float(tok)
            continue
        if tok not in names:
            raise LpParseError(f"unknown variable {tok!r}")
        expr.add_term(names[tok], sign * (1.0 if coef is None else coef))
        sign, coef = 1.0, None
    if coef is not None:
        expr.constant += sign * coef
    return expr, None, None


def _parse_bound(stmt: str, bounds: dict):
    toks = stmt.split()
    if len(toks) == 2 and toks[1].lower() == "free":
        bounds[toks[0]] = (-math.inf, math.inf)
        return
    norm = stmt.replace("<=", " <= ").replace(">=", " >= ")
    toks = norm.split()
    def val(tok):
        t = tok.lower()
        if t in ("-inf", "-infinity"):
            return -math.inf
        if t in ("inf", "+inf", "infinity"):
            return math.inf
        return float(tok)
    if len(toks) == 5 and toks[1] == "<=" and toks[3] == "<=":
        bounds[toks[2]] = (val(toks[0]), val(toks[4]))
    elif len(toks) == 3 and toks[1] == "<=":
        lb = bounds.get(toks[0], (0.0, math.inf))[0]
        bounds[toks[0]] = (lb, val(toks[2]))
    elif len(toks) == 3 and toks[1] == ">=":
        ub = bounds.get(toks[0], (0.0, math.inf))[1]
        bounds[toks[0]] = (val(toks[2]), ub)
    elif len(toks) == 3 and toks[1] == "=":
        bounds[toks[0]] = (val(toks[2]), val(toks[2]))
    else:
        raise LpParseError(f"cannot parse bound line: {stmt!r}")
