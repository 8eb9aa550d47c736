from __future__ import annotations

from typing import List, Tuple

from gridloom.pra.model import (
    OP_SYMBOL,
    Argument,
    ConditionSpace,
    IndexingFunction,
    Inequality,
    Literal,
    ParamExpr,
    PraProgram,
)

_KIND_WORD = {"input": " in", "output": " out", "internal": ""}


def _affine_text(row: Tuple[int, ...], rest: ParamExpr, indices: Tuple[str, ...]) -> str:
    parts: List[Tuple[str, str]] = []
    for coef, name in zip(row, indices):
        if coef == 0:
            continue
        body = name if abs(coef) == 1 else f"{abs(coef)}*{name}"
        parts.append(("-" if coef < 0 else "+", body))
    for name, coef in rest.terms:
        body = name if abs(coef) == 1 else f"{abs(coef)}*{name}"
        parts.append(("-" if coef < 0 else "+", body))
    if rest.const or not parts:
        parts.append(("-" if rest.const < 0 else "+", str(abs(rest.const))))
    out = ""
    for i, (sign, body) in enumerate(parts):
        if i == 0:
            out = body if sign == "+" else f"-{body}"
        else:
            out += f" {sign} {body}"
    return out


def _ref_text(var: str, f: IndexingFunction, indices: Tuple[str, ...]) -> str:
    if not f.matrix:
        return var
    subs = ", ".join(_affine_text(row, off, indices) for row, off in zip(f.matrix, f.offset))
    return f"{var}[{subs}]"


def _arg_text(a: Argument, indices: Tuple[str, ...]) -> str:
    if isinstance(a, Literal):
        return str(a.value)
    return _ref_text(a.var, a.index, indices)


def _inequality_text(q: Inequality, indices: Tuple[str, ...]) -> str:
    return f"{_affine_text(q.row, ParamExpr(), indices)} >= {q.offset}"


def _guard_text(c: ConditionSpace, indices: Tuple[str, ...]) -> str:
    return " and ".join(_inequality_text(q, indices) for q in c.inequalities)


def format_pra(p: PraProgram) -> str:
    """Render a program back into the textual dialect accepted by parse_pra.

    Guards come out in normalized `row . i >= bound` form, so the text may
    differ from the original while parsing back to an equal program.
    """
    idx = p.space.indices
    lines = [f"program {p.name} {{"]
    for v in p.variables:
        lines.append(f"  variable {v.name} {v.rank}{_KIND_WORD[v.kind]} int;")
    for name in p.parameters:
        lines.append(f"  parameter {name};")
    box = " and ".join(
        f"{i} >= {lo} and {i} <= {hi}" for i, lo, hi in zip(idx, p.space.lower, p.space.upper)
    )
    lines.append(f"  par ({box}) {{")
    for e in p.equations:
        lhs = _ref_text(e.target.var, e.target.index, idx)
        args = [_arg_text(a, idx) for a in e.args]
        if e.op == "copy":
            rhs = args[0]
        elif e.op in OP_SYMBOL:
            rhs = f"{args[0]} {OP_SYMBOL[e.op]} {args[1]}"
        else:
            rhs = f"{e.op}({', '.join(args)})"
        guard = f" if ({_guard_text(e.domain, idx)})" if e.domain.inequalities else ""
        lines.append(f"    {e.label}: {lhs} = {rhs}{guard};")
    lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"
