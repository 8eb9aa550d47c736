from __future__ import annotations

from dataclasses import replace
from typing import List, Mapping, Optional, Sequence, Tuple

from gridloom.dfg.loopnest import (
    Affine,
    Assign,
    Carried,
    Imm,
    LoadStmt,
    Loop,
    LoopNestSpec,
    Operand,
    Ref,
    Statement,
    StoreStmt,
    eval_bound,
    require_valid,
)
from gridloom.errors import LoopNestError
from gridloom.util.log import make_debug

_debug = make_debug("dfg.transform")

FLAT_INDEX = "_t"


def counter_statements(loops: Sequence[Loop]) -> Tuple[List[Statement], List[Carried]]:
    """Select/Add/Compare triple per level, innermost first.

    i   = sel(c_i, lower, a_i)      (c_i, a_i from the previous iteration)
    a_i = i + 1                     (innermost)  or  i + c_inner (outer levels)
    c_i = cmp_eq(a_i, upper)
    Outer levels advance exactly when the level inside them wraps.
    """
    stmts: List[Statement] = []
    carried: List[Carried] = []
    inner_flag: Optional[str] = None
    for loop in reversed(loops):
        i = loop.index
        a, c = f"{i}__next", f"{i}__wrap"
        step: Operand = Imm(1) if inner_flag is None else Ref(inner_flag)
        stmts.append(Assign(i, "sel", (Ref(c), Imm(loop.lower), Ref(a)), section="index"))
        stmts.append(Assign(a, "add", (Ref(i), step), section="index"))
        stmts.append(Assign(c, "cmp_eq", (Ref(a), Imm(loop.upper)), section="index"))
        carried.append(Carried(a, 0))
        carried.append(Carried(c, 1))
        inner_flag = c
    return stmts, carried


def _product(loops: Sequence[Loop]) -> object:
    if all(isinstance(l.lower, int) and isinstance(l.upper, int) for l in loops):
        n = 1
        for l in loops:
            n *= max(0, int(l.upper) - int(l.lower))
        return n
    parts = []
    for l in loops:
        parts.append(f"({l.upper})" if l.lower == 0 else f"(({l.upper}) - ({l.lower}))")
    return "*".join(parts)


def flatten_loop(spec: LoopNestSpec) -> LoopNestSpec:
    """Collapse the nest into one loop over the product of extents.

    The original indices become scalars recomputed by conditional increments
    at the top of the body; a 1-level nest is returned unchanged.
    """
    require_valid(spec)
    if len(spec.loops) <= 1:
        return spec
    prefix, carried = counter_statements(spec.loops)
    flat = replace(
        spec,
        loops=(Loop(FLAT_INDEX, 0, _product(spec.loops)),),
        carried=tuple(carried) + spec.carried,
        body=tuple(prefix) + spec.body,
    )
    _debug(f"flattened {spec.name}: {len(spec.loops)} levels -> trip {flat.loops[0].upper}")
    return flat


def _subst_operand(o: Operand, name: str, repl: str) -> Operand:
    if isinstance(o, Ref) and o.name == name:
        return Ref(repl)
    return o


def unroll_loop(spec: LoopNestSpec, factor: int, params: Optional[Mapping[str, int]] = None) -> LoopNestSpec:
    """Replicate the body `factor` times over the innermost loop.

    Copy u executes original iteration lower + factor * k' + u. Index
    expressions are rewritten affinely; operand uses of the index get an
    explicit recomputation.
    """
    require_valid(spec)
    if factor < 1:
        raise LoopNestError(f"unroll factor must be positive, got {factor}")
    if factor == 1:
        return spec
    inner = spec.loops[-1]
    try:
        lo = eval_bound(inner.lower, params or {})
        hi = eval_bound(inner.upper, params or {})
    except LoopNestError as e:
        raise LoopNestError(f"cannot check divisibility of loop {inner.index}: {e}") from e
    extent = hi - lo
    if extent % factor != 0:
        raise LoopNestError(f"innermost extent {extent} of loop {inner.index} is not divisible by {factor}")

    k = inner.index
    used_as_operand = any(
        isinstance(st, (Assign, StoreStmt))
        and any(isinstance(o, Ref) and o.name == k for o in (st.args if isinstance(st, Assign) else (st.value,)))
        or (isinstance(st, Assign) and st.guard == k)
        for st in spec.body
    )
    body: List[Statement] = []
    for u in range(factor):
        shift = lo + u
        repl = Affine(((k, factor),), shift)
        alias = f"{k}__u{u}"
        if used_as_operand:
            body.append(Assign(f"{k}__s{u}", "mul", (Ref(k), Imm(factor)), section="index"))
            body.append(Assign(alias, "add", (Ref(f"{k}__s{u}"), Imm(shift)), section="index"))
        for st in spec.body:
            if isinstance(st, LoadStmt):
                body.append(LoadStmt(st.dest, st.array, tuple(a.substitute(k, repl) for a in st.index)))
            elif isinstance(st, StoreStmt):
                body.append(
                    StoreStmt(
                        st.array,
                        tuple(a.substitute(k, repl) for a in st.index),
                        _subst_operand(st.value, k, alias),
                    )
                )
            else:
                body.append(
                    Assign(
                        st.dest,
                        st.op,
                        tuple(_subst_operand(a, k, alias) for a in st.args),
                        guard=alias if st.guard == k else st.guard,
                        section=st.section,
                    )
                )
    new_inner = Loop(k, 0, extent // factor)
    out = replace(spec, loops=spec.loops[:-1] + (new_inner,), body=tuple(body))
    require_valid(out)
    _debug(f"unrolled {spec.name} x{factor}: {len(spec.body)} -> {len(body)} statements")
    return out
