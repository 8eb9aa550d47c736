from __future__ import annotations

from typing import Iterable, List, Mapping, Optional

import networkx as nx

from gridloom.errors import GridloomError
from gridloom.pra.interpret import instance_graph, write_map
from gridloom.pra.model import OP_ARITY, Literal, PraProgram, VarRef
from gridloom.util.log import make_debug

_debug = make_debug("pra.validate")

# Parameter values every program is checked at.
SAMPLE_VALUES = (2, 4)


def _fmt(var: str, idx) -> str:
    return f"{var}[{', '.join(str(x) for x in idx)}]"


def _structural(p: PraProgram) -> List[str]:
    diags: List[str] = []
    n = p.space.n
    names = {v.name for v in p.variables}
    for e in p.equations:
        if e.op not in OP_ARITY:
            diags.append(f"{e.label}: unknown operation {e.op!r}")
        elif len(e.args) != OP_ARITY[e.op]:
            diags.append(f"{e.label}: arity mismatch ({e.op} takes {OP_ARITY[e.op]}, got {len(e.args)})")
        for q in e.domain.inequalities:
            if len(q.row) != n:
                diags.append(f"{e.label}: guard row length {len(q.row)} does not match dimension {n}")
        for name in e.domain.names:
            if name not in p.parameters:
                diags.append(f"{e.label}: guard references {name!r}, which is neither an iteration index nor a parameter")
        refs = [e.target] + [a for a in e.args if isinstance(a, VarRef)]
        for ref in refs:
            if ref.var not in names:
                diags.append(f"{e.label}: unknown identifier {ref.var!r}")
                continue
            v = p.variable(ref.var)
            if ref.index.rank != v.rank:
                diags.append(f"{e.label}: {v.name} indexed with {ref.index.rank} subscripts, rank is {v.rank}")
            for off in ref.index.offset:
                for pname in off.names:
                    if pname not in p.parameters:
                        diags.append(f"{e.label}: index of {v.name} references unknown parameter {pname!r}")
            if v.kind == "internal":
                if not ref.index.is_identity(n):
                    diags.append(f"{e.label}: non-identity indexing on internal variable {v.name}")
                elif not all(o.is_constant for o in ref.index.offset):
                    diags.append(f"{e.label}: parametric offset on internal variable {v.name}")
        if e.target.var in names:
            kind = p.kind_of(e.target.var)
            if kind == "input":
                diags.append(f"{e.label}: input variable {e.target.var} is defined")
            if kind == "internal" and any(o.const != 0 for o in e.target.index.offset):
                diags.append(f"{e.label}: internal variable {e.target.var} written at a translated index")
        for a in e.args:
            if isinstance(a, VarRef) and a.var in names and p.kind_of(a.var) == "output":
                diags.append(f"{e.label}: output variable {a.var} is read")
    for v in p.variables:
        if v.kind == "internal" and v.rank != n:
            diags.append(f"internal variable {v.name} has rank {v.rank}, iteration space has dimension {n}")
    return diags


def _instance_level(p: PraProgram, params: Mapping[str, int]) -> List[str]:
    diags: List[str] = []
    label = {i: e.label for i, e in enumerate(p.equations)}
    seen_pairs = set()
    for (var, idx), writers in write_map(p, params).items():
        labels = sorted({label[w[0]] for w in writers})
        if len(writers) > 1:
            key = (var, tuple(labels))
            if key not in seen_pairs:
                seen_pairs.add(key)
                diags.append(
                    f"single assignment violated for {_fmt(var, idx)} by {', '.join(labels)} at {params}"
                )
    g, undefined = instance_graph(p, params)
    seen_reads = set()
    for (pos, pt), var, idx in undefined:
        if (pos, var) in seen_reads:
            continue
        seen_reads.add((pos, var))
        diags.append(f"{label[pos]}: read of undefined instance {_fmt(var, idx)} at iteration {pt} ({params})")
    if not nx.is_directed_acyclic_graph(g):
        cyc = nx.find_cycle(g)
        diags.append(f"dependence cycle through {', '.join(label[a[0]] for a, _ in cyc)} at {params}")
    return diags


def validate_program(p: PraProgram, samples: Optional[Iterable[int]] = None) -> List[str]:
    """Return diagnostics; an empty list means every restriction holds.

    Instance-level rules (single assignment, defined before use, acyclicity)
    are checked by enumeration with all parameters set to each sample value.
    """
    diags = _structural(p)
    if diags:
        return diags
    for value in samples or SAMPLE_VALUES:
        params = {name: int(value) for name in p.parameters}
        try:
            diags.extend(_instance_level(p, params))
        except GridloomError as e:
            diags.append(f"enumeration failed at {params}: {e}")
    _debug(f"{p.name}: {len(diags)} diagnostics")
    return diags
