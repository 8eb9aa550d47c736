from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from gridloom.errors import InterpretError, PraSemanticError, UnboundParameterError
from gridloom.pra.model import Equation, IterationSpace, Literal, PraProgram, VarRef
from gridloom.util.log import make_debug
from gridloom.util.words import apply_binary, select, wrap32

_debug = make_debug("pra.interp")

Point = Tuple[int, ...]
Instance = Tuple[int, Point]  # (equation position, iteration)


@dataclass(frozen=True)
class Dependency:
    kind: str  # input | output | intra-iteration | inter-iteration
    distance: Optional[Tuple[int, ...]] = None


def _check_bound(p_names: Sequence[str], params: Mapping[str, int]) -> None:
    missing = [n for n in p_names if n not in params]
    if missing:
        raise UnboundParameterError(f"unbound parameters: {missing}")


def enumerate_iterations(s: IterationSpace, params: Mapping[str, int]) -> List[Point]:
    """All iteration vectors of the box in lexicographic order."""
    ranges = [range(lo, hi + 1) for lo, hi in s.bounds(params)]
    return list(itertools.product(*ranges))


def classify_dependency(p: PraProgram, e: Equation, arg_index: int) -> Dependency:
    arg = e.args[arg_index]
    if isinstance(arg, Literal):
        raise PraSemanticError(f"{e.label} argument {arg_index} is a literal and carries no dependency")
    kind = p.kind_of(arg.var)
    if kind == "input":
        return Dependency("input")
    if kind == "output":
        return Dependency("output")
    if not all(o.is_constant for o in arg.index.offset):
        raise PraSemanticError(f"{e.label}: internal read of {arg.var} has a parametric offset")
    d = tuple(-o.const for o in arg.index.offset)
    if all(x == 0 for x in d):
        return Dependency("intra-iteration", d)
    return Dependency("inter-iteration", d)


# -----------------
# Instance level helpers (shared with validation)
# -----------------
class _Compiled:
    """Equation with guards and indexing evaluated for one parameter binding."""

    def __init__(self, pos: int, e: Equation, params: Mapping[str, int]):
        self.pos = pos
        self.eq = e
        self.guards = [(q.row, q.offset.evaluate(params)) for q in e.domain.inequalities]
        self.target = (e.target.var, e.target.index.matrix, [o.evaluate(params) for o in e.target.index.offset])
        self.args: List[Tuple[Optional[str], object, object]] = []
        for a in e.args:
            if isinstance(a, Literal):
                self.args.append((None, a.value, None))
            else:
                self.args.append((a.var, a.index.matrix, [o.evaluate(params) for o in a.index.offset]))

    def active(self, pt: Point) -> bool:
        for row, b in self.guards:
            if sum(a * x for a, x in zip(row, pt)) < b:
                return False
        return True

    @staticmethod
    def index(matrix, offset, pt: Point) -> Tuple[int, ...]:
        return tuple(sum(a * x for a, x in zip(row, pt)) + o for row, o in zip(matrix, offset))

    def write_index(self, pt: Point) -> Tuple[int, ...]:
        _, m, o = self.target
        return self.index(m, o, pt)


def compile_equations(p: PraProgram, params: Mapping[str, int]) -> List[_Compiled]:
    _check_bound(p.parameters, params)
    return [_Compiled(i, e, params) for i, e in enumerate(p.equations)]


def iter_instances(p: PraProgram, params: Mapping[str, int]) -> Iterator[Tuple[_Compiled, Point]]:
    comp = compile_equations(p, params)
    for pt in enumerate_iterations(p.space, params):
        for c in comp:
            if c.active(pt):
                yield c, pt


def write_map(p: PraProgram, params: Mapping[str, int]) -> Dict[Tuple[str, Tuple[int, ...]], List[Instance]]:
    out: Dict[Tuple[str, Tuple[int, ...]], List[Instance]] = {}
    for c, pt in iter_instances(p, params):
        out.setdefault((c.target[0], c.write_index(pt)), []).append((c.pos, pt))
    return out


def instance_graph(p: PraProgram, params: Mapping[str, int]) -> Tuple[nx.DiGraph, List[Tuple[Instance, str, Tuple[int, ...]]]]:
    """Directed graph over equation instances; edges run writer -> reader.

    Returns the graph and the list of reads with no writer.
    """
    writers = write_map(p, params)
    g = nx.DiGraph()
    undefined: List[Tuple[Instance, str, Tuple[int, ...]]] = []
    for c, pt in iter_instances(p, params):
        node = (c.pos, pt)
        g.add_node(node)
        for var, m, o in c.args:
            if var is None or p.kind_of(var) != "internal":
                continue
            idx = c.index(m, o, pt)
            ws = writers.get((var, idx))
            if not ws:
                undefined.append((node, var, idx))
                continue
            for w in ws:
                g.add_edge(w, node)
    return g, undefined


def infer_shapes(p: PraProgram, params: Mapping[str, int]) -> Dict[str, Tuple[int, ...]]:
    """Extents of every I/O variable: from reads for inputs, from writes for outputs."""
    hi: Dict[str, List[int]] = {v.name: [0] * v.rank for v in p.variables if v.kind != "internal"}
    seen: Dict[str, bool] = {k: False for k in hi}
    for c, pt in iter_instances(p, params):
        refs = [c.target] + [a for a in c.args if a[0] is not None]
        for var, m, o in refs:
            if var not in hi:
                continue
            idx = c.index(m, o, pt)
            seen[var] = True
            hi[var] = [max(h, x + 1) for h, x in zip(hi[var], idx)]
    return {k: tuple(v) if seen[k] else tuple(0 for _ in v) for k, v in hi.items()}


def _lexicographic_sweep_legal(p: PraProgram) -> bool:
    """True when sweeping iterations lexicographically, equations in text order, respects every dependence."""
    for pos, e in enumerate(p.equations):
        for k, a in enumerate(e.args):
            if not isinstance(a, VarRef) or p.kind_of(a.var) != "internal":
                continue
            dep = classify_dependency(p, e, k)
            d = dep.distance or ()
            first = next((x for x in d if x != 0), 0)
            if first < 0:
                return False
            if first == 0:
                writer_pos = [i for i, w in enumerate(p.equations) if w.target.var == a.var]
                if any(i >= pos for i in writer_pos):
                    return False
    return True


def _random_topological(g: nx.DiGraph, seed: int) -> List[Instance]:
    rng = random.Random(seed)
    indeg = {n: g.in_degree(n) for n in g.nodes}
    ready = sorted(n for n, d in indeg.items() if d == 0)
    out: List[Instance] = []
    while ready:
        n = ready.pop(rng.randrange(len(ready)))
        out.append(n)
        for s in sorted(g.successors(n)):
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
    return out


def interpret(
    p: PraProgram,
    params: Mapping[str, int],
    inputs: Mapping[str, np.ndarray],
    *,
    order: str = "auto",
    seed: int = 0,
) -> Dict[str, np.ndarray]:
    """Reference evaluation of a program with 32-bit wrapping semantics.

    order:
      - auto: lexicographic sweep when legal, else topological order of the instance graph
      - topological: always go through the instance graph
      - random: a seeded random dependence-respecting order
    """
    _check_bound(p.parameters, params)
    arrays: Dict[str, np.ndarray] = {}
    for v in p.inputs:
        if v.name not in inputs:
            raise InterpretError(f"missing input {v.name!r}")
        arr = np.asarray(inputs[v.name], dtype=np.int32)
        if arr.ndim != v.rank:
            raise InterpretError(f"input {v.name!r} has rank {arr.ndim}, expected {v.rank}")
        arrays[v.name] = arr

    comp = compile_equations(p, params)
    values: Dict[Tuple[str, Tuple[int, ...]], int] = {}
    written: Dict[str, Dict[Tuple[int, ...], int]] = {v.name: {} for v in p.outputs}

    def read(var: str, idx: Tuple[int, ...], pt: Point) -> int:
        if var in arrays:
            arr = arrays[var]
            if any(x < 0 or x >= n for x, n in zip(idx, arr.shape)):
                raise InterpretError(f"read of {var}{list(idx)} outside input extents {arr.shape}", iteration=pt)
            return int(arr[idx])
        try:
            return values[(var, idx)]
        except KeyError:
            raise InterpretError(f"read of undefined instance {var}{list(idx)}", iteration=pt) from None

    def run(c: _Compiled, pt: Point) -> None:
        ops = [a[1] if a[0] is None else read(a[0], c.index(a[1], a[2], pt), pt) for a in c.args]
        op = c.eq.op
        if op == "copy":
            val = wrap32(int(ops[0]))
        elif op == "select":
            val = select(ops[0], ops[1], ops[2])
        elif op == "compare":
            val = apply_binary("cmp_lt", ops[0], ops[1])
        else:
            try:
                val = apply_binary(op, ops[0], ops[1])
            except ZeroDivisionError:
                raise InterpretError(f"{c.eq.label}: division by zero", iteration=pt) from None
        var = c.target[0]
        idx = c.write_index(pt)
        if var in written:
            written[var][idx] = val
        else:
            values[(var, idx)] = val

    if order == "auto" and _lexicographic_sweep_legal(p):
        for pt in enumerate_iterations(p.space, params):
            for c in comp:
                if c.active(pt):
                    run(c, pt)
    else:
        g, _ = instance_graph(p, params)
        if order == "random":
            seq = _random_topological(g, seed)
        else:
            seq = list(nx.lexicographical_topological_sort(g, key=lambda n: (n[1], n[0])))
        if len(seq) != g.number_of_nodes():
            raise InterpretError("instance dependence graph has a cycle")
        for pos, pt in seq:
            run(comp[pos], pt)

    shapes = infer_shapes(p, params)
    out: Dict[str, np.ndarray] = {}
    for name, cells in written.items():
        arr = np.zeros(shapes[name], dtype=np.int32)
        for idx, val in cells.items():
            arr[idx] = val
        out[name] = arr
    _debug(f"interpreted {p.name} params={dict(params)} outputs={ {k: v.shape for k, v in out.items()} }")
    return out
