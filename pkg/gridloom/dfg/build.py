from __future__ import annotations

import bisect
from dataclasses import replace
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from gridloom.dfg.graph import DEFAULT_LATENCY, ArrayInfo, Dfg, DfgEdge, DfgNode
from gridloom.dfg.layout import SpmLayout, plan_layout
from gridloom.dfg.loopnest import (
    Affine,
    Assign,
    Imm,
    LoadStmt,
    LoopNestSpec,
    MemAccess,
    Operand,
    Ref,
    StoreStmt,
    eval_bound,
    evaluate_loopnest,
    require_valid,
)
from gridloom.dfg.transform import counter_statements, flatten_loop
from gridloom.errors import DfgError, LoopNestError
from gridloom.util.log import make_debug
from gridloom.util.words import apply_binary, select, wrap32

_debug = make_debug("dfg.build")

_OP_NODE = {
    "add": ("Add", None),
    "sub": ("Sub", None),
    "mul": ("Mul", None),
    "div": ("Div", None),
    "cmp_lt": ("Cmp", "lt"),
    "cmp_eq": ("Cmp", "eq"),
    "sel": ("Sel", None),
}

# A value during construction: a node of this iteration, a constant, or the
# previous-iteration value of a carried scalar.
_Node = Tuple[str, int]
_Const = Tuple[str, int]
_Prev = Tuple[str, str]
_Val = Union[_Node, _Const, _Prev]


def _index_used(spec: LoopNestSpec, name: str) -> bool:
    for st in spec.body:
        if isinstance(st, (LoadStmt, StoreStmt)) and any(name in a.names for a in st.index):
            return True
        if isinstance(st, StoreStmt) and isinstance(st.value, Ref) and st.value.name == name:
            return True
        if isinstance(st, Assign) and (st.guard == name or any(isinstance(o, Ref) and o.name == name for o in st.args)):
            return True
    return False


def prepare_single_loop(spec: LoopNestSpec) -> LoopNestSpec:
    """Flatten and materialize the loop counter so the body alone describes one iteration."""
    flat = flatten_loop(spec)
    loop = flat.loops[0]
    if len(spec.loops) == 1 and _index_used(flat, loop.index):
        prefix, carried = counter_statements(flat.loops)
        flat = replace(flat, carried=tuple(carried) + flat.carried, body=tuple(prefix) + flat.body)
    return flat


def default_layout(spec: LoopNestSpec, params: Mapping[str, int], *, banks: int, bank_bytes: int) -> SpmLayout:
    sizes = []
    for a in spec.arrays:
        words = 1
        for d in spec.shape(a.name, params):
            words *= d
        sizes.append((a.name, words))
    return plan_layout(sizes, banks=banks, bank_bytes=bank_bytes)


class _Builder:
    def __init__(self, spec: LoopNestSpec, params: Mapping[str, int], layout: SpmLayout, latencies: Mapping[str, int]):
        self.spec = spec
        self.params = dict(params)
        self.layout = layout
        self.lat = dict(DEFAULT_LATENCY)
        self.lat.update(latencies)
        self.nodes: List[DfgNode] = []
        self.edges: List[DfgEdge] = []
        self.consts: Dict[int, int] = {}
        self.cse: Dict[tuple, int] = {}
        self.env: Dict[str, _Val] = {c.name: ("prev", c.name) for c in spec.carried}
        self.pending: List[Tuple[int, int, str]] = []  # (consumer, pos, carried)
        self.mem_nodes: Dict[int, int] = {}  # statement position -> node

    # -----------------
    # node helpers
    # -----------------
    def _node(self, op: str, section: str, **kw) -> int:
        nid = len(self.nodes)
        self.nodes.append(DfgNode(id=nid, op=op, latency=self.lat.get(op, 1), section=section, **kw))
        return nid

    def const(self, value: int) -> int:
        value = wrap32(value)
        if value not in self.consts:
            self.consts[value] = self._node("Const", "compute", value=value, name=f"#{value}")
        return self.consts[value]

    def _wire(self, src: _Val, dst: int, pos: int) -> None:
        kind, payload = src
        if kind == "node":
            self.edges.append(DfgEdge(int(payload), dst, pos))
        elif kind == "const":
            self.edges.append(DfgEdge(self.const(int(payload)), dst, pos))
        else:
            self.pending.append((dst, pos, str(payload)))

    def op(self, op: str, args: List[_Val], section: str, *, variant: Optional[str] = None, cse: bool = False, name: str = "") -> _Val:
        if cse:
            key = (op, variant, tuple(args))
            if key in self.cse:
                return ("node", self.cse[key])
        nid = self._node(op, section, variant=variant, name=name)
        for pos, a in enumerate(args):
            self._wire(a, nid, pos)
        if cse:
            self.cse[(op, variant, tuple(args))] = nid
        return ("node", nid)

    def value(self, o: Operand) -> _Val:
        if isinstance(o, Imm):
            return ("const", eval_bound(o.value, self.params))
        if o.name in self.env:
            return self.env[o.name]
        if o.name in self.params:
            return ("const", int(self.params[o.name]))
        raise DfgError(f"use of undefined name {o.name!r}")

    # -----------------
    # statements
    # -----------------
    def address(self, array: str, index: Tuple[Affine, ...]) -> _Val:
        shape = self.spec.shape(array, self.params)
        strides = [1] * len(shape)
        for d in range(len(shape) - 2, -1, -1):
            strides[d] = strides[d + 1] * shape[d + 1]
        coefs: Dict[str, int] = {}
        order: List[str] = []
        const = self.layout.base(array)
        for aff, stride in zip(index, strides):
            const += stride * aff.const
            for name, c in aff.terms:
                if name in self.params and name not in self.env:
                    const += stride * c * int(self.params[name])
                    continue
                if name not in coefs:
                    order.append(name)
                    coefs[name] = 0
                coefs[name] += stride * c
        acc: Optional[_Val] = None
        for name in order:
            c = coefs[name]
            if c == 0:
                continue
            src = self.value(Ref(name))
            term = src if c == 1 else self.op("Mul", [src, ("const", c)], "address", cse=True)
            acc = term if acc is None else self.op("Add", [acc, term], "address", cse=True)
        if acc is None:
            return ("const", const)
        if const != 0:
            acc = self.op("Add", [acc, ("const", const)], "address", cse=True)
        return acc

    def _fold(self, op: str, vals: List[int]) -> int:
        if op == "sel":
            return select(vals[0], vals[1], vals[2])
        return apply_binary(op, vals[0], vals[1])

    def assign(self, st: Assign) -> None:
        args = [self.value(a) for a in st.args]
        if st.op == "copy":
            new = args[0]
        elif all(a[0] == "const" for a in args) and st.op != "div":
            new = ("const", self._fold(st.op, [int(a[1]) for a in args]))
        else:
            op, variant = _OP_NODE[st.op]
            new = self.op(op, args, st.section, variant=variant, name=st.dest)
        if st.guard is not None:
            old = self.value(Ref(st.dest))
            cond = self.value(Ref(st.guard))
            new = self.op("Sel", [cond, new, old], st.section, name=st.dest)
        self.env[st.dest] = new

    def load(self, pos: int, st: LoadStmt) -> None:
        addr = self.address(st.array, st.index)
        bank = self.layout.placement(st.array).bank
        nid = self._node("Load", "memory", array=st.array, bank=bank, name=st.dest)
        self._wire(addr, nid, 0)
        self.env[st.dest] = ("node", nid)
        self.mem_nodes[pos] = nid

    def store(self, pos: int, st: StoreStmt) -> None:
        addr = self.address(st.array, st.index)
        val = self.value(st.value)
        bank = self.layout.placement(st.array).bank
        nid = self._node("Store", "memory", array=st.array, bank=bank, name=st.array)
        self._wire(addr, nid, 0)
        self._wire(val, nid, 1)
        self.mem_nodes[pos] = nid

    def resolve_carried(self) -> None:
        inits = {c.name: c.init for c in self.spec.carried}
        for dst, pos, name in self.pending:
            final = self.env[name]
            if final == ("prev", name):
                # never reassigned: a loop-invariant scalar
                self.edges.append(DfgEdge(self.const(inits[name]), dst, pos))
            elif final[0] == "node":
                self.edges.append(DfgEdge(int(final[1]), dst, pos, distance=1, init=wrap32(inits[name])))
            elif final[0] == "const":
                raise DfgError(f"carried scalar {name!r} is reassigned a constant; give it an initial value instead")
            else:
                raise DfgError(f"carried scalar {name!r} aliases the previous value of {final[1]!r}")


def _memory_order_edges(
    spec: LoopNestSpec, params: Mapping[str, int], mem_nodes: Mapping[int, int], nodes: List[DfgNode]
) -> List[DfgEdge]:
    """Exact minimum dependence distances between memory statements on one array.

    Addresses are index-derived (validated), so one run over dummy data
    reproduces the access stream of any run.
    """
    dummy: Dict[str, np.ndarray] = {}
    for a in spec.arrays:
        shape = spec.shape(a.name, params)
        dummy[a.name] = np.ones(shape, dtype=np.int32)
        if a.init:
            dummy[a.init] = np.ones(shape, dtype=np.int32)
    trace: List[MemAccess] = []
    exact = True
    try:
        evaluate_loopnest(spec, params, dummy, trace=trace)
    except LoopNestError as e:
        _debug(f"{spec.name}: access trace unavailable ({e}); using distance 1 ordering")
        exact = False

    by_stmt: Dict[int, List[MemAccess]] = {}
    for acc in trace:
        by_stmt.setdefault(acc.stmt, []).append(acc)

    out: List[DfgEdge] = []
    stmts = sorted(mem_nodes)
    for s1 in stmts:
        for s2 in stmts:
            if s1 == s2:
                continue
            n1, n2 = nodes[mem_nodes[s1]], nodes[mem_nodes[s2]]
            if n1.array != n2.array or (n1.op == "Load" and n2.op == "Load"):
                continue
            gap = 1 if n1.op == "Store" else 0
            if not exact:
                d = 0 if s1 < s2 else 1
                out.append(DfgEdge(n1.id, n2.id, distance=d, kind="order", gap=gap))
                continue
            index: Dict[int, List[int]] = {}
            for acc in by_stmt.get(s1, []):
                index.setdefault(acc.address, []).append(acc.iteration)
            best: Optional[int] = None
            for acc in by_stmt.get(s2, []):
                its = index.get(acc.address)
                if not its:
                    continue
                # latest earlier access of s1 (same iteration only if s1 comes first in the body)
                k = bisect.bisect_right(its, acc.iteration) if s1 < s2 else bisect.bisect_left(its, acc.iteration)
                if k == 0:
                    continue
                d = acc.iteration - its[k - 1]
                best = d if best is None else min(best, d)
                if best == 0:
                    break
            if best is not None:
                out.append(DfgEdge(n1.id, n2.id, distance=best, kind="order", gap=gap))
    return out


def build_loop_dfg(
    spec: LoopNestSpec,
    params: Mapping[str, int],
    *,
    layout: Optional[SpmLayout] = None,
    latencies: Optional[Mapping[str, int]] = None,
    banks: int = 4,
    bank_bytes: int = 4096,
) -> Dfg:
    """Data-flow graph of one iteration of the (flattened) nest.

    The counter contributes a Sel/Add/Cmp triple per loop level, addresses are
    built from strides and the SPM layout base, guarded assignments become a
    single Sel merging both computed arms.
    """
    require_valid(spec)
    prepared = prepare_single_loop(spec)
    if layout is None:
        layout = default_layout(spec, params, banks=banks, bank_bytes=bank_bytes)
    b = _Builder(prepared, params, layout, latencies or {})
    for pos, st in enumerate(prepared.body):
        if isinstance(st, LoadStmt):
            b.load(pos, st)
        elif isinstance(st, StoreStmt):
            b.store(pos, st)
        else:
            b.assign(st)
    b.resolve_carried()
    edges = list(b.edges) + _memory_order_edges(prepared, params, b.mem_nodes, b.nodes)
    g = Dfg(
        name=spec.name,
        nodes=b.nodes,
        edges=edges,
        trip_count=spec.trip_count(params),
        trip_expr=spec.trip_expr(),
        layout=layout,
        arrays=tuple(ArrayInfo(a.name, spec.shape(a.name, params), a.role, a.init) for a in spec.arrays),
    )
    problems = g.check()
    if problems:
        raise DfgError(f"{spec.name}: malformed graph: {'; '.join(problems)}")
    _debug(f"{spec.name}: {g.node_count} nodes, sections={g.section_counts()}, edges={len(edges)}")
    return g
