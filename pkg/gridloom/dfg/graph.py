from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import networkx as nx

from gridloom.dfg.layout import SpmLayout

NODE_OPS = ("Sel", "Add", "Sub", "Cmp", "Mul", "Div", "Load", "Store", "Const")

# Default per-op latency in cycles; architecture files may override.
DEFAULT_LATENCY: Dict[str, int] = {
    "Sel": 1,
    "Add": 1,
    "Sub": 1,
    "Cmp": 1,
    "Mul": 1,
    "Div": 16,
    "Load": 1,
    "Store": 1,
    "Const": 1,
}


@dataclass(frozen=True)
class DfgNode:
    id: int
    op: str
    latency: int = 1
    section: str = "compute"
    value: Optional[int] = None  # Const payload
    variant: Optional[str] = None  # Cmp: "lt" | "eq"
    array: Optional[str] = None  # Load/Store
    bank: Optional[int] = None  # Load/Store bank affinity
    name: str = ""

    @property
    def is_const(self) -> bool:
        return self.op == "Const"

    @property
    def is_memory(self) -> bool:
        return self.op in ("Load", "Store")


@dataclass(frozen=True)
class DfgEdge:
    """Dependency src -> dst.

    kind "data": dst reads src's value of `distance` iterations earlier at operand `pos`;
    when that iteration does not exist the operand is `init`.
    kind "order": memory ordering only; dst (in iteration t + distance) must
    issue at least `gap` cycles after src (in iteration t).
    """

    src: int
    dst: int
    pos: int = 0
    distance: int = 0
    init: int = 0
    kind: str = "data"
    gap: int = 0


@dataclass(frozen=True)
class ArrayInfo:
    """Shape and role of an array the graph touches; `init` names the image an out array starts from."""

    name: str
    shape: Tuple[int, ...]
    role: str
    init: Optional[str] = None


@dataclass
class Dfg:
    name: str
    nodes: List[DfgNode] = field(default_factory=list)
    edges: List[DfgEdge] = field(default_factory=list)
    trip_count: int = 0
    trip_expr: str = "1"
    layout: Optional[SpmLayout] = None  # used for address constants
    arrays: Tuple[ArrayInfo, ...] = ()

    def node(self, nid: int) -> DfgNode:
        return self.nodes[nid]

    @property
    def ops(self) -> List[DfgNode]:
        """Nodes that occupy an issue slot (everything except constants)."""
        return [n for n in self.nodes if not n.is_const]

    @property
    def node_count(self) -> int:
        return len(self.ops)

    def data_edges(self) -> List[DfgEdge]:
        return [e for e in self.edges if e.kind == "data"]

    def routed_edges(self) -> List[DfgEdge]:
        """Data edges whose source is a real operation (constants are immediates)."""
        return [e for e in self.edges if e.kind == "data" and not self.nodes[e.src].is_const]

    def in_edges(self, nid: int) -> List[DfgEdge]:
        return [e for e in self.edges if e.dst == nid]

    def operands(self, nid: int) -> List[DfgEdge]:
        return sorted((e for e in self.edges if e.dst == nid and e.kind == "data"), key=lambda e: e.pos)

    def section_counts(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for n in self.ops:
            out[n.section] = out.get(n.section, 0) + 1
        return out

    def to_networkx(self, *, include_consts: bool = False) -> nx.MultiDiGraph:
        g = nx.MultiDiGraph(name=self.name)
        for n in self.nodes:
            if n.is_const and not include_consts:
                continue
            g.add_node(n.id, op=n.op, latency=n.latency, section=n.section)
        for e in self.edges:
            if e.src in g and e.dst in g:
                g.add_edge(e.src, e.dst, pos=e.pos, distance=e.distance, kind=e.kind, gap=e.gap)
        return g

    def check(self) -> List[str]:
        """Well-formedness problems (empty when fine)."""
        problems: List[str] = []
        ids = {n.id for n in self.nodes}
        for i, n in enumerate(self.nodes):
            if n.id != i:
                problems.append(f"node ids must be dense, found {n.id} at position {i}")
            if n.latency < 1:
                problems.append(f"node {n.id} has latency {n.latency}")
        for e in self.edges:
            if e.src not in ids or e.dst not in ids:
                problems.append(f"edge {e.src}->{e.dst} references a missing node")
            if e.distance < 0:
                problems.append(f"edge {e.src}->{e.dst} has negative distance")
        zero = nx.DiGraph()
        zero.add_nodes_from(ids)
        zero.add_edges_from((e.src, e.dst) for e in self.edges if e.distance == 0)
        if not nx.is_directed_acyclic_graph(zero):
            problems.append("distance-0 edges form a cycle")
        for n in self.nodes:
            if n.is_memory and not any(e.pos == 0 and e.kind == "data" for e in self.in_edges(n.id)):
                problems.append(f"{n.op} node {n.id} has no address input")
        return problems

    def summary(self) -> Tuple[int, int, Dict[str, int]]:
        return self.node_count, len(self.routed_edges()), self.section_counts()
