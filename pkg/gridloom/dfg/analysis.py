from __future__ import annotations

import itertools
import math
from typing import Dict, List, Tuple

import networkx as nx

from gridloom.dfg.graph import Dfg, DfgEdge
from gridloom.errors import DfgError

# Above this many candidate cycles rec_mii switches to the feasibility search.
_ENUMERATION_CAP = 20000


def _weight(g: Dfg, e: DfgEdge) -> int:
    return e.gap if e.kind == "order" else g.nodes[e.src].latency


def _pair_edges(g: Dfg) -> Dict[Tuple[int, int], List[Tuple[int, int]]]:
    """(src, dst) -> [(weight, distance)] over edges between real operations."""
    out: Dict[Tuple[int, int], List[Tuple[int, int]]] = {}
    for e in g.edges:
        if g.nodes[e.src].is_const or g.nodes[e.dst].is_const:
            continue
        out.setdefault((e.src, e.dst), []).append((_weight(g, e), e.distance))
    return out


def cycle_ratios(g: Dfg, limit: int = _ENUMERATION_CAP) -> List[Tuple[List[int], int, int]]:
    """Elementary cycles as (nodes, total weight, total distance); raises if more than `limit`."""
    pairs = _pair_edges(g)
    dg = nx.DiGraph()
    dg.add_nodes_from(n.id for n in g.ops)
    dg.add_edges_from(pairs)
    out: List[Tuple[List[int], int, int]] = []
    for cyc in nx.simple_cycles(dg):
        hops = [(cyc[i], cyc[(i + 1) % len(cyc)]) for i in range(len(cyc))]
        for choice in itertools.product(*(pairs[h] for h in hops)):
            w = sum(c[0] for c in choice)
            d = sum(c[1] for c in choice)
            out.append((list(cyc), w, d))
            if len(out) > limit:
                raise OverflowError("too many cycles")
    return out


def _feasible(g: Dfg, ii: int, pairs: Dict[Tuple[int, int], List[Tuple[int, int]]]) -> bool:
    """No cycle with sum(weight - ii * distance) > 0."""
    dg = nx.DiGraph()
    dg.add_nodes_from(n.id for n in g.ops)
    for (u, v), opts in pairs.items():
        best = max(w - ii * d for w, d in opts)
        dg.add_edge(u, v, weight=-best)
    return not nx.negative_edge_cycle(dg, weight="weight")


def rec_mii(g: Dfg, method: str = "auto") -> int:
    """Recurrence bound: max over cycles of ceil(total latency / total distance); 1 if acyclic."""
    pairs = _pair_edges(g)
    if method in ("auto", "enumerate"):
        try:
            cycles = cycle_ratios(g)
        except OverflowError:
            if method == "enumerate":
                raise
            cycles = None
        if cycles is not None:
            best = 1
            for nodes, w, d in cycles:
                if d == 0:
                    raise DfgError(f"cycle through nodes {nodes} has total distance 0")
                best = max(best, math.ceil(w / d))
            return best
    # Binary search on the smallest feasible II.
    zero = nx.DiGraph()
    zero.add_edges_from(k for k, opts in pairs.items() if any(d == 0 for _, d in opts))
    if not nx.is_directed_acyclic_graph(zero):
        raise DfgError("cycle with total distance 0")
    hi = max(1, sum(max(w for w, _ in opts) for opts in pairs.values()))
    lo = 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _feasible(g, mid, pairs):
            hi = mid
        else:
            lo = mid + 1
    return lo


def res_mii(g: Dfg, pe_count: int) -> int:
    if pe_count < 1:
        raise DfgError("pe_count must be at least 1")
    return max(1, math.ceil(g.node_count / pe_count))


def min_ii(g: Dfg, pe_count: int) -> int:
    return max(rec_mii(g), res_mii(g, pe_count))
