from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from gridloom.cgra.arch import CgraArch
from gridloom.cgra.mapping import CgraMapping
from gridloom.cgra.routing import negotiate, route_exact
from gridloom.cgra.schedule import ReservationTable, allowed_pes, edge_delay, op_order
from gridloom.config import load_config
from gridloom.dfg.analysis import rec_mii, res_mii
from gridloom.dfg.graph import Dfg
from gridloom.errors import TractabilityError
from gridloom.util.log import make_debug

_debug = make_debug("cgra.exhaustive")

MAX_NODES = 8
MAX_PES = 4


def within_guard(g: Dfg, a: CgraArch) -> bool:
    return g.node_count <= MAX_NODES and a.pe_count <= MAX_PES


def _roots(g: Dfg, a: CgraArch) -> List[int]:
    """PEs the first node needs to try; without memory ops the grid's mirror images are equivalent."""
    if any(n.is_memory for n in g.ops):
        return list(range(a.pe_count))
    return [a.pe_at(r, c) for r in range((a.rows + 1) // 2) for c in range((a.cols + 1) // 2)]


def _least_times(
    placed: List[int],
    cons: List[Tuple[int, int, int]],
    phase: Dict[int, int],
    ii: int,
    limit: int,
) -> Optional[Dict[int, int]]:
    """Least start times with the given phases satisfying t[v] >= t[u] + w; None if they diverge."""

    def up(x: int, ph: int) -> int:
        x = max(x, 0)
        return x + (ph - x) % ii

    t = {v: phase[v] for v in placed}
    changed = True
    while changed:
        changed = False
        for u, v, w in cons:
            if t[v] < t[u] + w:
                t[v] = up(t[u] + w, phase[v])
                if t[v] > limit:
                    return None
                changed = True
    return t


def exhaustive_map(g: Dfg, a: CgraArch, ii: int) -> Optional[CgraMapping]:
    """Complete search for a mapping at exactly this II.

    Enumerates every binding and start phase (modulo mirror images of the grid
    and a global time shift). For each choice the least consistent start times
    are derived and every routing alternative is tried.
    """
    if not within_guard(g, a):
        raise TractabilityError(
            f"exhaustive search is limited to {MAX_NODES} nodes on {MAX_PES} PEs "
            f"(got {g.node_count} nodes, {a.pe_count} PEs)"
        )
    if g.node_count == 0:
        return CgraMapping(ii=ii, strategy="exhaustive")
    if ii < max(rec_mii(g), res_mii(g, a.pe_count)):
        return None
    if any(a.busy(n.op) > ii for n in g.ops):
        return None

    cfg = load_config()
    order = op_order(g)
    edges = [e for e in g.edges if not g.nodes[e.src].is_const]
    max_hops = max(a.hops(0, q) for q in range(a.pe_count))
    max_w = max((n.latency for n in g.ops), default=1) + max_hops
    max_w = max([max_w] + [e.gap for e in edges if e.kind == "order"])
    limit = g.node_count * (max_w + ii) + ii
    roots = _roots(g, a)

    table = ReservationTable(ii)
    binding: Dict[int, int] = {}
    phase: Dict[int, int] = {}
    found: List[CgraMapping] = []
    visited = [0]

    def constraints() -> Optional[List[Tuple[int, int, int]]]:
        cons = []
        for e in edges:
            if e.src in binding and e.dst in binding:
                w = edge_delay(g, a, e, binding[e.src], binding[e.dst]) - ii * e.distance
                if e.src == e.dst:
                    if w > 0:
                        return None
                    continue
                cons.append((e.src, e.dst, w))
        return cons

    def leaf(times: Dict[int, int]) -> bool:
        routes, _ = negotiate(g, a, ii, binding, times, rounds=cfg.PATHFINDER_ROUNDS)
        if routes is None:
            routes = route_exact(g, a, ii, binding, times)
        if routes is None:
            return False
        found.append(CgraMapping(ii=ii, binding=dict(binding), schedule=dict(times), routes=routes, strategy="exhaustive"))
        return True

    def search(i: int) -> bool:
        if i == len(order):
            cons = constraints()
            times = None if cons is None else _least_times(order, cons, phase, ii, limit)
            return times is not None and leaf(times)
        v = order[i]
        busy = a.busy(g.nodes[v].op)
        lat = g.nodes[v].latency
        pes = [p for p in allowed_pes(g.nodes[v], a) if i > 0 or p in roots]
        for p in pes:
            for ph in range(1 if i == 0 else ii):
                if not table.free(p, ph, busy, lat):
                    continue
                visited[0] += 1
                table.take(p, ph, busy, v, lat)
                binding[v], phase[v] = p, ph
                cons = constraints()
                if cons is not None and _least_times(order[: i + 1], cons, phase, ii, limit) is not None:
                    if search(i + 1):
                        return True
                table.release(p, ph, busy, lat)
                del binding[v], phase[v]
        return False

    search(0)
    _debug(f"{g.name} II={ii}: {'found' if found else 'none'} after {visited[0]} partial assignments")
    return found[0] if found else None
