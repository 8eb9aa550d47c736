from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import networkx as nx

from gridloom.cgra.arch import CgraArch
from gridloom.dfg.graph import Dfg, DfgEdge, DfgNode


class ScheduleFailure(Exception):
    """One list-scheduling attempt failed; `reason` names the bottleneck."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass
class ReservationTable:
    """Modulo FU reservations: (pe, phase) -> node."""

    ii: int
    slots: Dict[Tuple[int, int], int] = field(default_factory=dict)
    # (pe, phase) at which a result lands in the PE output latch
    done: Dict[Tuple[int, int], int] = field(default_factory=dict)

    def free(self, pe: int, t: int, busy: int, latency: int = 1) -> bool:
        if busy > self.ii:
            return False
        if (pe, (t + latency) % self.ii) in self.done:
            return False
        return all((pe, (t + j) % self.ii) not in self.slots for j in range(busy))

    def used(self, pe: int) -> int:
        return sum(1 for q, _ in self.slots if q == pe)

    def take(self, pe: int, t: int, busy: int, node: int, latency: int = 1) -> None:
        for j in range(busy):
            self.slots[(pe, (t + j) % self.ii)] = node
        self.done[(pe, (t + latency) % self.ii)] = node

    def release(self, pe: int, t: int, busy: int, latency: int = 1) -> None:
        for j in range(busy):
            self.slots.pop((pe, (t + j) % self.ii), None)
        self.done.pop((pe, (t + latency) % self.ii), None)


def allowed_pes(n: DfgNode, a: CgraArch) -> List[int]:
    if n.is_memory:
        return [a.bank_owner(int(n.bank or 0))]
    return list(range(a.pe_count))


def op_order(g: Dfg) -> List[int]:
    """Topological order of operations over distance-0 edges; ties by node id."""
    dg = nx.DiGraph()
    dg.add_nodes_from(n.id for n in g.ops)
    dg.add_edges_from(
        (e.src, e.dst) for e in g.edges if e.distance == 0 and not g.nodes[e.src].is_const and e.src != e.dst
    )
    return list(nx.lexicographical_topological_sort(dg, key=lambda v: v))


def recurrence_order(g: Dfg) -> List[List[int]]:
    """Operations grouped by strongly connected component over every dependence, carried ones included.

    A component comes after all of its outside producers (ties by lowest member id);
    members keep the distance-0 topological order of `op_order`.
    """
    pos = {v: i for i, v in enumerate(op_order(g))}
    dg = nx.DiGraph()
    dg.add_nodes_from(pos)
    dg.add_edges_from((e.src, e.dst) for e in g.edges if not g.nodes[e.src].is_const and e.src != e.dst)
    cg = nx.condensation(dg)
    members = {c: sorted(cg.nodes[c]["members"], key=pos.__getitem__) for c in cg.nodes}
    return [members[c] for c in nx.lexicographical_topological_sort(cg, key=lambda c: min(members[c]))]


def _base_delay(g: Dfg, e: DfgEdge) -> int:
    return e.gap if e.kind == "order" else g.nodes[e.src].latency


def recurrence_floors(
    g: Dfg, comp: List[int], sched: Mapping[int, int], ii: int, ins: Mapping[int, List[DfgEdge]]
) -> Dict[int, int]:
    """Earliest start per member that does not leave the rest of its cycle waiting.

    Inside one component every member is aligned to the latest as-soon-as-possible
    time any downstream member can reach; starting a member earlier only stretches
    the carried edge that closes the cycle. Hops are ignored.
    """
    if len(comp) < 2:
        return {}
    inside = set(comp)
    asap: Dict[int, int] = {}
    for w in comp:
        t = 0
        for e in ins.get(w, []):
            if e.src == w:
                continue
            if e.src in inside:
                if e.distance == 0:
                    t = max(t, asap[e.src] + _base_delay(g, e))
            elif e.src in sched:
                t = max(t, sched[e.src] + _base_delay(g, e) - ii * e.distance)
        asap[w] = t
    floors: Dict[int, int] = {}
    for i, v in enumerate(comp):
        far = {v: 0}
        for w in comp[i + 1 :]:
            reach = [far[e.src] + _base_delay(g, e) for e in ins.get(w, []) if e.distance == 0 and e.src in far]
            if reach:
                far[w] = max(reach)
        floors[v] = max(asap[w] - d for w, d in far.items())
    return floors


def edge_delay(g: Dfg, a: CgraArch, e: DfgEdge, src_pe: int, dst_pe: int, slack: int = 0) -> int:
    """Minimum cycles from the src start to the dst start within one iteration frame."""
    if e.kind == "order":
        return e.gap
    return g.nodes[e.src].latency + a.hops(src_pe, dst_pe) + slack


def list_schedule(
    g: Dfg,
    a: CgraArch,
    ii: int,
    *,
    placement: Optional[Mapping[int, int]] = None,
    slack: int = 0,
    spread: bool = True,
    rng: Optional[random.Random] = None,
    wander: float = 0.5,
) -> Tuple[Dict[int, int], Dict[int, int]]:
    """Place and time every op, one recurrence at a time, at the earliest free slot.

    Candidates rank by start time, then PE load (with `spread`), then wire length.
    Memory PEs keep enough free slots for the memory ops still pinned to them.
    With `rng` each op takes a random feasible (PE, cycle) with probability
    `wander` instead of the best one. With `placement` the PEs are fixed and
    only times are chosen. Returns (binding, schedule); raises ScheduleFailure
    naming the node that did not fit.
    """
    table = ReservationTable(ii)
    binding: Dict[int, int] = {}
    sched: Dict[int, int] = {}
    load: Dict[int, int] = {}
    ins: Dict[int, List[DfgEdge]] = {}
    outs: Dict[int, List[DfgEdge]] = {}
    for e in g.edges:
        if g.nodes[e.src].is_const:
            continue
        ins.setdefault(e.dst, []).append(e)
        outs.setdefault(e.src, []).append(e)
    # memory PE -> FU slots its unscheduled memory ops still need
    reserve: Dict[int, int] = {}
    if placement is None:
        for n in g.ops:
            if n.is_memory:
                p = allowed_pes(n, a)[0]
                reserve[p] = reserve.get(p, 0) + a.busy(n.op)

    for comp in recurrence_order(g):
        floors = recurrence_floors(g, comp, sched, ii, ins)
        for v in comp:
            node = g.nodes[v]
            busy = a.busy(node.op)
            if busy > ii:
                raise ScheduleFailure(f"resource: {node.op} node {v} keeps its FU busy {busy} cycles > II {ii}")
            pes = [placement[v]] if placement is not None else allowed_pes(node, a)
            candidates: List[Tuple[tuple, int, int]] = []
            recurrence_block = False
            for p in pes:
                if not node.is_memory and ii - table.used(p) - busy < reserve.get(p, 0):
                    continue
                est, lst = floors.get(v, 0), None
                feasible = True
                for e in ins.get(v, []):
                    if e.src == v:
                        if edge_delay(g, a, e, p, p) > ii * e.distance:
                            feasible = False
                        continue
                    if e.src in sched:
                        d = edge_delay(g, a, e, binding[e.src], p, slack)
                        est = max(est, sched[e.src] + d - ii * e.distance)
                for e in outs.get(v, []):
                    if e.dst != v and e.dst in sched:
                        d = edge_delay(g, a, e, p, binding[e.dst])
                        bound = sched[e.dst] + ii * e.distance - d
                        lst = bound if lst is None else min(lst, bound)
                if not feasible or (lst is not None and lst < est):
                    recurrence_block = True
                    continue
                hi = est + ii - 1 if lst is None else min(lst, est + ii - 1)
                times = [t for t in range(est, hi + 1) if table.free(p, t, busy, node.latency)]
                if not times:
                    continue
                wire = sum(a.hops(binding[e.src], p) for e in ins.get(v, []) if e.src in binding and e.src != v)
                wire += sum(a.hops(p, binding[e.dst]) for e in outs.get(v, []) if e.dst in binding and e.dst != v)
                for t in times if rng is not None else times[:1]:
                    key = (t, load.get(p, 0), wire, p) if spread else (t, wire, p)
                    candidates.append((key, p, t))
            if not candidates:
                kind = "recurrence" if recurrence_block else "resource"
                raise ScheduleFailure(f"{kind}: no PE/cycle for {node.op} node {v} at II {ii}")
            if rng is not None and rng.random() < wander:
                _, p, t = candidates[rng.randrange(len(candidates))]
            else:
                _, p, t = min(candidates)
            table.take(p, t, busy, v, node.latency)
            binding[v], sched[v] = p, t
            load[p] = load.get(p, 0) + busy
            if node.is_memory and p in reserve:
                reserve[p] -= busy
    return binding, sched
