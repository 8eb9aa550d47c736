from __future__ import annotations

from typing import Dict, List, Set, Tuple

from gridloom.cgra.arch import CgraArch
from gridloom.cgra.mapping import CHANNEL, REGISTER, CgraMapping, route_usage
from gridloom.dfg.graph import Dfg


def validate_mapping(m: CgraMapping, g: Dfg, a: CgraArch) -> List[str]:
    """All violations of the mapping rules; empty means the mapping is valid.

    Resource exclusivity is checked over one II window of modulo phases, which
    covers every cycle by periodicity.
    """
    out: List[str] = []
    if m.ii < 1:
        return [f"II must be >= 1, got {m.ii}"]

    # -----------------
    # binding and schedule
    # -----------------
    fu: Dict[Tuple[int, int], int] = {}
    latch: Dict[Tuple[int, int], int] = {}
    for n in g.ops:
        if n.id not in m.binding or n.id not in m.schedule:
            out.append(f"node {n.id} ({n.op}) is not bound or not scheduled")
            continue
        pe, t = m.binding[n.id], m.schedule[n.id]
        if not 0 <= pe < a.pe_count:
            out.append(f"node {n.id} bound to PE {pe} outside the {a.rows}x{a.cols} grid")
            continue
        if t < 0:
            out.append(f"node {n.id} starts at negative cycle {t}")
        if n.is_memory:
            bank = int(n.bank or 0)
            owner = a.memory_pes[bank] if bank < a.banks else None
            if pe != owner:
                out.append(
                    f"memory-affinity: {n.op} node {n.id} on PE {pe}; only the border PEs with SPM access "
                    f"may execute it (bank {bank} belongs to PE {owner})"
                )
        busy = a.busy(n.op)
        if busy > m.ii:
            out.append(f"node {n.id} ({n.op}) is busy {busy} cycles, more than II {m.ii}")
        for j in range(min(busy, m.ii)):
            key = (pe, (t + j) % m.ii)
            if key in fu:
                out.append(f"FU conflict on PE {pe} phase {key[1]}: nodes {fu[key]} and {n.id}")
            else:
                fu[key] = n.id
        key = (pe, (t + n.latency) % m.ii)
        if key in latch:
            out.append(f"output latch conflict on PE {pe} phase {key[1]}: nodes {latch[key]} and {n.id} finish together")
        else:
            latch[key] = n.id
    if out:
        return out

    # -----------------
    # edges and routes
    # -----------------
    routed: Set[int] = set()
    for k, e in enumerate(g.edges):
        src, dst = g.nodes[e.src], g.nodes[e.dst]
        if src.is_const:
            continue
        if e.kind == "order":
            if m.schedule[e.dst] + m.ii * e.distance < m.schedule[e.src] + e.gap:
                out.append(f"memory order violated on edge {e.src}->{e.dst} (distance {e.distance}, gap {e.gap})")
            continue
        routed.add(k)
        r = m.routes.get(k)
        if r is None:
            out.append(f"edge {e.src}->{e.dst} (pos {e.pos}) has no route")
            continue
        start = m.schedule[e.src] + src.latency
        want = m.schedule[e.dst] + m.ii * e.distance
        if r.src != e.src or r.dst != e.dst:
            out.append(f"route for edge {k} connects {r.src}->{r.dst}, expected {e.src}->{e.dst}")
        if r.start != start or r.arrival != want:
            out.append(
                f"timing violation on edge {e.src}->{e.dst}: value ready at {start}, route "
                f"{r.start}..{r.arrival}, consumer reads at {want}"
            )
        here, cycle = m.binding[e.src], r.start
        for h in r.hops:
            if h.cycle != cycle + 1:
                out.append(f"route {e.src}->{e.dst}: hop at cycle {h.cycle} does not follow cycle {cycle}")
            if h.resource == REGISTER and h.pe != here:
                out.append(f"route {e.src}->{e.dst}: register hop changes PE {here}->{h.pe}")
            if h.resource == CHANNEL and h.pe not in dict(a.moves(here)):
                out.append(f"route {e.src}->{e.dst}: PE {h.pe} not reachable from PE {here} in one hop")
            here, cycle = h.pe, h.cycle
        if here != m.binding[e.dst]:
            out.append(f"route {e.src}->{e.dst} ends on PE {here}, consumer is on PE {m.binding[e.dst]}")
    for k in m.routes:
        if k not in routed:
            out.append(f"route for edge {k} does not correspond to a routed data edge")

    # -----------------
    # channel and register exclusivity
    # -----------------
    users: Dict[tuple, Set[Tuple[int, int]]] = {}
    for k in sorted(routed & set(m.routes)):
        r = m.routes[k]
        for key, occ in route_usage(r, m.binding[r.src], a, m.ii):
            users.setdefault(key, set()).add(occ)
    for key in sorted(users):
        cap = a.pass_registers if key[0] == "reg" else 1
        if len(users[key]) > cap:
            what = f"pass-through registers of PE {key[1]}" if key[0] == "reg" else f"channel {key[1]}->{key[2]}"
            out.append(f"{what} over capacity at phase {key[-1]}: {len(users[key])} values, capacity {cap}")
    return out
