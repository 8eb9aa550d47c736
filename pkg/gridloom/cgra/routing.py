from __future__ import annotations

from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Tuple

from gridloom.cgra.arch import CgraArch
from gridloom.cgra.mapping import CHANNEL, REGISTER, Hop, Route, Usage, route_usage
from gridloom.dfg.graph import Dfg
from gridloom.util.log import make_debug

_debug = make_debug("cgra.route")

_INF = float("inf")


class Occupancy:
    """Who uses each modulo resource. Capacity: 1 per link, `registers` per PE register file."""

    def __init__(self, registers: int):
        self.registers = registers
        self.users: Dict[tuple, Dict[Tuple[int, int], int]] = {}

    def capacity(self, key: tuple) -> int:
        return self.registers if key[0] == "reg" else 1

    def add(self, usages: Iterable[Usage]) -> None:
        for key, occ in usages:
            slot = self.users.setdefault(key, {})
            slot[occ] = slot.get(occ, 0) + 1

    def remove(self, usages: Iterable[Usage]) -> None:
        for key, occ in usages:
            slot = self.users[key]
            slot[occ] -= 1
            if slot[occ] == 0:
                del slot[occ]
            if not slot:
                del self.users[key]

    def overuse(self) -> Dict[tuple, int]:
        out = {}
        for key, occ in self.users.items():
            extra = len(occ) - self.capacity(key)
            if extra > 0:
                out[key] = extra
        return out

    def step_cost(self, key: tuple, occ: Tuple[int, int], hist: Mapping[tuple, float], pres: float, hard: bool) -> float:
        slot = self.users.get(key, {})
        if occ in slot:
            return 0.0
        extra = len(slot) + 1 - self.capacity(key)
        if hard and extra > 0:
            return _INF
        return (1.0 + hist.get(key, 0.0)) * (1.0 + pres * max(0, extra))


def _steps(a: CgraArch, pe: int) -> List[Tuple[int, str]]:
    """Successor locations in preference order: stay (register) first, then moves by PE index."""
    return [(pe, REGISTER)] + [(q, CHANNEL) for q, _ in a.moves(pe)]


def _step_usage(a: CgraArch, ii: int, src: int, here: int, cycle: int, to: int, res: str) -> List[Usage]:
    occ = (src, cycle)
    if res == REGISTER:
        return [(("reg", here, cycle % ii), occ)]
    links = dict(a.moves(here))[to]
    return [(("link", x, y, cycle % ii), occ) for x, y in links]


def find_route(
    a: CgraArch,
    ii: int,
    src: int,
    src_pe: int,
    start: int,
    dst_pe: int,
    arrival: int,
    occ: Occupancy,
    *,
    hist: Optional[Mapping[tuple, float]] = None,
    pres: float = 0.0,
    hard: bool = False,
) -> Optional[Tuple[Hop, ...]]:
    """Cheapest hop sequence taking exactly `arrival - start` cycles, or None.

    Layered dynamic program over (PE, cycle). Ties keep the first candidate
    found, i.e. the lowest predecessor PE in row-major order.
    """
    hist = hist or {}
    length = arrival - start
    if length < 0 or a.hops(src_pe, dst_pe) > length:
        return None
    if length == 0:
        return ()
    # layer[pe] = (cost, hops so far)
    layer: Dict[int, Tuple[float, Tuple[Hop, ...]]] = {src_pe: (0.0, ())}
    for step in range(length):
        cycle = start + step
        left = length - step - 1
        nxt: Dict[int, Tuple[float, Tuple[Hop, ...]]] = {}
        for here in sorted(layer):
            base, path = layer[here]
            for to, res in _steps(a, here):
                if a.hops(to, dst_pe) > left:
                    continue
                cost = base
                for key, o in _step_usage(a, ii, src, here, cycle, to, res):
                    cost += occ.step_cost(key, o, hist, pres, hard)
                if cost == _INF:
                    continue
                if to not in nxt or cost < nxt[to][0]:
                    nxt[to] = (cost, path + (Hop(to, cycle + 1, res),))
        if not nxt:
            return None
        layer = nxt
    if dst_pe not in layer:
        return None
    return layer[dst_pe][1]


def all_routes(a: CgraArch, src_pe: int, start: int, dst_pe: int, arrival: int) -> Iterator[Tuple[Hop, ...]]:
    """Every hop sequence of the exact length, in preference order."""
    length = arrival - start
    if length < 0 or a.hops(src_pe, dst_pe) > length:
        return

    def walk(here: int, cycle: int, path: Tuple[Hop, ...]) -> Iterator[Tuple[Hop, ...]]:
        left = arrival - cycle
        if left == 0:
            if here == dst_pe:
                yield path
            return
        for to, res in _steps(a, here):
            if a.hops(to, dst_pe) <= left - 1:
                yield from walk(to, cycle + 1, path + (Hop(to, cycle + 1, res),))

    yield from walk(src_pe, start, ())


# -----------------
# whole-graph routing
# -----------------
RouteJob = Tuple[int, int, int, int, int, int]  # edge index, src, src_pe, start, dst_pe, arrival


def route_jobs(g: Dfg, ii: int, binding: Mapping[int, int], schedule: Mapping[int, int]) -> List[RouteJob]:
    jobs: List[RouteJob] = []
    for k, e in enumerate(g.edges):
        if e.kind != "data" or g.nodes[e.src].is_const:
            continue
        start = schedule[e.src] + g.nodes[e.src].latency
        arrival = schedule[e.dst] + ii * e.distance
        jobs.append((k, e.src, binding[e.src], start, binding[e.dst], arrival))
    return jobs


def _timing_problem(a: CgraArch, g: Dfg, jobs: List[RouteJob]) -> Optional[str]:
    for k, src, sp, start, dp, arrival in jobs:
        need = a.hops(sp, dp)
        if arrival - start < need:
            e = g.edges[k]
            return f"edge {e.src}->{e.dst} has {arrival - start} cycles for {need} hops"
    return None


def negotiate(
    g: Dfg,
    a: CgraArch,
    ii: int,
    binding: Mapping[int, int],
    schedule: Mapping[int, int],
    *,
    rounds: int,
) -> Tuple[Optional[Dict[int, Route]], str]:
    """PathFinder: reroute every edge each round, growing present and history congestion costs."""
    jobs = route_jobs(g, ii, binding, schedule)
    problem = _timing_problem(a, g, jobs)
    if problem:
        return None, f"routing: {problem}"
    occ = Occupancy(a.pass_registers)
    hist: Dict[tuple, float] = {}
    routes: Dict[int, Route] = {}
    pres = 0.5
    over: Dict[tuple, int] = {}
    for rnd in range(max(1, rounds)):
        for k, src, sp, start, dp, arrival in jobs:
            if k in routes:
                occ.remove(route_usage(routes[k], sp, a, ii))
            hops = find_route(a, ii, src, sp, start, dp, arrival, occ, hist=hist, pres=pres)
            if hops is None:
                e = g.edges[k]
                return None, f"routing: no path for edge {e.src}->{e.dst}"
            routes[k] = Route(edge=k, src=src, dst=g.edges[k].dst, start=start, hops=hops)
            occ.add(route_usage(routes[k], sp, a, ii))
        over = occ.overuse()
        if not over:
            _debug(f"II={ii}: routed {len(jobs)} edges in {rnd + 1} round(s)")
            return routes, ""
        for key, extra in over.items():
            hist[key] = hist.get(key, 0.0) + extra
        pres *= 2.0
    worst = sorted(over)[0]
    return None, f"routing: {len(over)} congested resources after {rounds} rounds (e.g. {worst})"


def route_exact(
    g: Dfg, a: CgraArch, ii: int, binding: Mapping[int, int], schedule: Mapping[int, int]
) -> Optional[Dict[int, Route]]:
    """Complete search: backtrack over every path of every edge under hard capacities."""
    jobs = route_jobs(g, ii, binding, schedule)
    if _timing_problem(a, g, jobs):
        return None
    occ = Occupancy(a.pass_registers)
    chosen: Dict[int, Route] = {}

    def fits(usages: List[Usage]) -> bool:
        trial: Dict[tuple, set] = {}
        for key, o in usages:
            trial.setdefault(key, set(occ.users.get(key, {}))).add(o)
        return all(len(v) <= occ.capacity(k) for k, v in trial.items())

    def place(i: int) -> bool:
        if i == len(jobs):
            return True
        k, src, sp, start, dp, arrival = jobs[i]
        for hops in all_routes(a, sp, start, dp, arrival):
            r = Route(edge=k, src=src, dst=g.edges[k].dst, start=start, hops=hops)
            usage = list(route_usage(r, sp, a, ii))
            if not fits(usage):
                continue
            occ.add(usage)
            chosen[k] = r
            if place(i + 1):
                return True
            occ.remove(usage)
            del chosen[k]
        return False

    return dict(chosen) if place(0) else None
