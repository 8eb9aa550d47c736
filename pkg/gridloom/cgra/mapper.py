from __future__ import annotations

import math
import random
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Iterator, List, Optional, Tuple

from gridloom.cgra.arch import CgraArch
from gridloom.cgra.exhaustive import MAX_NODES, exhaustive_map, within_guard
from gridloom.cgra.mapping import CgraMapping
from gridloom.cgra.routing import negotiate, route_exact
from gridloom.cgra.schedule import ScheduleFailure, allowed_pes, list_schedule
from gridloom.cgra.validate import validate_mapping
from gridloom.config import Config, load_config
from gridloom.dfg.analysis import rec_mii, res_mii
from gridloom.dfg.graph import Dfg
from gridloom.errors import MappingFailed
from gridloom.util.log import make_debug

_debug = make_debug("cgra.mapper")

STRATEGIES = ("heuristic", "anneal")

# (slack added to every data edge, rank PEs by load before wire length)
_HEURISTIC_VARIANTS = ((0, True), (1, True), (0, False), (2, False))

# small graphs get this many times more randomized restarts
_SMALL_GRAPH_RESTARTS = 8

Result = Tuple[Optional[CgraMapping], str]


def _require(cond: bool, msg: str, *, ii: int, bottleneck: str) -> None:
    if not cond:
        raise MappingFailed(msg, last_ii=ii, bottleneck=bottleneck)


def _restarts(g: Dfg, cfg: Config) -> int:
    n = max(0, cfg.CGRA_RESTARTS)
    return n * _SMALL_GRAPH_RESTARTS if g.node_count <= MAX_NODES else n


def _attempts(g: Dfg, ii: int, cfg: Config, variants, seed: Optional[int]) -> Iterator[Tuple[int, bool, Optional[random.Random]]]:
    for slack, spread in variants:
        yield slack, spread, None
    if seed is None:
        return
    for r in range(_restarts(g, cfg)):
        yield r % 2, True, random.Random(seed * 1_000_003 + ii * 7919 + r)


def _route(g: Dfg, a: CgraArch, ii: int, cfg: Config, binding: Dict[int, int], sched: Dict[int, int]):
    routes, why = negotiate(g, a, ii, binding, sched, rounds=cfg.PATHFINDER_ROUNDS)
    if routes is None and within_guard(g, a):
        routes = route_exact(g, a, ii, binding, sched)
    return routes, why


def _schedule_and_route(
    g: Dfg,
    a: CgraArch,
    ii: int,
    cfg: Config,
    *,
    placement: Optional[Dict[int, int]] = None,
    variants=_HEURISTIC_VARIANTS,
    seed: Optional[int] = None,
) -> Result:
    """Fixed list-scheduling variants first, then seeded randomized restarts."""
    reason = ""
    for slack, spread, rng in _attempts(g, ii, cfg, variants, seed):
        try:
            binding, sched = list_schedule(g, a, ii, placement=placement, slack=slack, spread=spread, rng=rng)
        except ScheduleFailure as e:
            reason = e.reason
            continue
        routes, why = _route(g, a, ii, cfg, binding, sched)
        if routes is None:
            reason = why
            continue
        m = CgraMapping(ii=ii, binding=binding, schedule=sched, routes=routes)
        problems = validate_mapping(m, g, a)
        if not problems:
            return m, ""
        reason = f"internal: produced an invalid mapping ({problems[0]})"
    return None, reason


# -----------------
# simulated annealing over placements
# -----------------
def _placement_cost(g: Dfg, a: CgraArch, ii: int, place: Dict[int, int]) -> float:
    wire = 0
    for e in g.edges:
        if e.kind == "data" and not g.nodes[e.src].is_const and e.src != e.dst:
            wire += a.hops(place[e.src], place[e.dst])
    load: Dict[int, int] = {}
    for n in g.ops:
        load[place[n.id]] = load.get(place[n.id], 0) + a.busy(n.op)
    crowd = sum(max(0, v - ii) for v in load.values())
    # quadratic in the per-PE load so ops spread onto idle PEs
    spread = sum(v * v for v in load.values()) / max(1, ii)
    return wire + 10.0 * crowd + spread

def _anneal_placement(g: Dfg, a: CgraArch, ii: int, cfg: Config, rng: random.Random) -> Dict[int, int]:
    choices = {n.id: allowed_pes(n, a) for n in g.ops}
    movable = [v for v, pes in choices.items() if len(pes) > 1]
    place = {v: rng.choice(pes) for v, pes in choices.items()}
    cost = _placement_cost(g, a, ii, place)
    if not movable:
        return place

    def propose() -> Dict[int, int]:
        v = rng.choice(movable)
        q = rng.choice(choices[v])
        cand = dict(place)
        others = [w for w, p in place.items() if p == q and w != v and place[v] in choices[w]]
        if others and rng.random() < 0.5:
            cand[rng.choice(sorted(others))] = place[v]
        cand[v] = q
        return cand

    # calibrate the start temperature on a sample of uphill moves
    ups = []
    for _ in range(50):
        delta = _placement_cost(g, a, ii, propose()) - cost
        if delta > 0:
            ups.append(delta)
    accept = min(max(cfg.ANNEAL_INITIAL_ACCEPT, 1e-6), 0.999)
    temp0 = (sum(ups) / len(ups)) / -math.log(accept) if ups else 1.0
    temp = temp0
    best, best_cost = dict(place), cost
    while temp > cfg.ANNEAL_MIN_TEMP * temp0:
        accepted = 0
        for _ in range(cfg.ANNEAL_MOVES_PER_TEMP):
            cand = propose()
            c = _placement_cost(g, a, ii, cand)
            if c <= cost or rng.random() < math.exp((cost - c) / temp):
                place, cost = cand, c
                accepted += 1
                if c < best_cost:
                    best, best_cost = dict(cand), c
        if accepted == 0:
            break
        temp *= cfg.ANNEAL_COOLING
    return best


def _anneal_candidate(g: Dfg, a: CgraArch, ii: int, cfg: Config, seed: int, index: int) -> Result:
    rng = random.Random(seed * 1_000_003 + index * 7919 + ii)
    place = _anneal_placement(g, a, ii, cfg, rng)
    return _schedule_and_route(g, a, ii, cfg, placement=place, variants=((0, False), (1, False), (2, False)))


def _anneal(g: Dfg, a: CgraArch, ii: int, cfg: Config, seed: int) -> Result:
    n = max(1, cfg.ANNEAL_CANDIDATES)
    with ThreadPoolExecutor(max_workers=n) as pool:
        results = list(pool.map(lambda i: _anneal_candidate(g, a, ii, cfg, seed, i), range(n)))
    ok = [(m.route_slots(), m.makespan(g), i, m) for i, (m, _) in enumerate(results) if m is not None]
    if ok:
        return min(ok, key=lambda r: r[:3])[3], ""
    # fall back on list scheduling when every annealed placement fails
    m, why = _schedule_and_route(g, a, ii, cfg, seed=seed)
    return m, why or results[0][1]


# -----------------
# public entry
# -----------------
def map_dfg(
    g: Dfg,
    a: CgraArch,
    strategy: str = "heuristic",
    seed: Optional[int] = None,
    ii_limit: Optional[int] = None,
    *,
    exact_fallback: bool = True,
) -> CgraMapping:
    """Modulo-map `g` onto `a` at the smallest II this strategy reaches.

    Starts from max(RecMII, ResMII) and raises the II after each failed attempt.
    Each II tries the fixed list-scheduling variants, then CGRA_RESTARTS randomized
    passes drawn from `seed`; the same arguments always give the same mapping.
    Small instances (inside the exhaustive guard) fall back on the exact search
    before the II is raised.
    """
    cfg = load_config()
    seed = cfg.SEED if seed is None else int(seed)
    ii_limit = cfg.CGRA_II_LIMIT if ii_limit is None else int(ii_limit)
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")

    if g.node_count == 0:
        return CgraMapping(ii=1, strategy=strategy, seed=seed)

    for n in g.ops:
        if n.is_memory:
            _require(
                a.banks > 0 and int(n.bank or 0) < a.banks,
                f"{n.op} node {n.id} uses bank {n.bank} but the array has {a.banks} memory PEs",
                ii=0,
                bottleneck="binding: no memory-capable PE for the bank",
            )

    rec, res = rec_mii(g), res_mii(g, a.pe_count)
    ii0 = max(rec, res)
    _debug(f"{g.name}: {g.node_count} nodes on {a.rows}x{a.cols}, RecMII={rec} ResMII={res}")
    if ii0 > ii_limit:
        which = f"resource bound {res}" if res >= rec else f"recurrence bound {rec}"
        raise MappingFailed(f"{g.name}: lower bound II {ii0} exceeds limit {ii_limit}", last_ii=ii_limit, bottleneck=which)

    last = ""
    for ii in range(ii0, ii_limit + 1):
        if strategy == "anneal":
            m, why = _anneal(g, a, ii, cfg, seed)
        else:
            m, why = _schedule_and_route(g, a, ii, cfg, seed=seed)
        if m is None and exact_fallback and within_guard(g, a):
            m = exhaustive_map(g, a, ii)
        if m is not None:
            problems = validate_mapping(m, g, a)
            if problems:
                why = f"internal: produced an invalid mapping ({problems[0]})"
                m = None
        if m is not None:
            m.strategy, m.seed = strategy, seed
            _debug(f"{g.name}: mapped at II={ii}, makespan={m.makespan(g)}, route slots={m.route_slots()}")
            return m
        _debug(f"{g.name}: II={ii} failed ({why})")
        last = why or "no placement found"
    raise MappingFailed(f"{g.name}: no mapping up to II {ii_limit}", last_ii=ii_limit, bottleneck=last)
