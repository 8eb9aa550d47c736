from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Tuple

from gridloom.cgra.arch import CgraArch
from gridloom.dfg.graph import Dfg

CHANNEL = "channel"
REGISTER = "register"

# (resource key, occupant). Keys are ("reg", pe, phase) or ("link", from, to, phase);
# the occupant (src node, absolute cycle) identifies one value instance, so fan-out
# routes of the same value may share a resource.
Usage = Tuple[tuple, Tuple[int, int]]


@dataclass(frozen=True)
class Hop:
    """The value reaches `pe` at `cycle`, via a channel move or by staying in a register."""

    pe: int
    cycle: int
    resource: str


@dataclass(frozen=True)
class Route:
    edge: int  # index into Dfg.edges
    src: int
    dst: int
    start: int  # cycle the value leaves the producer's output latch
    hops: Tuple[Hop, ...] = ()

    @property
    def slots(self) -> int:
        return len(self.hops)

    @property
    def arrival(self) -> int:
        return self.start + len(self.hops)


@dataclass
class CgraMapping:
    ii: int
    binding: Dict[int, int] = field(default_factory=dict)  # node -> PE
    schedule: Dict[int, int] = field(default_factory=dict)  # node -> start cycle
    routes: Dict[int, Route] = field(default_factory=dict)  # edge index -> route
    strategy: str = ""
    seed: int = 0

    def makespan(self, g: Dfg) -> int:
        return max((self.schedule[n.id] + n.latency for n in g.ops if n.id in self.schedule), default=0)

    def route_slots(self) -> int:
        return sum(r.slots for r in self.routes.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ii": self.ii,
            "strategy": self.strategy,
            "seed": self.seed,
            "binding": {str(k): v for k, v in sorted(self.binding.items())},
            "schedule": {str(k): v for k, v in sorted(self.schedule.items())},
            "routes": {
                str(k): {"src": r.src, "dst": r.dst, "start": r.start, "hops": [[h.pe, h.cycle, h.resource] for h in r.hops]}
                for k, r in sorted(self.routes.items())
            },
        }


def route_usage(route: Route, src_pe: int, a: CgraArch, ii: int) -> Iterator[Usage]:
    """Modulo resources a route occupies, one entry per unit link or register step."""
    here, cycle = src_pe, route.start
    for h in route.hops:
        occupant = (route.src, cycle)
        if h.resource == REGISTER:
            yield ("reg", here, cycle % ii), occupant
        else:
            links = dict(a.moves(here)).get(h.pe)
            # an illegal step has no links; validate_mapping reports it separately
            for x, y in links or ():
                yield ("link", x, y, cycle % ii), occupant
        here, cycle = h.pe, h.cycle
    return


def format_mapping(m: CgraMapping, g: Dfg) -> str:
    """Deterministic text report: header, one NODE line per op, one ROUTE line per routed edge."""
    lines: List[str] = [
        f"MAPPING {g.name} II={m.ii} strategy={m.strategy or '-'} seed={m.seed} "
        f"makespan={m.makespan(g)} route_slots={m.route_slots()}"
    ]
    for n in g.ops:
        label = n.op if n.variant is None else f"{n.op}.{n.variant}"
        lines.append(f"NODE {n.id} {label} pe={m.binding.get(n.id, -1)} t={m.schedule.get(n.id, -1)}")
    for k in sorted(m.routes):
        r = m.routes[k]
        e = g.edges[k]
        hops = ",".join(f"{h.pe}@{h.cycle}:{'R' if h.resource == REGISTER else 'C'}" for h in r.hops) or "-"
        lines.append(f"ROUTE {r.src}->{r.dst} pos={e.pos} dist={e.distance} start={r.start} hops={hops}")
    return "\n".join(lines) + "\n"
