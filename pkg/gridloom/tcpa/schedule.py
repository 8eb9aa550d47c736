from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from gridloom.errors import ScheduleError
from gridloom.pra.model import PraProgram
from gridloom.tcpa.analysis import TileAnalysis, tile_analysis
from gridloom.tcpa.arch import OP_KIND, TcpaArch
from gridloom.tcpa.tiling import Point, Tiling
from gridloom.util.log import make_debug

_debug = make_debug("tcpa.schedule")

# Highest II tried before giving up.
II_LIMIT = 64


@dataclass(frozen=True)
class TcpaSchedule:
    """Start of iteration (j, k) is lambda_j . j + lambda_k . k; equation i starts `starts[i]` later."""

    ii: int
    lambda_j: Tuple[int, ...]
    lambda_k: Tuple[int, ...]
    labels: Tuple[str, ...]
    starts: Tuple[int, ...]  # tau per equation
    latencies: Tuple[int, ...]  # w per equation
    fus: Tuple[str, ...]  # FU per equation
    # tile -> cycle its last active operation retires, relative to the tile start; idle tiles are absent
    tails: Tuple[Tuple[Point, int], ...] = ()

    @property
    def makespan(self) -> int:
        return max((s + w for s, w in zip(self.starts, self.latencies)), default=0)

    def tile_start(self, k: Point) -> int:
        return sum(a * b for a, b in zip(self.lambda_k, k))

    def iteration_start(self, k: Point, j: Point) -> int:
        return sum(a * b for a, b in zip(self.lambda_j, j)) + self.tile_start(k)

    def completion(self, pos: int) -> int:
        return self.starts[pos] + self.latencies[pos]

    @property
    def active_tiles(self) -> Tuple[Point, ...]:
        return tuple(k for k, _ in self.tails)

    def to_dict(self) -> dict:
        return {
            "ii": self.ii,
            "lambda_j": list(self.lambda_j),
            "lambda_k": list(self.lambda_k),
            "makespan": self.makespan,
            "equations": [
                {"label": lb, "start": s, "latency": w, "fu": f}
                for lb, s, w, f in zip(self.labels, self.starts, self.latencies, self.fus)
            ],
        }


# -----------------
# difference constraints
# -----------------
Edge = Tuple[int, int, int, str]  # tau[dst] >= tau[src] + weight, reason


def _edges(an: TileAnalysis, lat: Sequence[int], lambda_j: Sequence[int]) -> List[Edge]:
    p = an.program
    out: List[Edge] = []
    for ic in an.instances:
        if ic.inter:
            continue
        w = lat[ic.producer] - sum(a * b for a, b in zip(lambda_j, ic.jdiff))
        reason = f"{an.labels[ic.producer]} -> {an.labels[ic.dep.pos]} ({ic.dep.var} at distance {ic.dep.d})"
        out.append((ic.producer, ic.dep.pos, w, reason))
    # writers of one variable finish together so FIFOs see values in iteration order
    for v in p.internals:
        ws = [i for i, e in enumerate(p.equations) if e.target.var == v.name]
        for a in ws:
            for b in ws:
                if a != b:
                    out.append((a, b, lat[a] - lat[b], f"writers of {v.name} aligned"))
    return out


def _solve(n: int, edges: List[Edge], lower: Sequence[int]) -> Tuple[Optional[List[int]], str]:
    """Least non-negative solution by longest-path relaxation; a positive cycle means infeasible."""
    tau = list(lower)
    for _ in range(n + 1):
        changed = False
        for s, d, w, _reason in edges:
            if tau[s] + w > tau[d]:
                tau[d] = tau[s] + w
                changed = True
        if not changed:
            return tau, ""
    for s, d, w, reason in edges:
        if tau[s] + w > tau[d]:
            return None, reason
    return tau, ""


def _latencies(p: PraProgram, a: TcpaArch) -> List[int]:
    out = []
    for e in p.equations:
        kind = OP_KIND[e.op]
        if not a.fus_of(kind):
            raise ScheduleError(f"{e.label} needs a {kind} unit; {a.name} has none")
        out.append(a.kind_latency(kind))
    return out


def dependence_feasible(p: PraProgram, t: Tiling, a: TcpaArch, ii: int) -> bool:
    """Whether the intra-tile dependence inequalities admit start offsets at this II."""
    an = tile_analysis(p, t)
    lat = _latencies(p, a)
    lambda_j = tuple(ii * s for s in t.strides)
    tau, _ = _solve(len(lat), _edges(an, lat, lambda_j), [0] * len(lat))
    return tau is not None


def _resource_bound(an: TileAnalysis, a: TcpaArch) -> int:
    p = an.program
    bound = 1
    for kind in {OP_KIND[e.op] for e in p.equations}:
        fus = a.fus_of(kind)
        busy = fus[0].busy
        most = max((sum(1 for pos in s if OP_KIND[p.equations[pos].op] == kind) for s in an.active_sets), default=0)
        bound = max(bound, math.ceil(most * busy / len(fus)))
        if most:
            bound = max(bound, busy)
    return bound


def _place(an: TileAnalysis, a: TcpaArch, ii: int, lat: List[int]) -> Tuple[Optional[Tuple[List[int], List[str]]], str]:
    """Start offsets and FU binding at one II, or the reason it failed.

    Two equations may share an FU phase only when they never run in the same
    iteration and start at the same offset, so they stand for one another.
    """
    p = an.program
    n = len(lat)
    lambda_j = tuple(ii * s for s in an.tiling.strides)
    edges = _edges(an, lat, lambda_j)
    lower = [0] * n
    horizon = 4 * (sum(lat) + ii * (n + 1)) + 16
    while True:
        tau, reason = _solve(n, edges, lower)
        if tau is None:
            return None, f"recurrence: {reason}"
        table: Dict[Tuple[str, int], List[int]] = {}
        fu_of = [""] * n
        delayed = False
        for pos in sorted(range(n), key=lambda i: (tau[i], i)):
            kind = OP_KIND[p.equations[pos].op]
            for fu in a.fus_of(kind):
                phases = [(tau[pos] + b) % ii for b in range(fu.busy)]
                if all(
                    not an.coactive(pos, o) and tau[o] == tau[pos]
                    for ph in phases
                    for o in table.get((fu.name, ph), ())
                ):
                    for ph in phases:
                        table.setdefault((fu.name, ph), []).append(pos)
                    fu_of[pos] = fu.name
                    break
            else:
                lower[pos] = tau[pos] + 1
                if lower[pos] > horizon:
                    return None, f"resource: no free {kind} unit for {an.labels[pos]}"
                delayed = True
                break
        if not delayed:
            return (tau, fu_of), ""


def _lambda_k(an: TileAnalysis, t: Tiling, tau: Sequence[int], lat: Sequence[int], lambda_j: Sequence[int]) -> Tuple[int, ...]:
    """Minimal non-negative inter-tile vector; multi-dimensional crossings raise their last component."""
    cons = []
    for ic in an.instances:
        if not ic.inter:
            continue
        rhs = lat[ic.producer] + ic.hops + tau[ic.producer] - tau[ic.dep.pos]
        rhs -= sum(a * b for a, b in zip(lambda_j, ic.jdiff))
        cons.append((ic.delta, rhs))
    lam = [0] * t.n
    for delta, rhs in cons:
        nz = [d for d, v in enumerate(delta) if v]
        if len(nz) == 1:
            lam[nz[0]] = max(lam[nz[0]], math.ceil(rhs / delta[nz[0]]))
    changed = True
    while changed:
        changed = False
        for delta, rhs in cons:
            have = sum(a * b for a, b in zip(lam, delta))
            if have < rhs:
                last = max(d for d, v in enumerate(delta) if v)
                lam[last] += math.ceil((rhs - have) / delta[last])
                changed = True
    return tuple(lam)


def _tile_tails(an: TileAnalysis, ii: int, tau: Sequence[int], lat: Sequence[int]) -> Tuple[Tuple[Point, int], ...]:
    """Per tile, the retire cycle of its last executed operation; tiles where no equation is active are left out."""
    ends = [max((tau[op.pos] + lat[op.pos] for op in pat), default=None) for pat in an.patterns]
    out = []
    for k in sorted(an.sequence):
        done = [ii * o + ends[pid] for o, pid in enumerate(an.sequence[k]) if ends[pid] is not None]
        if done:
            out.append((k, max(done)))
    return tuple(out)


def schedule_loop(p: PraProgram, t: Tiling, a: TcpaArch, *, ii_limit: int = II_LIMIT) -> TcpaSchedule:
    """Modulo-schedule the equations of one tile and derive the schedule vector.

    II starts at the resource bound and grows until the intra-tile dependence
    inequalities and the FU sharing rules admit start offsets.
    """
    an = tile_analysis(p, t)
    lat = _latencies(p, a)
    ii = _resource_bound(an, a)
    reason = "no equations"
    while ii <= ii_limit:
        placed, reason = _place(an, a, ii, lat)
        if placed is not None:
            tau, fus = placed
            lambda_j = tuple(ii * s for s in t.strides)
            sched = TcpaSchedule(
                ii=ii,
                lambda_j=lambda_j,
                lambda_k=_lambda_k(an, t, tau, lat, lambda_j),
                labels=an.labels,
                starts=tuple(tau),
                latencies=tuple(lat),
                fus=tuple(fus),
                tails=_tile_tails(an, ii, tau, lat),
            )
            _debug(f"{p.name}: II={ii} lambda_j={sched.lambda_j} lambda_k={sched.lambda_k} makespan={sched.makespan}")
            return sched
        _debug(f"{p.name}: II={ii} rejected ({reason})")
        ii += 1
    raise ScheduleError(f"{p.name}: no schedule up to II {ii_limit}; last failure {reason}")


def predict_latency(sched: TcpaSchedule, t: Tiling) -> Tuple[int, int]:
    """(first, last) PE completion cycles from the schedule alone.

    A PE completes when its last executed operation retires, so each tile adds its
    own tail to its start; PEs whose tile has no active iteration do not count.
    Without per-tile tails every tile is assumed to run its full last iteration.
    """
    if sched.tails:
        ends = [sched.tile_start(k) + tail for k, tail in sched.tails]
        return min(ends), max(ends)
    base = sum(a * b for a, b in zip(sched.lambda_j, t.j_max)) + sched.makespan
    starts = [sched.tile_start(k) for k in t.tiles()]
    return base + min(starts), base + max(starts)
