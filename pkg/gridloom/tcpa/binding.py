from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from gridloom.errors import BindingError
from gridloom.pra.model import PraProgram
from gridloom.tcpa.analysis import Delta, TileAnalysis, tile_analysis
from gridloom.tcpa.arch import TcpaArch
from gridloom.tcpa.schedule import TcpaSchedule
from gridloom.tcpa.tiling import Point, Tiling
from gridloom.util.log import make_debug

_debug = make_debug("tcpa.binding")

DepKey = Tuple[str, int]  # (consumer label, argument)
ChannelKey = Tuple[str, int, Delta]


def _overlap(a: Tuple[int, int], b: Tuple[int, int], period: Optional[int]) -> bool:
    """Closed intervals overlap, modulo `period` when given."""
    if period is None:
        return a[0] <= b[1] and b[0] <= a[1]
    lo = -((b[1] - a[0]) // period)  # ceil((a0 - b1) / period)
    hi = (a[1] - b[0]) // period
    return lo <= hi


def left_edge(intervals: Sequence[Tuple[int, int]], period: Optional[int] = None) -> List[int]:
    """Register index per interval, packing by increasing start point.

    Without a period this is the classic left-edge algorithm and uses as many
    registers as the largest number of intervals alive at once.
    """
    order = sorted(range(len(intervals)), key=lambda i: (intervals[i][0], intervals[i][1], i))
    regs: List[List[Tuple[int, int]]] = []
    out = [0] * len(intervals)
    for i in order:
        iv = intervals[i]
        for r, held in enumerate(regs):
            if not any(_overlap(iv, h, period) for h in held):
                held.append(iv)
                out[i] = r
                break
        else:
            regs.append([iv])
            out[i] = len(regs) - 1
    return out


@dataclass(frozen=True)
class FdSlot:
    index: int
    depth: int
    lifetime: int


@dataclass(frozen=True)
class Channel:
    od: int
    id: int
    depth: int
    hops: int
    lifetime: int
    routes: Tuple[Tuple[Tuple[int, int], ...], ...] = ()  # PE paths, one per sending tile with a receiver


@dataclass(frozen=True)
class RegisterBinding:
    rd: Dict[str, int] = field(default_factory=dict)  # variable -> RD index
    rd_reads: Tuple[DepKey, ...] = ()
    fd: Dict[DepKey, FdSlot] = field(default_factory=dict)
    channels: Dict[ChannelKey, Channel] = field(default_factory=dict)
    vd: Dict[str, Tuple[str, ...]] = field(default_factory=dict)  # variable -> broadcast targets
    lifetimes: Dict[DepKey, int] = field(default_factory=dict)

    @property
    def rd_count(self) -> int:
        return len(set(self.rd.values()))

    @property
    def fifo_words(self) -> int:
        return sum(f.depth for f in self.fd.values()) + sum(c.depth for c in self.channels.values())

    def to_dict(self) -> dict:
        return {
            "rd": dict(sorted(self.rd.items())),
            "fd": {f"{k[0]}.{k[1]}": {"fd": v.index, "depth": v.depth, "lifetime": v.lifetime} for k, v in sorted(self.fd.items())},
            "channels": {
                f"{k[0]}.{k[1]}@{list(k[2])}": {
                    "od": c.od,
                    "id": c.id,
                    "depth": c.depth,
                    "hops": c.hops,
                    "routes": [[list(pe) for pe in r] for r in c.routes],
                }
                for k, c in sorted(self.channels.items())
            },
            "vd": {k: list(v) for k, v in sorted(self.vd.items())},
        }


def _xy_route(src: Tuple[int, int], dst: Tuple[int, int]) -> Tuple[Tuple[int, int], ...]:
    path = [src]
    r, c = src
    while r != dst[0]:
        r += 1 if dst[0] > r else -1
        path.append((r, c))
    while c != dst[1]:
        c += 1 if dst[1] > c else -1
        path.append((r, c))
    return tuple(path)


def _peak(writes: Iterable[int], reads: Iterable[int]) -> int:
    """Largest FIFO occupancy seen by a read; writes landing in a cycle are visible to reads of that cycle."""
    events = sorted([(t, 0) for t in writes] + [(t, 1) for t in reads])
    held, peak = 0, 0
    for _, kind in events:
        if kind == 0:
            held += 1
        else:
            peak = max(peak, held)
            held -= 1
    return peak


def _fifo_events(
    an: TileAnalysis, sched: TcpaSchedule, pos: int, arg: int, delta: Delta, receiver: Point
) -> Tuple[List[int], List[int]]:
    t = an.tiling
    sender = tuple(a - b for a, b in zip(receiver, delta))
    hops = t.hops(sender, receiver)
    writes: List[int] = []
    reads: List[int] = []
    if t.has_tile(sender):
        base = sched.tile_start(sender)
        for o, pid in enumerate(an.sequence[sender]):
            for op in an.patterns[pid]:
                if (pos, arg, delta) in op.targets:
                    writes.append(base + sched.ii * o + sched.completion(op.pos) + hops)
    base = sched.tile_start(receiver)
    for o, pid in enumerate(an.sequence[receiver]):
        for op in an.patterns[pid]:
            if op.pos == pos and op.srcs[arg] == delta:
                reads.append(base + sched.ii * o + sched.starts[pos])
    return writes, reads


def bind_registers(p: PraProgram, sched: TcpaSchedule, t: Tiling, a: TcpaArch) -> RegisterBinding:
    """Registers for every internal dependency.

    Short intra-tile lifetimes share RDs by modulo left-edge packing, longer
    ones get feedback FIFOs and tile-crossing reads get an OD/ID channel pair.
    FIFO depths come from the exact occupancy of every tile.
    """
    an = tile_analysis(p, t)
    ii = sched.ii
    labels = an.labels
    zero = (0,) * t.n

    lifetimes: Dict[DepKey, int] = {}
    ch_life: Dict[ChannelKey, int] = {}
    ch_hops: Dict[ChannelKey, int] = {}
    for ic in an.instances:
        lam = sum(x * y for x, y in zip(sched.lambda_j, ic.jdiff))
        if ic.inter:
            key_c = (labels[ic.dep.pos], ic.dep.arg, ic.delta)
            life = sched.tile_start(ic.delta) + lam + sched.starts[ic.dep.pos] - sched.completion(ic.producer) - ic.hops
            ch_life[key_c] = max(ch_life.get(key_c, life), life)
            ch_hops[key_c] = max(ch_hops.get(key_c, 0), ic.hops)
            continue
        key = (labels[ic.dep.pos], ic.dep.arg)
        life = lam + sched.starts[ic.dep.pos] - sched.completion(ic.producer)
        lifetimes[key] = max(lifetimes.get(key, life), life)

    # RDs: one interval per variable covering its short-lived reads
    rd_reads = tuple(sorted(k for k, life in lifetimes.items() if life < ii))
    span: Dict[str, Tuple[int, int]] = {}
    for dep in an.deps:
        key = (labels[dep.pos], dep.arg)
        if key not in rd_reads:
            continue
        born = min(sched.completion(w) for w, e in enumerate(p.equations) if e.target.var == dep.var)
        end = born + lifetimes[key]
        lo, hi = span.get(dep.var, (born, end))
        span[dep.var] = (min(lo, born), max(hi, end))
    names = sorted(span)
    packed = left_edge([span[v] for v in names], period=ii)
    rd = {v: r for v, r in zip(names, packed)}
    if rd and max(packed) + 1 > a.rd:
        raise BindingError("out of RD registers", dependency=", ".join(names), shortfall=max(packed) + 1 - a.rd)

    # FDs
    fd: Dict[DepKey, FdSlot] = {}
    for key in sorted(k for k, life in lifetimes.items() if life >= ii):
        pos = labels.index(key[0])
        depth = 0
        for k in t.tiles():
            w, r = _fifo_events(an, sched, pos, key[1], zero, k)
            depth = max(depth, _peak(w, r))
        if len(fd) >= a.fd:
            raise BindingError("out of FD registers", dependency=f"{key[0]}.{key[1]}", shortfall=len(fd) + 1 - a.fd)
        fd[key] = FdSlot(len(fd), depth, lifetimes[key])

    # OD/ID channel pairs
    channels: Dict[ChannelKey, Channel] = {}
    link_use: Dict[Tuple[Tuple[int, int], Tuple[int, int]], set] = {}
    for ck in sorted(ch_life):
        pos = labels.index(ck[0])
        depth = 0
        routes = []
        for k in t.tiles():
            sender = tuple(x - y for x, y in zip(k, ck[2]))
            if not t.has_tile(sender):
                continue
            w, r = _fifo_events(an, sched, pos, ck[1], ck[2], k)
            depth = max(depth, _peak(w, r))
            path = _xy_route(t.pe(sender), t.pe(k))
            routes.append(path)
            for u, v in zip(path, path[1:]):
                link_use.setdefault((u, v), set()).add(ck)
        idx = len(channels)
        name = f"{ck[0]}.{ck[1]}@{list(ck[2])}"
        if idx >= a.od or idx >= a.id:
            raise BindingError("out of OD/ID registers", dependency=name, shortfall=idx + 1 - min(a.od, a.id))
        if depth > a.id_depth:
            raise BindingError(f"input FIFO needs depth {depth}", dependency=name, shortfall=depth - a.id_depth)
        channels[ck] = Channel(idx, idx, depth, ch_hops[ck], ch_life[ck], tuple(routes))
    for (u, v), users in sorted(link_use.items()):
        if len(users) > a.channels:
            raise BindingError(
                f"link {u}->{v} carries {len(users)} channels",
                dependency=", ".join(f"{c[0]}.{c[1]}" for c in sorted(users)),
                shortfall=len(users) - a.channels,
            )

    words = sum(f.depth for f in fd.values()) + sum(c.depth for c in channels.values())
    if words > a.fifo_capacity:
        raise BindingError(f"FIFOs need {words} words", dependency="FIFO capacity", shortfall=words - a.fifo_capacity)

    vd: Dict[str, Tuple[str, ...]] = {}
    for v in p.internals:
        targets = [f"RD{rd[v.name]}"] if v.name in rd else []
        for dep in an.consumers_of(v.name):
            key = (labels[dep.pos], dep.arg)
            if key in fd:
                targets.append(f"FD{fd[key].index}")
        read_var = {(labels[d.pos], d.arg): d.var for d in an.deps}
        for ck, ch in channels.items():
            if read_var[(ck[0], ck[1])] == v.name:
                targets.append(f"OD{ch.od}")
        if targets:
            vd[v.name] = tuple(sorted(set(targets)))
    _debug(
        f"{p.name}: {len(set(rd.values()))} RD, {len(fd)} FD, {len(channels)} channels, {words} FIFO words"
    )
    return RegisterBinding(rd=rd, rd_reads=rd_reads, fd=fd, channels=channels, vd=vd, lifetimes=lifetimes)
