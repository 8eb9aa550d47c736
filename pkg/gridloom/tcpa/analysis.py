"""Instance-level view of a PRA under a tiling.

Everything the TCPA stages need about dependency instances is gathered here
by enumerating the iteration space once: which equations run where, which
producer feeds each read, whether the read crosses a tile border, and the
per-iteration pattern of operations that the global controller selects.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from gridloom.errors import ScheduleError, TilingError
from gridloom.pra.interpret import compile_equations, enumerate_iterations
from gridloom.pra.model import Literal, PraProgram, VarRef
from gridloom.tcpa.tiling import Point, Tiling
from gridloom.util.log import make_debug

_debug = make_debug("tcpa.analysis")

Delta = Tuple[int, ...]


@dataclass(frozen=True)
class DepArg:
    """An internal read: equation `pos` argument `arg` reads `var` at distance `d`."""

    pos: int
    arg: int
    var: str
    d: Tuple[int, ...]


@dataclass(frozen=True)
class InstanceClass:
    """Dependency instances sharing producer, tile crossing and offset difference."""

    dep: DepArg
    producer: int
    delta: Delta  # tile of consumer minus tile of producer
    jdiff: Tuple[int, ...]  # intra-tile offset of consumer minus producer
    hops: int

    @property
    def inter(self) -> bool:
        return any(self.delta)


@dataclass(frozen=True)
class ActiveOp:
    pos: int
    srcs: Tuple[Optional[Delta], ...]  # per argument: None unless an internal read
    targets: Tuple[Tuple[int, int, Delta], ...]  # enabled (consumer pos, arg, delta)


Pattern = Tuple[ActiveOp, ...]


@dataclass
class TileAnalysis:
    program: PraProgram
    tiling: Tiling
    labels: Tuple[str, ...]
    deps: Tuple[DepArg, ...]
    instances: Tuple[InstanceClass, ...]
    active_sets: FrozenSet[FrozenSet[int]]
    patterns: Tuple[Pattern, ...]  # indexed by pattern id
    sequence: Dict[Point, Tuple[int, ...]]  # tile -> pattern id per ordinal
    points: int

    def coactive(self, a: int, b: int) -> bool:
        return any(a in s and b in s for s in self.active_sets)

    def consumers_of(self, var: str) -> List[DepArg]:
        return [d for d in self.deps if d.var == var]


def _zero(n: int) -> Delta:
    return (0,) * n


def _internal_args(p: PraProgram) -> Tuple[DepArg, ...]:
    out: List[DepArg] = []
    for pos, e in enumerate(p.equations):
        for k, a in enumerate(e.args):
            if isinstance(a, VarRef) and p.kind_of(a.var) == "internal":
                out.append(DepArg(pos, k, a.var, tuple(-o.const for o in a.index.offset)))
    return tuple(out)


def _check_distances(p: PraProgram, t: Tiling, deps: Tuple[DepArg, ...]) -> None:
    for dep in deps:
        label = p.equations[dep.pos].label
        for dim in range(t.n):
            if t.counts[dim] == 1:
                continue
            if dep.d[dim] < 0:
                raise TilingError(f"{label} reads {dep.var} at distance {dep.d}, backwards in tiled dimension {dim}")
            if dep.d[dim] > t.sizes[dim]:
                raise TilingError(
                    f"{label} reads {dep.var} at distance {dep.d}, beyond tile size {t.sizes[dim]} in dimension {dim}"
                )


@lru_cache(maxsize=16)
def tile_analysis(p: PraProgram, t: Tiling) -> TileAnalysis:
    params = t.param_map
    comp = compile_equations(p, params)
    n = t.n
    deps = _internal_args(p)
    _check_distances(p, t, deps)
    by_pos: Dict[int, List[DepArg]] = {}
    by_var: Dict[str, List[DepArg]] = {}
    for dep in deps:
        by_pos.setdefault(dep.pos, []).append(dep)
        by_var.setdefault(dep.var, []).append(dep)

    points = enumerate_iterations(p.space, params)
    active: Dict[Point, Tuple[int, ...]] = {x: tuple(c.pos for c in comp if c.active(x)) for x in points}
    writer: Dict[Tuple[str, Point], int] = {}
    for x, ops in active.items():
        for pos in ops:
            var = p.equations[pos].target.var
            if p.kind_of(var) == "internal":
                writer[(var, x)] = pos

    inst: Dict[Tuple[DepArg, int, Delta, Tuple[int, ...]], int] = {}
    for x, ops in active.items():
        kx, jx = t.split(x)
        for pos in ops:
            for dep in by_pos.get(pos, ()):
                y = tuple(a - b for a, b in zip(x, dep.d))
                prod = writer.get((dep.var, y))
                if prod is None:
                    raise ScheduleError(
                        f"{p.equations[pos].label} reads undefined {dep.var}{list(y)} at iteration {x}"
                    )
                ky, jy = t.split(y)
                key = (dep, prod, tuple(a - b for a, b in zip(kx, ky)), tuple(a - b for a, b in zip(jx, jy)))
                inst[key] = max(inst.get(key, 0), t.hops(ky, kx))

    def pattern_at(x: Point) -> Pattern:
        kx, jx = t.split(x)
        ops: List[ActiveOp] = []
        for pos in active[x]:
            eq = p.equations[pos]
            srcs: List[Optional[Delta]] = [None] * len(eq.args)
            for dep in by_pos.get(pos, ()):
                ky, _ = t.split(tuple(a - b for a, b in zip(x, dep.d)))
                srcs[dep.arg] = tuple(a - b for a, b in zip(kx, ky))
            targets: List[Tuple[int, int, Delta]] = []
            for dep in by_var.get(eq.target.var, ()):
                z = tuple(a + b for a, b in zip(x, dep.d))
                kz, _ = t.split(z)
                delta = tuple(a - b for a, b in zip(kz, kx))
                if any(dl and t.counts[dim] == 1 for dim, dl in enumerate(delta)):
                    continue  # leaves the space through an untiled dimension
                if comp[dep.pos].active(z):
                    targets.append((dep.pos, dep.arg, delta))
            ops.append(ActiveOp(pos, tuple(srcs), tuple(sorted(targets))))
        return tuple(ops)

    ids: Dict[Pattern, int] = {}
    sequence: Dict[Point, Tuple[int, ...]] = {}
    intra = t.intra()
    for k in t.tiles():
        seq = []
        for j in intra:
            pat = pattern_at(t.point(k, j))
            if pat not in ids:
                ids[pat] = len(ids)
            seq.append(ids[pat])
        sequence[k] = tuple(seq)
    patterns = tuple(sorted(ids, key=ids.__getitem__))

    instances = tuple(
        InstanceClass(dep, prod, delta, jdiff, hops)
        for (dep, prod, delta, jdiff), hops in sorted(inst.items(), key=lambda kv: (kv[0][0].pos, kv[0][0].arg, kv[0][2], kv[0][3], kv[0][1]))
    )
    _debug(
        f"{p.name}: {len(points)} iterations, {len(instances)} instance classes, {len(patterns)} patterns"
    )
    return TileAnalysis(
        program=p,
        tiling=t,
        labels=tuple(e.label for e in p.equations),
        deps=deps,
        instances=instances,
        active_sets=frozenset(frozenset(ops) for ops in active.values()),
        patterns=patterns,
        sequence=sequence,
        points=len(points),
    )


def classify_tiled(p: PraProgram, t: Tiling) -> Dict[Tuple[str, int], Tuple[str, ...]]:
    """Dependency classes per (equation label, argument); argument -1 is the written target.

    Internal reads split into intra-iteration, intra-tile and inter-tile by
    whether their instances cross a tile border.
    """
    an = tile_analysis(p, t)
    zero = _zero(t.n)
    found: Dict[Tuple[str, int], Set[str]] = {}
    for pos, e in enumerate(p.equations):
        if p.kind_of(e.target.var) == "output":
            found.setdefault((e.label, -1), set()).add("output")
        for k, a in enumerate(e.args):
            if isinstance(a, Literal):
                continue
            if p.kind_of(a.var) == "input":
                found.setdefault((e.label, k), set()).add("input")
    for ic in an.instances:
        key = (an.labels[ic.dep.pos], ic.dep.arg)
        if ic.dep.d == zero:
            kind = "intra-iteration"
        elif ic.inter:
            kind = "inter-tile"
        else:
            kind = "intra-tile"
        found.setdefault(key, set()).add(kind)
    order = ("input", "output", "intra-iteration", "intra-tile", "inter-tile")
    return {key: tuple(c for c in order if c in kinds) for key, kinds in sorted(found.items())}
