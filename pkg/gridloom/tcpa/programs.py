from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from gridloom.errors import ProgramCapacityError
from gridloom.pra.model import Literal, PraProgram
from gridloom.tcpa.analysis import ActiveOp, TileAnalysis, tile_analysis
from gridloom.tcpa.arch import TcpaArch
from gridloom.tcpa.binding import RegisterBinding
from gridloom.tcpa.schedule import TcpaSchedule
from gridloom.tcpa.tiling import Point, Tiling
from gridloom.util.log import make_debug

_debug = make_debug("tcpa.programs")


@dataclass(frozen=True)
class ProcessorClass:
    index: int
    tiles: Tuple[Point, ...]
    sequence: Tuple[int, ...]  # pattern id per tile ordinal


def derive_classes(p: PraProgram, t: Tiling) -> List[ProcessorClass]:
    """Group tiles whose iterations run the same operation patterns in the same order."""
    an = tile_analysis(p, t)
    groups: Dict[Tuple[int, ...], List[Point]] = {}
    for k in t.tiles():
        groups.setdefault(an.sequence[k], []).append(k)
    out = [ProcessorClass(i, tuple(ks), seq) for i, (seq, ks) in enumerate(sorted(groups.items(), key=lambda kv: kv[1][0]))]
    _debug(f"{p.name}: {len(out)} processor classes over {t.tile_count} tiles")
    return out


@dataclass(frozen=True)
class TcpaWord:
    """One FU instruction. Operand and destination names:

    RDn, FDn, IDn, ODn registers; IN:<label>.<arg> and OUT:<label> buffer
    ports served by address generators; #v an immediate.
    """

    label: str
    op: str
    start: int  # offset inside the iteration; phase = start % II, stage = start // II
    latency: int
    srcs: Tuple[str, ...]
    dsts: Tuple[str, ...]

    def text(self, ii: int) -> str:
        return f"[{self.start % ii}/{self.start // ii}] {self.label}: {self.op} {','.join(self.srcs)} -> {','.join(self.dsts) or '-'}"


@dataclass(frozen=True)
class FuProgram:
    fu: str
    words: Tuple[TcpaWord, ...]
    branch: Tuple[Tuple[int, int], ...]  # (pattern id, word index)
    looped: bool

    @property
    def length(self) -> int:
        return len(self.words) + (1 if self.looped and self.words else 0)

    def word_for(self, pattern: int, start: int) -> Optional[TcpaWord]:
        for pid, w in self.branch:
            if pid == pattern and self.words[w].start == start:
                return self.words[w]
        return None


@dataclass(frozen=True)
class GcTable:
    """Pattern signals per class as runs of (first ordinal, count, pattern)."""

    runs: Dict[int, Tuple[Tuple[int, int, int], ...]]
    steady: Dict[int, int]  # classes that never branch

    @property
    def empty(self) -> bool:
        return not self.runs

    def pattern(self, cls: int, ordinal: int) -> int:
        if cls in self.steady:
            return self.steady[cls]
        for first, count, pid in self.runs[cls]:
            if first <= ordinal < first + count:
                return pid
        raise IndexError(f"class {cls} has no signal for ordinal {ordinal}")

    def emitted(self, sched: TcpaSchedule, classes: Sequence[ProcessorClass]) -> List[Tuple[int, int, int]]:
        """(cycle, class, pattern) for every signal change of each class's first tile."""
        out = []
        for c in classes:
            base = sched.tile_start(c.tiles[0])
            for first, _count, pid in self.runs.get(c.index, ()):
                out.append((base + sched.ii * first, c.index, pid))
        return sorted(out)


def _runs(seq: Sequence[int]) -> Tuple[Tuple[int, int, int], ...]:
    out: List[Tuple[int, int, int]] = []
    for o, pid in enumerate(seq):
        if out and out[-1][2] == pid:
            first, count, _ = out[-1]
            out[-1] = (first, count + 1, pid)
        else:
            out.append((o, 1, pid))
    return tuple(out)


def _word(an: TileAnalysis, sched: TcpaSchedule, b: RegisterBinding, op: ActiveOp) -> TcpaWord:
    p = an.program
    eq = p.equations[op.pos]
    label = eq.label
    srcs: List[str] = []
    for k, arg in enumerate(eq.args):
        if isinstance(arg, Literal):
            srcs.append(f"#{arg.value}")
        elif p.kind_of(arg.var) == "input":
            srcs.append(f"IN:{label}.{k}")
        elif any(op.srcs[k] or ()):
            srcs.append(f"ID{b.channels[(label, k, op.srcs[k])].id}")
        elif (label, k) in b.fd:
            srcs.append(f"FD{b.fd[(label, k)].index}")
        else:
            srcs.append(f"RD{b.rd[arg.var]}")
    var = eq.target.var
    dsts: List[str] = []
    if p.kind_of(var) == "output":
        dsts.append(f"OUT:{label}")
    else:
        if var in b.rd:
            dsts.append(f"RD{b.rd[var]}")
        for cpos, carg, delta in op.targets:
            clabel = an.labels[cpos]
            if any(delta):
                dsts.append(f"OD{b.channels[(clabel, carg, delta)].od}")
            elif (clabel, carg) in b.fd:
                dsts.append(f"FD{b.fd[(clabel, carg)].index}")
    return TcpaWord(label, eq.op, sched.starts[op.pos], sched.latencies[op.pos], tuple(srcs), tuple(sorted(set(dsts))))


def generate_programs(
    p: PraProgram,
    t: Tiling,
    classes: Sequence[ProcessorClass],
    sched: TcpaSchedule,
    binding: RegisterBinding,
    a: TcpaArch,
) -> Tuple[Dict[int, Dict[str, FuProgram]], GcTable]:
    """Per-class FU programs and the global controller signal table.

    Every distinct operation variant becomes one word; the branch table picks
    the word each iteration pattern runs in each FU slot. Words whose start
    exceeds II are folded into later stages of the modulo loop.
    """
    an = tile_analysis(p, t)
    looped = t.tile_iterations > 1
    programs: Dict[int, Dict[str, FuProgram]] = {}
    for c in classes:
        per_fu: Dict[str, List[TcpaWord]] = {f.name: [] for f in a.fus}
        branch: Dict[str, List[Tuple[int, int]]] = {f.name: [] for f in a.fus}
        for pid in sorted(set(c.sequence)):
            for op in an.patterns[pid]:
                fu = sched.fus[op.pos]
                w = _word(an, sched, binding, op)
                if w not in per_fu[fu]:
                    per_fu[fu].append(w)
                branch[fu].append((pid, per_fu[fu].index(w)))
        progs: Dict[str, FuProgram] = {}
        for f in a.fus:
            prog = FuProgram(f.name, tuple(per_fu[f.name]), tuple(sorted(branch[f.name])), looped)
            if prog.length > f.capacity:
                raise ProgramCapacityError(fu=f.name, needed=prog.length, capacity=f.capacity)
            progs[f.name] = prog
        programs[c.index] = progs
    runs = {c.index: _runs(c.sequence) for c in classes if len(set(c.sequence)) > 1}
    steady = {c.index: c.sequence[0] for c in classes if len(set(c.sequence)) == 1}
    gc = GcTable(runs, steady)
    longest = max((pr.length for progs in programs.values() for pr in progs.values()), default=0)
    _debug(f"{p.name}: {len(classes)} classes, longest FU program {longest} words, {sum(len(r) for r in runs.values())} GC runs")
    return programs, gc
