from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

from gridloom.cgra.arch import CgraArch
from gridloom.cgra.mapping import REGISTER, CgraMapping
from gridloom.dfg.graph import ArrayInfo, Dfg
from gridloom.dfg.layout import SpmLayout, layout_to_dict
from gridloom.errors import ConfigGenError
from gridloom.util.log import make_debug

_debug = make_debug("cgra.config")


@dataclass(frozen=True)
class Source:
    """Where a PE picks up a value in a given cycle.

    out: its own output latch; in: the input latch fed by PE `pe`;
    reg: pass-through register `slot`; imm: the constant `value`.
    """

    kind: str
    pe: int = -1
    slot: int = -1
    value: int = 0

    def __str__(self) -> str:
        if self.kind == "in":
            return f"in{self.pe}"
        if self.kind == "reg":
            return f"r{self.slot}"
        if self.kind == "imm":
            return f"#{self.value}"
        return "out"


@dataclass(frozen=True)
class OperandSel:
    source: Source
    distance: int = 0
    init: int = 0  # used while the producing iteration does not exist


@dataclass(frozen=True)
class FuInstr:
    node: int
    op: str
    start: int  # issue cycle of iteration 0
    stage: int
    latency: int
    operands: Tuple[OperandSel, ...]
    variant: Optional[str] = None
    array: Optional[str] = None

    @property
    def label(self) -> str:
        return self.op if self.variant is None else f"{self.op}.{self.variant}"


@dataclass(frozen=True)
class Transfer:
    """Crossbar setting: copy a value into a register of this PE or onto the link toward `to_pe`."""

    value_of: int  # producing node
    depart: int  # cycle of the iteration-0 instance
    source: Source
    to_pe: int = -1
    to_slot: int = -1

    def __str__(self) -> str:
        dest = f"r{self.to_slot}" if self.to_slot >= 0 else f"->{self.to_pe}"
        return f"{self.source}>{dest}"


@dataclass(frozen=True)
class InstrWord:
    phase: int
    fu: Optional[FuInstr] = None
    transfers: Tuple[Transfer, ...] = ()

    @property
    def idle(self) -> bool:
        return self.fu is None and not self.transfers


@dataclass(frozen=True)
class CgraConfig:
    name: str
    ii: int
    words: Tuple[Tuple[InstrWord, ...], ...]  # words[pe][phase]
    layout: SpmLayout
    arrays: Tuple[ArrayInfo, ...]
    makespan: int

    @property
    def pe_count(self) -> int:
        return len(self.words)

    def instructions(self) -> List[Tuple[int, FuInstr]]:
        return [(pe, w.fu) for pe, ws in enumerate(self.words) for w in ws if w.fu is not None]

    def to_dict(self) -> Dict[str, Any]:
        def word(w: InstrWord) -> Dict[str, Any]:
            d: Dict[str, Any] = {"phase": w.phase}
            if w.fu is not None:
                d["op"] = w.fu.label
                d["node"] = w.fu.node
                d["stage"] = w.fu.stage
                d["operands"] = [
                    {"src": str(o.source), "distance": o.distance, "init": o.init} for o in w.fu.operands
                ]
                if w.fu.array:
                    d["array"] = w.fu.array
            if w.transfers:
                d["xbar"] = [str(t) for t in w.transfers]
            return d

        return {
            "name": self.name,
            "ii": self.ii,
            "makespan": self.makespan,
            "layout": layout_to_dict(self.layout),
            "pes": [[word(w) for w in ws] for ws in self.words],
        }


def _check_layout(g: Dfg, a: CgraArch, layout: SpmLayout) -> None:
    if layout.bank_words > a.bank_words:
        raise ConfigGenError(f"layout assumes {layout.bank_words}-word banks, the array has {a.bank_words}")
    for p in layout.placements:
        if p.bank >= a.banks:
            raise ConfigGenError(f"array {p.array} placed in bank {p.bank}; only {a.banks} banks exist")
        if p.offset_words + p.words > a.bank_words:
            raise ConfigGenError(
                f"array {p.array} ({p.words * 4} B at offset {p.byte_offset}) does not fit bank capacity {a.bank_bytes} B"
            )
    placed = {p.array: p.bank for p in layout.placements}
    for n in g.ops:
        if n.is_memory and (n.array not in placed or placed[n.array] != n.bank):
            raise ConfigGenError(f"{n.op} node {n.id} expects {n.array} in bank {n.bank}, layout disagrees")


def generate_config(m: CgraMapping, g: Dfg, a: CgraArch, layout: Optional[SpmLayout] = None) -> CgraConfig:
    """II instruction words per PE from a valid mapping; unused phases are idle words."""
    if m.ii > a.config_depth:
        raise ConfigGenError(f"II {m.ii} exceeds the configuration memory depth {a.config_depth}")
    layout = layout if layout is not None else g.layout
    if layout is None:
        raise ConfigGenError("no SPM layout given and the graph carries none")
    _check_layout(g, a, layout)
    ii = m.ii

    # register slots: one per distinct value instance per (pe, phase)
    slot_of: Dict[Tuple[int, int, Tuple[int, int]], int] = {}
    for k in sorted(m.routes):
        r = m.routes[k]
        here, cycle = m.binding[r.src], r.start
        for h in r.hops:
            if h.resource == REGISTER:
                key = (here, cycle % ii, (r.src, cycle))
                if key not in slot_of:
                    used = sum(1 for (p, ph, _) in slot_of if p == here and ph == cycle % ii)
                    if used >= a.pass_registers:
                        raise ConfigGenError(f"PE {here} needs more than {a.pass_registers} registers at phase {cycle % ii}")
                    slot_of[key] = used
            here, cycle = h.pe, h.cycle

    transfers: Dict[Tuple[int, int], Dict[Tuple[int, int], Transfer]] = {}
    final: Dict[int, Source] = {}
    for k in sorted(m.routes):
        r = m.routes[k]
        here, cycle = m.binding[r.src], r.start
        loc = Source("out")
        for h in r.hops:
            if h.resource == REGISTER:
                slot = slot_of[(here, cycle % ii, (r.src, cycle))]
                t = Transfer(r.src, cycle, loc, to_slot=slot)
                nxt = Source("reg", slot=slot)
            else:
                t = Transfer(r.src, cycle, loc, to_pe=h.pe)
                nxt = Source("in", pe=here)
            bucket = transfers.setdefault((here, cycle % ii), {})
            dest = (t.to_pe, t.to_slot)
            prev = bucket.get(dest)
            if prev is not None and (prev.value_of, prev.depart) != (t.value_of, t.depart):
                raise ConfigGenError(f"crossbar conflict on PE {here} phase {cycle % ii} toward {dest}")
            bucket[dest] = t
            here, cycle, loc = h.pe, h.cycle, nxt
        final[k] = loc

    edge_ids = {(e.dst, e.pos): k for k, e in enumerate(g.edges) if e.kind == "data"}
    fu_at: Dict[Tuple[int, int], FuInstr] = {}
    for n in g.ops:
        ops: List[OperandSel] = []
        for e in g.operands(n.id):
            src = g.nodes[e.src]
            if src.is_const:
                ops.append(OperandSel(Source("imm", value=int(src.value or 0))))
                continue
            ops.append(OperandSel(final[edge_ids[(e.dst, e.pos)]], distance=e.distance, init=e.init))
        t = m.schedule[n.id]
        fu_at[(m.binding[n.id], t % ii)] = FuInstr(
            node=n.id,
            op=n.op,
            start=t,
            stage=t // ii,
            latency=n.latency,
            operands=tuple(ops),
            variant=n.variant,
            array=n.array,
        )

    words = []
    for pe in range(a.pe_count):
        row = []
        for ph in range(ii):
            ts = transfers.get((pe, ph), {})
            row.append(InstrWord(ph, fu_at.get((pe, ph)), tuple(ts[d] for d in sorted(ts))))
        words.append(tuple(row))
    busy = sum(1 for ws in words for w in ws if not w.idle)
    _debug(f"{g.name}: II={ii}, {busy}/{ii * a.pe_count} non-idle words")
    return CgraConfig(
        name=g.name,
        ii=ii,
        words=tuple(words),
        layout=layout,
        arrays=g.arrays,
        makespan=m.makespan(g),
    )
