from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np

from gridloom.cgra.arch import CgraArch
from gridloom.cgra.config_gen import CgraConfig, FuInstr, OperandSel, Source
from gridloom.errors import CgraSimError
from gridloom.util.log import make_debug
from gridloom.util.simresult import SimResult
from gridloom.util.trace import MemEvent, TraceRecord
from gridloom.util.words import apply_binary, select

_debug = make_debug("cgra.sim")

_BINARY = {"Add": "add", "Sub": "sub", "Mul": "mul", "Div": "div"}


@dataclass
class CgraSimState:
    cycle: int = 0
    spm: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int32))
    out: Dict[int, int] = field(default_factory=dict)  # pe -> output latch
    links: Dict[Tuple[int, int], int] = field(default_factory=dict)  # (pe, sender) -> input latch
    regs: Dict[Tuple[int, int], int] = field(default_factory=dict)  # (pe, slot) -> value
    pending: Dict[int, List[Tuple[int, int]]] = field(default_factory=dict)  # cycle -> [(pe, value)]
    issued: int = 0  # iterations whose first operation has issued


def load_spm(c: CgraConfig, inputs: Mapping[str, np.ndarray]) -> np.ndarray:
    """Scratchpad image before the run: inputs, initial images of out arrays, zeros elsewhere."""
    lay = c.layout
    spm = np.zeros(lay.banks * lay.bank_words, dtype=np.int32)
    for info in c.arrays:
        src = info.name if info.role == "in" else (info.init or info.name)
        data = inputs.get(src)
        if data is None:
            if info.role == "in" or info.init:
                raise CgraSimError(f"missing input image {src!r} for array {info.name}", cycle=0)
            continue
        arr = np.asarray(data)
        if tuple(arr.shape) != tuple(info.shape):
            raise CgraSimError(f"image {src!r} has shape {arr.shape}, array {info.name} needs {info.shape}", cycle=0)
        base = lay.base(info.name)
        spm[base : base + arr.size] = arr.astype(np.int64).ravel().astype(np.int32)
    return spm


def read_outputs(c: CgraConfig, spm: np.ndarray) -> Dict[str, np.ndarray]:
    out: Dict[str, np.ndarray] = {}
    for info in c.arrays:
        if info.role == "in":
            continue
        size = int(np.prod(info.shape)) if info.shape else 1
        base = c.layout.base(info.name)
        out[info.name] = spm[base : base + size].reshape(info.shape).copy()
    return out


class _Machine:
    def __init__(self, c: CgraConfig, a: CgraArch, inputs: Mapping[str, np.ndarray], trip: int):
        self.c, self.a, self.trip, self.ii = c, a, trip, c.ii
        self.st = CgraSimState(spm=load_spm(c, inputs))
        self.last_done = 0
        # Div-style ops occupy their FU over several phases; remember them for trace records
        self.long_ops = [(pe, f) for pe, f in c.instructions() if a.busy(f.op) > 1]
        self.first_start = min((f.start for _, f in c.instructions()), default=0)
        # (cycle, pe) -> recorded FU operation; when set, results come from the trace
        self.script: Optional[Dict[Tuple[int, int], TraceRecord]] = None

    def iteration_of(self, cycle: int, start: int) -> Optional[int]:
        it, rem = divmod(cycle - start, self.ii)
        return it if rem == 0 and 0 <= it < self.trip else None

    def locate(self, pe: int, s: Source, cycle: int) -> int:
        st = self.st
        if s.kind == "imm":
            return s.value
        if s.kind == "out":
            if pe not in st.out:
                raise CgraSimError("output latch read before any result", cycle=cycle, pe=pe)
            return st.out[pe]
        if s.kind == "reg":
            if (pe, s.slot) not in st.regs:
                raise CgraSimError(f"register r{s.slot} read before written", cycle=cycle, pe=pe)
            return st.regs[(pe, s.slot)]
        if (pe, s.pe) not in st.links:
            raise CgraSimError(f"no value arrived from PE {s.pe}", cycle=cycle, pe=pe)
        return st.links[(pe, s.pe)]

    def operand(self, pe: int, o: OperandSel, it: int, cycle: int) -> int:
        if it - o.distance < 0:
            return o.init
        return self.locate(pe, o.source, cycle)

    def address_ok(self, pe: int, addr: int) -> bool:
        lay = self.c.layout
        return 0 <= addr < lay.banks * lay.bank_words and addr // lay.bank_words == self.a.bank_of(pe)

    def busy_with(self, pe: int, cycle: int) -> Optional[Tuple[FuInstr, int]]:
        for p, f in self.long_ops:
            if p != pe:
                continue
            for j in range(1, self.a.busy(f.op)):
                it = self.iteration_of(cycle - j, f.start)
                if it is not None:
                    return f, it
        return None

    def execute(self, pe: int, f: FuInstr, it: int, cycle: int, stores: List[Tuple[int, int, str]]) -> TraceRecord:
        if self.script is not None:
            return self.execute_recorded(pe, f, it, cycle, stores)
        args = tuple(self.operand(pe, o, it, cycle) for o in f.operands)
        result: Optional[int] = None
        mem: Optional[MemEvent] = None
        if f.op in ("Load", "Store"):
            addr = args[0]
            if not self.address_ok(pe, addr):
                raise CgraSimError(f"{f.op} of {f.array} at word {addr} is outside the bank of this PE", cycle=cycle, pe=pe)
            if f.op == "Load":
                result = int(self.st.spm[addr])
                mem = MemEvent("ld", f.array or "", addr, result)
            else:
                stores.append((addr, args[1], f.array or ""))
                mem = MemEvent("st", f.array or "", addr, args[1])
        elif f.op == "Sel":
            result = select(args[0], args[1], args[2])
        elif f.op == "Cmp":
            result = apply_binary(f"cmp_{f.variant}", args[0], args[1])
        else:
            try:
                result = apply_binary(_BINARY[f.op], args[0], args[1])
            except ZeroDivisionError:
                raise CgraSimError(f"division by zero in node {f.node}", cycle=cycle, pe=pe) from None
        if result is not None:
            self.st.pending.setdefault(cycle + f.latency, []).append((pe, result))
        self.last_done = max(self.last_done, cycle + f.latency)
        if f.start == self.first_start:
            self.st.issued = max(self.st.issued, it + 1)
        return TraceRecord(cycle, str(pe), "fu", f.label, it, args, result, mem)

    def execute_recorded(self, pe: int, f: FuInstr, it: int, cycle: int, stores: List[Tuple[int, int, str]]) -> TraceRecord:
        assert self.script is not None
        rec = self.script.get((cycle, pe))
        if rec is None or rec.op != f.label or rec.iteration != it:
            got = "nothing" if rec is None else f"{rec.op} it={rec.iteration}"
            raise CgraSimError(f"trace has {got} where the configuration issues {f.label} it={it}", cycle=cycle, pe=pe)
        if f.op == "Store":
            if rec.mem is None or rec.mem.kind != "st" or not self.address_ok(pe, rec.mem.address):
                raise CgraSimError(f"trace store of {f.array} is missing or outside the bank of this PE", cycle=cycle, pe=pe)
            stores.append((rec.mem.address, rec.mem.value, rec.mem.array))
        elif rec.result is None:
            raise CgraSimError(f"trace carries no result for {f.label}", cycle=cycle, pe=pe)
        else:
            self.st.pending.setdefault(cycle + f.latency, []).append((pe, rec.result))
        self.last_done = max(self.last_done, cycle + f.latency)
        if f.start == self.first_start:
            self.st.issued = max(self.st.issued, it + 1)
        return rec

    def step(self, record: bool) -> List[TraceRecord]:
        st, cycle = self.st, self.st.cycle
        for pe, v in st.pending.pop(cycle, []):
            st.out[pe] = v
        stores: List[Tuple[int, int, str]] = []
        links: Dict[Tuple[int, int], int] = {}
        writes: Dict[Tuple[int, int], int] = {}
        records: List[TraceRecord] = []
        for pe, words in enumerate(self.c.words):
            w = words[cycle % self.ii]
            rec: Optional[TraceRecord] = None
            if w.fu is not None:
                it = self.iteration_of(cycle, w.fu.start)
                if it is not None:
                    rec = self.execute(pe, w.fu, it, cycle, stores)
            if rec is None and record:
                hit = self.busy_with(pe, cycle)
                if hit is None:
                    rec = TraceRecord(cycle, str(pe), "fu", "nop")
                else:
                    rec = TraceRecord(cycle, str(pe), "fu", f"busy:{hit[0].label}", hit[1])
            moved: List[str] = []
            for t in w.transfers:
                if self.iteration_of(cycle, t.depart) is None:
                    continue
                v = self.locate(pe, t.source, cycle)
                if t.to_slot >= 0:
                    writes[(pe, t.to_slot)] = v
                else:
                    links[(t.to_pe, pe)] = v
                moved.append(f"{t}:{v}")
            if record and rec is not None:
                records.append(TraceRecord(rec.cycle, rec.pe, rec.unit, rec.op, rec.iteration, rec.args, rec.result, rec.mem, tuple(moved)))
        for addr, value, _ in stores:
            st.spm[addr] = value
        st.links = links
        st.regs.update(writes)
        st.cycle += 1
        return records


def _run_machine(m: _Machine, c: CgraConfig, trip: int, window: Optional[Tuple[int, int]] = None) -> List[TraceRecord]:
    instrs = c.instructions()
    end = 0
    if trip > 0 and instrs:
        end = max(f.start + f.latency for _, f in instrs) + c.ii * (trip - 1)
    stop = end if window is None else max(end, window[1] + 1)
    records: List[TraceRecord] = []
    while m.st.cycle < stop:
        rec = window is not None and window[0] <= m.st.cycle <= window[1]
        records.extend(m.step(rec))
    return records


def _machine(c: CgraConfig, a: CgraArch, inputs: Mapping[str, np.ndarray], trip: int) -> _Machine:
    if c.pe_count != a.pe_count:
        raise CgraSimError(f"configuration has {c.pe_count} PEs, architecture {a.pe_count}", cycle=0)
    return _Machine(c, a, inputs, max(0, trip))


def _run(
    c: CgraConfig, a: CgraArch, inputs: Mapping[str, np.ndarray], trip: int, window: Optional[Tuple[int, int]] = None
) -> Tuple[SimResult, List[TraceRecord]]:
    m = _machine(c, a, inputs, trip)
    records = _run_machine(m, c, m.trip, window)
    result = SimResult(outputs=read_outputs(c, m.st.spm), latency=m.last_done, iterations=m.st.issued)
    _debug(f"{c.name}: trip={trip} II={c.ii} latency={result.latency}")
    return result, records


def simulate_cgra(c: CgraConfig, a: CgraArch, inputs: Mapping[str, np.ndarray], trip: int) -> SimResult:
    """Run the cyclic per-PE programs for `trip` overlapped iterations."""
    return _run(c, a, inputs, trip)[0]


def final_state(c: CgraConfig, a: CgraArch, inputs: Mapping[str, np.ndarray], trip: int) -> CgraSimState:
    """Machine state (scratchpad, latches, registers) after a full run."""
    m = _machine(c, a, inputs, trip)
    _run_machine(m, c, m.trip)
    return m.st


def dump_trace(
    c: CgraConfig, a: CgraArch, inputs: Mapping[str, np.ndarray], trip: int, window: Tuple[int, int]
) -> List[TraceRecord]:
    """One record per PE per cycle in the inclusive window; idle PEs give "nop" records."""
    lo, hi = window
    if lo < 0 or hi < lo:
        raise ValueError(f"bad trace window {window}")
    return _run(c, a, inputs, trip, (lo, hi))[1]


def replay_trace(
    c: CgraConfig, a: CgraArch, inputs: Mapping[str, np.ndarray], records: Iterable[TraceRecord], trip: int
) -> CgraSimState:
    """Drive a second machine from a trace: every FU result and store is taken from the records.

    The records must cover every issued operation (a window spanning the whole run). Routing,
    register writes and latch updates still come from the configuration, so the returned state
    equals `final_state` exactly when the trace is faithful. A record that disagrees with the
    configuration raises CgraSimError.
    """
    m = _machine(c, a, inputs, trip)
    m.script = {}
    for r in records:
        if r.unit == "fu" and r.op != "nop" and not r.op.startswith("busy:"):
            m.script[(r.cycle, int(r.pe))] = r
    _run_machine(m, c, m.trip)
    return m.st
