from __future__ import annotations

from collections import deque
from typing import Deque, Dict, List, Mapping, Optional, Tuple

import numpy as np

from gridloom.errors import IoAllocError, TcpaSimError
from gridloom.pra.interpret import compile_equations
from gridloom.tcpa.arch import TcpaArch
from gridloom.tcpa.configuration import TcpaConfiguration
from gridloom.tcpa.programs import TcpaWord
from gridloom.tcpa.schedule import predict_latency
from gridloom.tcpa.tiling import Point
from gridloom.util.log import make_debug
from gridloom.util.simresult import SimResult
from gridloom.util.trace import MemEvent, TraceRecord
from gridloom.util.words import apply_binary, select, wrap32

_debug = make_debug("tcpa.sim")

__all__ = ["predict_latency", "simulate_tcpa", "dump_tcpa_trace"]

# cycle -> [(tile, destination, value, iteration point)]
Landing = Tuple[Point, str, int, Point]


def _compute(op: str, args: List[int], cycle: int, pe: Tuple[int, int], label: str) -> int:
    if op == "copy":
        return wrap32(args[0])
    if op == "select":
        return select(args[0], args[1], args[2])
    if op == "compare":
        return apply_binary("cmp_lt", args[0], args[1])
    try:
        return apply_binary(op, args[0], args[1])
    except ZeroDivisionError:
        raise TcpaSimError(f"{label}: division by zero", cycle=cycle, pe=pe) from None


class _Array:
    def __init__(self, c: TcpaConfiguration, a: TcpaArch, inputs: Mapping[str, np.ndarray]):
        self.c, self.a = c, a
        t, s = c.tiling, c.schedule
        self.t, self.s = t, s
        self.tiles = t.tiles()
        self.cls = {k: c.class_of(k).index for k in self.tiles}
        self.base = {k: s.tile_start(k) for k in self.tiles}
        self.slots = sorted({(f, st, w) for f, st, w in zip(s.fus, s.starts, s.latencies)})
        self.words: Dict[Tuple[int, str], Dict[Tuple[int, int], TcpaWord]] = {}
        for cls, progs in c.programs.items():
            for fu, prog in progs.items():
                self.words[(cls, fu)] = {(pid, prog.words[w].start): prog.words[w] for pid, w in prog.branch}
        self.fd_depth = {f"FD{f.index}": f.depth for f in c.binding.fd.values()}
        self.id_depth = {f"ID{ch.id}": ch.depth for ch in c.binding.channels.values()}
        self.od = {f"OD{ch.od}": (key[2], ch.hops, f"ID{ch.id}") for key, ch in c.binding.channels.items()}
        self.rd: Dict[Tuple[Point, str], int] = {}
        self.fifo: Dict[Tuple[Point, str], Deque[int]] = {}
        self.peak: Dict[str, int] = {}
        self.events: Dict[int, List[Landing]] = {}
        self.completion = {k: 0 for k in self.tiles}
        self.busy = {k: 0 for k in self.tiles}
        self.banks: Dict[Tuple[str, int], np.ndarray] = {}
        self.comp = compile_equations(c.program, t.param_map)
        self.pos = {e.label: i for i, e in enumerate(c.program.equations)}
        self._prefill(inputs)

    def pe(self, k: Point) -> Tuple[int, int]:
        return self.t.pe(k)

    # -----------------
    # I/O buffers
    # -----------------
    def _served(self, label: str, k: Point) -> List[Point]:
        comp = self.comp[self.pos[label]]
        return [x for x in (self.t.point(k, j) for j in self.t.intra()) if comp.active(x)]

    def _bank(self, border: str, bank: int) -> np.ndarray:
        key = (border, bank)
        if key not in self.banks:
            self.banks[key] = np.zeros(self.a.bank_words, dtype=np.int64)
        return self.banks[key]

    def _ref(self, label: str, arg: int):
        eq = self.c.program.equations[self.pos[label]]
        return eq.target if arg < 0 else eq.args[arg]

    def _prefill(self, inputs: Mapping[str, np.ndarray]) -> None:
        params = self.t.param_map
        for st in self.c.io.streams:
            if st.access[1] < 0:
                continue
            if st.var not in inputs:
                raise TcpaSimError(f"missing input image {st.var!r}", cycle=0)
            data = np.asarray(inputs[st.var])
            ref = self._ref(*st.access)
            bank = self._bank(st.border, st.bank)
            for k in st.tiles:
                for x in self._served(st.access[0], k):
                    idx = ref.index.apply(x, params)
                    if any(i < 0 or i >= n for i, n in zip(idx, data.shape)):
                        raise TcpaSimError(f"{st.var}{list(idx)} lies outside input extents {data.shape}", cycle=0)
                    bank[self._address(st.address(x), st.var, 0, k)] = int(data[idx])

    def _address(self, addr: int, var: str, cycle: int, k: Point) -> int:
        if not 0 <= addr < self.a.bank_words:
            raise TcpaSimError(f"bank address {addr} of {var} out of range", cycle=cycle, pe=self.pe(k))
        return addr

    def drain(self) -> Dict[str, np.ndarray]:
        params = self.t.param_map
        out = {v.name: np.zeros(self.c.shapes[v.name], dtype=np.int32) for v in self.c.program.outputs}
        for st in self.c.io.streams:
            if st.access[1] >= 0:
                continue
            ref = self._ref(*st.access)
            bank = self._bank(st.border, st.bank)
            for k in st.tiles:
                for x in self._served(st.access[0], k):
                    out[st.var][ref.index.apply(x, params)] = wrap32(int(bank[st.address(x)]))
        return out

    # -----------------
    # registers
    # -----------------
    def read(self, k: Point, src: str, x: Point, cycle: int) -> Tuple[int, Optional[MemEvent]]:
        if src.startswith("#"):
            return int(src[1:]), None
        if src.startswith("IN:"):
            label, arg = src[3:].rsplit(".", 1)
            try:
                st = self.c.io.stream(label, int(arg), k)
            except IoAllocError as e:
                raise TcpaSimError(str(e), cycle=cycle, pe=self.pe(k)) from None
            addr = self._address(st.address(x), st.var, cycle, k)
            v = int(self._bank(st.border, st.bank)[addr])
            return v, MemEvent("ld", st.var, addr, v)
        if src.startswith("RD"):
            if (k, src) not in self.rd:
                raise TcpaSimError("read before any write", cycle=cycle, pe=self.pe(k), register=src)
            return self.rd[(k, src)], None
        q = self.fifo.get((k, src))
        if not q:
            raise TcpaSimError("FIFO underflow", cycle=cycle, pe=self.pe(k), register=src)
        self.peak[src] = max(self.peak.get(src, 0), len(q))
        return q.popleft(), None

    def push(self, k: Point, reg: str, v: int, depth: int, cycle: int) -> None:
        q = self.fifo.setdefault((k, reg), deque())
        if len(q) >= depth:
            raise TcpaSimError(f"FIFO overflow (depth {depth})", cycle=cycle, pe=self.pe(k), register=reg)
        q.append(v)

    def land(self, cycle: int) -> Optional[MemEvent]:
        for k, dst, v, x in self.events.pop(cycle, []):
            if dst.startswith("RD"):
                self.rd[(k, dst)] = v
            elif dst.startswith("FD"):
                self.push(k, dst, v, self.fd_depth[dst], cycle)
            elif dst.startswith("ID"):
                self.push(k, dst, v, self.id_depth[dst], cycle)
            elif dst.startswith("OD"):
                delta, hops, reg = self.od[dst]
                k2 = tuple(a + b for a, b in zip(k, delta))
                if self.t.has_tile(k2):  # else it leaves the array
                    self.events.setdefault(cycle + hops, []).append((k2, reg, v, x))
            else:
                label = dst[4:]
                st = self.c.io.stream(label, -1, k)
                addr = self._address(st.address(x), st.var, cycle, k)
                self._bank(st.border, st.bank)[addr] = v
        return None

    # -----------------
    # lockstep execution
    # -----------------
    def step(self, cycle: int, record: bool) -> List[TraceRecord]:
        self.land(cycle)
        ii = self.s.ii
        n_iter = self.t.tile_iterations
        records: List[TraceRecord] = []
        for k in self.tiles:
            did: Dict[str, TraceRecord] = {}
            for fu, start, lat in self.slots:
                rel = cycle - self.base[k] - start
                if rel < 0 or rel % ii:
                    continue
                o = rel // ii
                if o >= n_iter:
                    continue
                cls = self.cls[k]
                w = self.words[(cls, fu)].get((self.c.gc.pattern(cls, o), start))
                if w is None:
                    continue
                self.completion[k] = max(self.completion[k], cycle + lat)
                x = self.t.point(k, self.t.unrank(o))
                args: List[int] = []
                mem: Optional[MemEvent] = None
                for src in w.srcs:
                    v, ev = self.read(k, src, x, cycle)
                    args.append(v)
                    mem = mem or ev
                res = _compute(w.op, args, cycle, self.pe(k), w.label)
                for dst in w.dsts:
                    self.events.setdefault(cycle + w.latency, []).append((k, dst, res, x))
                if w.dsts and w.dsts[0].startswith("OUT:"):
                    st = self.c.io.stream(w.dsts[0][4:], -1, k)
                    mem = MemEvent("st", st.var, st.address(x), res)
                did[fu] = TraceRecord(cycle, "", fu, w.label, o, tuple(args), res, mem, w.dsts)
            if did:
                self.busy[k] += 1
            if record:
                r, c = self.pe(k)
                for f in self.a.fus:
                    rec = did.get(f.name)
                    if rec is None:
                        records.append(TraceRecord(cycle, f"{r},{c}", f.name, "nop"))
                    else:
                        records.append(
                            TraceRecord(cycle, f"{r},{c}", f.name, rec.op, rec.iteration, rec.args, rec.result, rec.mem, rec.xfer)
                        )
        return records

    def end(self) -> int:
        if not self.c.program.equations:
            return 0
        tail = self.s.ii * (self.t.tile_iterations - 1) + self.s.makespan
        return max(self.base[k] + tail for k in self.tiles)


def _run(
    c: TcpaConfiguration, a: TcpaArch, inputs: Mapping[str, np.ndarray], window: Optional[Tuple[int, int]] = None
) -> Tuple[SimResult, List[TraceRecord]]:
    if c.tiling.rows != a.rows or c.tiling.cols != a.cols:
        raise TcpaSimError(
            f"configuration targets {c.tiling.rows}x{c.tiling.cols}, architecture is {a.rows}x{a.cols}", cycle=0
        )
    m = _Array(c, a, inputs)
    stop = m.end()
    if window is not None:
        stop = max(stop, window[1])
    records: List[TraceRecord] = []
    for cycle in range(stop + 1):
        rec = window is not None and window[0] <= cycle <= window[1]
        records.extend(m.step(cycle, rec))
    # PEs that never executed a word do not count towards first/last completion
    done = [v for k, v in m.completion.items() if m.busy[k]] or [0]
    result = SimResult(
        outputs=m.drain(),
        latency=max(done),
        iterations=c.tiling.tile_count * c.tiling.tile_iterations,
        first_pe_latency=min(done),
        last_pe_latency=max(done),
        busy={"{},{}".format(*m.pe(k)): n for k, n in m.busy.items()},
        fifo_peak=dict(sorted(m.peak.items())),
    )
    _debug(f"{c.name}: first={result.first_pe_latency} last={result.last_pe_latency}")
    return result, records


def simulate_tcpa(c: TcpaConfiguration, a: TcpaArch, inputs: Mapping[str, np.ndarray]) -> SimResult:
    """Run every PE in lockstep until the last scheduled operation retires."""
    return _run(c, a, inputs)[0]


def dump_tcpa_trace(
    c: TcpaConfiguration, a: TcpaArch, inputs: Mapping[str, np.ndarray], window: Tuple[int, int]
) -> List[TraceRecord]:
    """One record per FU of every PE per cycle in the inclusive window."""
    lo, hi = window
    if lo < 0 or hi < lo:
        raise ValueError(f"bad trace window {window}")
    return _run(c, a, inputs, (lo, hi))[1]
