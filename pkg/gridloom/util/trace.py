from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

# Field order of a trace line. Both simulators emit exactly these keys.
FIELDS = ("cycle", "pe", "unit", "op", "it", "args", "res", "mem", "xfer")


@dataclass(frozen=True)
class MemEvent:
    kind: str  # "ld" | "st"
    array: str
    address: int
    value: int


@dataclass(frozen=True)
class TraceRecord:
    cycle: int
    pe: str
    unit: str
    op: str  # "nop" for idle slots
    iteration: int = -1
    args: Tuple[int, ...] = ()
    result: Optional[int] = None
    mem: Optional[MemEvent] = None
    xfer: Tuple[str, ...] = ()


def format_record(r: TraceRecord) -> str:
    mem = "-" if r.mem is None else f"{r.mem.kind}:{r.mem.array}:{r.mem.address}:{r.mem.value}"
    return " ".join(
        [
            f"cycle={r.cycle}",
            f"pe={r.pe}",
            f"unit={r.unit}",
            f"op={r.op}",
            f"it={r.iteration}",
            "args=" + (",".join(str(a) for a in r.args) or "-"),
            "res=" + ("-" if r.result is None else str(r.result)),
            f"mem={mem}",
            "xfer=" + (",".join(r.xfer) or "-"),
        ]
    )


def parse_record(line: str) -> TraceRecord:
    parts = line.split()
    kv: Dict[str, str] = {}
    for p in parts:
        k, _, v = p.partition("=")
        kv[k] = v
    missing = [f for f in FIELDS if f not in kv]
    if missing or [p.partition("=")[0] for p in parts] != list(FIELDS):
        raise ValueError(f"malformed trace line: {line!r}")
    mem: Optional[MemEvent] = None
    if kv["mem"] != "-":
        kind, array, addr, value = kv["mem"].split(":")
        mem = MemEvent(kind, array, int(addr), int(value))
    return TraceRecord(
        cycle=int(kv["cycle"]),
        pe=kv["pe"],
        unit=kv["unit"],
        op=kv["op"],
        iteration=int(kv["it"]),
        args=() if kv["args"] == "-" else tuple(int(a) for a in kv["args"].split(",")),
        result=None if kv["res"] == "-" else int(kv["res"]),
        mem=mem,
        xfer=() if kv["xfer"] == "-" else tuple(kv["xfer"].split(",")),
    )


def format_trace(records: Iterable[TraceRecord]) -> str:
    return "".join(format_record(r) + "\n" for r in records)


def parse_trace(text: str) -> List[TraceRecord]:
    return [parse_record(line) for line in text.splitlines() if line.strip()]
