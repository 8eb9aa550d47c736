from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Tuple, Union

from gridloom.errors import ArchError

FU_KINDS = ("adder", "multiplier", "divider", "copy")

# PRA operation -> FU kind able to run it
OP_KIND: Dict[str, str] = {
    "add": "adder",
    "sub": "adder",
    "select": "adder",
    "compare": "adder",
    "mul": "multiplier",
    "div": "divider",
    "copy": "copy",
}


@dataclass(frozen=True)
class FuSpec:
    name: str
    kind: str
    latency: int = 1
    pipelined: bool = True
    capacity: int = 32  # instruction memory words

    @property
    def busy(self) -> int:
        return 1 if self.pipelined else self.latency


def _default_fus() -> Tuple[FuSpec, ...]:
    return (
        FuSpec("add0", "adder", 1, True, 78),
        FuSpec("add1", "adder", 1, True, 25),
        FuSpec("mul0", "multiplier", 1, True, 51),
        FuSpec("div0", "divider", 16, True, 29),
        FuSpec("cpy0", "copy", 1, True, 20),
        FuSpec("cpy1", "copy", 1, True, 20),
        FuSpec("cpy2", "copy", 1, True, 20),
    )


@dataclass(frozen=True)
class TcpaArch:
    """Processor array of multi-FU PEs with border I/O buffers."""

    name: str = "tcpa_4x4"
    rows: int = 4
    cols: int = 4
    fus: Tuple[FuSpec, ...] = _default_fus()
    rd: int = 8
    fd: int = 8
    id: int = 8
    od: int = 8
    fifo_capacity: int = 280  # words shared by all FDs and IDs of one PE
    id_depth: int = 8
    channels: int = 8  # per neighbor direction
    banks_per_border: int = 32
    bank_words: int = 128
    ag_count: int = 32  # address generators per border

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ArchError(f"array must be at least 1x1, got {self.rows}x{self.cols}")
        if self.fifo_capacity < 1:
            raise ArchError("FIFO capacity must be >= 1")
        names = [f.name for f in self.fus]
        if len(set(names)) != len(names):
            raise ArchError(f"duplicate FU names in {names}")
        for f in self.fus:
            if f.kind not in FU_KINDS:
                raise ArchError(f"FU {f.name} has unknown kind {f.kind!r}")

    @property
    def pe_count(self) -> int:
        return self.rows * self.cols

    def fus_of(self, kind: str) -> List[FuSpec]:
        return [f for f in self.fus if f.kind == kind]

    def fu(self, name: str) -> FuSpec:
        for f in self.fus:
            if f.name == name:
                return f
        raise KeyError(name)

    def kind_latency(self, kind: str) -> int:
        fs = self.fus_of(kind)
        if not fs:
            raise ArchError(f"{self.name} has no {kind} unit")
        return fs[0].latency

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "kind": "tcpa",
            "rows": self.rows,
            "cols": self.cols,
            "fus": [
                {"name": f.name, "kind": f.kind, "latency": f.latency, "pipelined": f.pipelined, "capacity": f.capacity}
                for f in self.fus
            ],
            "registers": {"rd": self.rd, "fd": self.fd, "id": self.id, "od": self.od},
            "fifo_capacity": self.fifo_capacity,
            "id_depth": self.id_depth,
            "channels": self.channels,
            "io": {"banks_per_border": self.banks_per_border, "bank_words": self.bank_words, "ag_count": self.ag_count},
        }


def tcpa_arch_from_dict(d: Mapping[str, Any]) -> TcpaArch:
    regs = dict(d.get("registers", {}))
    io = dict(d.get("io", {}))
    try:
        fus = tuple(
            FuSpec(
                name=str(f["name"]),
                kind=str(f["kind"]),
                latency=int(f.get("latency", 1)),
                pipelined=bool(f.get("pipelined", True)),
                capacity=int(f.get("capacity", 32)),
            )
            for f in d.get("fus", [])
        ) or _default_fus()
        return TcpaArch(
            name=str(d.get("name", "tcpa")),
            rows=int(d["rows"]),
            cols=int(d["cols"]),
            fus=fus,
            rd=int(regs.get("rd", 8)),
            fd=int(regs.get("fd", 8)),
            id=int(regs.get("id", 8)),
            od=int(regs.get("od", 8)),
            fifo_capacity=int(d.get("fifo_capacity", 280)),
            id_depth=int(d.get("id_depth", 8)),
            channels=int(d.get("channels", 8)),
            banks_per_border=int(io.get("banks_per_border", 32)),
            bank_words=int(io.get("bank_words", 128)),
            ag_count=int(io.get("ag_count", 32)),
        )
    except KeyError as e:
        raise ArchError(f"architecture description lacks {e}") from e


def load_tcpa_arch(path: Union[str, Path]) -> TcpaArch:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    if d.get("kind", "tcpa") != "tcpa":
        raise ArchError(f"{path} describes a {d.get('kind')} architecture, not a TCPA")
    return tcpa_arch_from_dict(d)
