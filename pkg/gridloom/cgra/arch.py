from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Mapping, Tuple, Union

from gridloom.dfg.graph import DEFAULT_LATENCY
from gridloom.errors import ArchError

Link = Tuple[int, int]  # unit link between adjacent PEs (from, to)


@dataclass(frozen=True)
class CgraArch:
    """Grid of single-FU PEs with a 4-neighbor mesh.

    PE ids are row-major. Memory-capable PE k owns SPM bank k. A move may
    cover up to `hop_reach` PEs along a row or column in one cycle and uses
    every unit link on the way.
    """

    name: str = "cgra_4x4"
    rows: int = 4
    cols: int = 4
    latencies: Tuple[Tuple[str, int], ...] = tuple(sorted(DEFAULT_LATENCY.items()))
    memory_pes: Tuple[int, ...] = ()
    hop_reach: int = 1
    pass_registers: int = 10
    config_depth: int = 16
    bank_bytes: int = 4096
    pipelined_div: bool = False
    extra: Tuple[Tuple[str, Any], ...] = field(default=())

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ArchError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if not self.memory_pes:
            object.__setattr__(self, "memory_pes", tuple(r * self.cols for r in range(self.rows)))
        for p in self.memory_pes:
            if not 0 <= p < self.pe_count:
                raise ArchError(f"memory PE {p} outside the grid")
        if self.hop_reach < 1:
            raise ArchError("hop_reach must be >= 1")

    @property
    def pe_count(self) -> int:
        return self.rows * self.cols

    @property
    def banks(self) -> int:
        return len(self.memory_pes)

    @property
    def bank_words(self) -> int:
        return self.bank_bytes // 4

    def latency(self, op: str) -> int:
        return dict(self.latencies).get(op, DEFAULT_LATENCY.get(op, 1))

    def busy(self, op: str) -> int:
        """Issue slots an op holds its FU for."""
        if op == "Div" and not self.pipelined_div:
            return self.latency(op)
        return 1

    def coords(self, pe: int) -> Tuple[int, int]:
        return divmod(pe, self.cols)

    def pe_at(self, r: int, c: int) -> int:
        return r * self.cols + c

    def bank_owner(self, bank: int) -> int:
        if not 0 <= bank < self.banks:
            raise ArchError(f"bank {bank} does not exist ({self.banks} memory PEs)")
        return self.memory_pes[bank]

    def bank_of(self, pe: int) -> int:
        return self.memory_pes.index(pe) if pe in self.memory_pes else -1

    def hops(self, a: int, b: int) -> int:
        """Minimum number of one-cycle moves from a to b."""
        (r1, c1), (r2, c2) = self.coords(a), self.coords(b)
        h = self.hop_reach
        return -(-abs(r1 - r2) // h) + -(-abs(c1 - c2) // h)

    def moves(self, pe: int) -> List[Tuple[int, Tuple[Link, ...]]]:
        return list(_moves(self.rows, self.cols, self.hop_reach, pe))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "kind": "cgra",
            "rows": self.rows,
            "cols": self.cols,
            "latencies": dict(self.latencies),
            "memory_pes": list(self.memory_pes),
            "hop_reach": self.hop_reach,
            "pass_registers": self.pass_registers,
            "config_depth": self.config_depth,
            "bank_bytes": self.bank_bytes,
            "pipelined_div": self.pipelined_div,
        }


@lru_cache(maxsize=None)
def _moves(rows: int, cols: int, reach: int, pe: int) -> Tuple[Tuple[int, Tuple[Link, ...]], ...]:
    r, c = divmod(pe, cols)
    out: List[Tuple[int, Tuple[Link, ...]]] = []
    for dr, dc in ((-1, 0), (0, 1), (1, 0), (0, -1)):
        links: List[Link] = []
        cur = pe
        for step in range(1, reach + 1):
            nr, nc = r + dr * step, c + dc * step
            if not (0 <= nr < rows and 0 <= nc < cols):
                break
            nxt = nr * cols + nc
            links.append((cur, nxt))
            cur = nxt
            out.append((nxt, tuple(links)))
    out.sort(key=lambda m: m[0])
    return tuple(out)


def arch_from_dict(d: Mapping[str, Any]) -> CgraArch:
    lat = dict(DEFAULT_LATENCY)
    lat.update({str(k): int(v) for k, v in dict(d.get("latencies", {})).items()})
    try:
        return CgraArch(
            name=str(d.get("name", "cgra")),
            rows=int(d["rows"]),
            cols=int(d["cols"]),
            latencies=tuple(sorted(lat.items())),
            memory_pes=tuple(int(p) for p in d.get("memory_pes", [])),
            hop_reach=int(d.get("hop_reach", 1)),
            pass_registers=int(d.get("pass_registers", 10)),
            config_depth=int(d.get("config_depth", 16)),
            bank_bytes=int(d.get("bank_bytes", 4096)),
            pipelined_div=bool(d.get("pipelined_div", False)),
        )
    except KeyError as e:
        raise ArchError(f"architecture description lacks {e}") from e


def load_cgra_arch(path: Union[str, Path]) -> CgraArch:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    if d.get("kind", "cgra") != "cgra":
        raise ArchError(f"{path} describes a {d.get('kind')} architecture, not a CGRA")
    return arch_from_dict(d)
