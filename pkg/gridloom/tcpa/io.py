from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

from gridloom.errors import IoAllocError
from gridloom.pra.interpret import compile_equations, enumerate_iterations
from gridloom.pra.model import Literal, PraProgram, VarRef
from gridloom.tcpa.arch import TcpaArch
from gridloom.tcpa.tiling import Point, Tiling
from gridloom.util.log import make_debug

_debug = make_debug("tcpa.io")

# grid axis -> (low side, high side)
_BORDERS = {0: ("north", "south"), 1: ("west", "east")}

Access = Tuple[str, int]  # (equation label, argument); -1 is the written target
Layout = Tuple[Tuple[int, ...], int]  # (strides s_x, offset alpha_x)


@dataclass(frozen=True)
class AgConfig:
    """Affine address stream: address(i) = m . i + mu over the iterations a bank serves."""

    var: str
    border: str
    bank: int
    access: Access
    m: Tuple[int, ...]
    mu: int
    strides: Tuple[int, ...]
    alpha: int
    tiles: Tuple[Point, ...]

    def address(self, x: Point) -> int:
        return sum(a * b for a, b in zip(self.m, x)) + self.mu

    def to_dict(self) -> dict:
        return {
            "var": self.var,
            "border": self.border,
            "bank": self.bank,
            "access": f"{self.access[0]}.{self.access[1]}",
            "m": list(self.m),
            "mu": self.mu,
            "s": list(self.strides),
            "alpha": self.alpha,
            "tiles": [list(k) for k in self.tiles],
        }


@dataclass(frozen=True)
class IoAllocation:
    streams: Tuple[AgConfig, ...]
    served: Dict[Tuple[str, int, Point], int] = field(default_factory=dict)  # (label, arg, tile) -> stream
    bank_words: int = 128

    def stream(self, label: str, arg: int, k: Point) -> AgConfig:
        try:
            return self.streams[self.served[(label, arg, k)]]
        except KeyError:
            raise IoAllocError(f"no address generator serves {label}.{arg} in tile {k}") from None

    def banks(self) -> List[Tuple[str, int]]:
        return sorted({(s.border, s.bank) for s in self.streams})


def _border(t: Tiling, xs: List[Point]) -> Tuple[str, int]:
    """Border side and grid axis the coordinate of a bank counts along."""
    if len(t.dims) >= 2:
        for axis, d in enumerate(t.dims[:2]):
            if t.counts[d] == 1:
                continue
            lo, hi = t.lower[d], t.upper[d]
            if all(x[d] == lo for x in xs):
                return _BORDERS[axis][0], 1 - axis
            if all(x[d] == hi for x in xs):
                return _BORDERS[axis][1], 1 - axis
    return "east", 0


def _row_major(ext: Tuple[int, ...]) -> Tuple[int, ...]:
    out = [1] * len(ext)
    for d in range(len(ext) - 2, -1, -1):
        out[d] = out[d + 1] * ext[d + 1]
    return tuple(out)


def allocate_io(
    p: PraProgram,
    t: Tiling,
    layouts: Optional[Mapping[str, Layout]] = None,
    *,
    a: Optional[TcpaArch] = None,
) -> IoAllocation:
    """Address generators for every input read and output write.

    Accesses confined to the first or last slice of a tiled dimension are
    served from the matching border, one bank per array row or column; all
    others from the east border bank of the PE's row. Without an explicit
    layout a bank stores the bounding box of the indices it serves, row-major.
    """
    a = a or TcpaArch(rows=t.rows, cols=t.cols)
    layouts = dict(layouts or {})
    params = t.param_map
    comp = compile_equations(p, params)
    points = enumerate_iterations(p.space, params)

    accesses: List[Tuple[Access, str, Tuple[Tuple[int, ...], ...], Tuple[int, ...]]] = []
    for pos, e in enumerate(p.equations):
        refs: List[Tuple[int, VarRef]] = []
        if p.kind_of(e.target.var) == "output":
            refs.append((-1, e.target))
        for k, arg in enumerate(e.args):
            if not isinstance(arg, Literal) and p.kind_of(arg.var) == "input":
                refs.append((k, arg))
        for k, ref in refs:
            off = tuple(o.evaluate(params) for o in ref.index.offset)
            accesses.append(((e.label, k), ref.var, ref.index.matrix, off))

    label_pos = {e.label: i for i, e in enumerate(p.equations)}
    # (border, coordinate, var) -> [(access, tile, points)]
    groups: Dict[Tuple[str, int, str], List[Tuple[Access, Point, List[Point]]]] = {}
    for acc, var, _matrix, _off in accesses:
        c = comp[label_pos[acc[0]]]
        xs = [x for x in points if c.active(x)]
        if not xs:
            continue
        side, axis = _border(t, xs)
        by_tile: Dict[Point, List[Point]] = {}
        for x in xs:
            by_tile.setdefault(t.split(x)[0], []).append(x)
        for k, kx in sorted(by_tile.items()):
            coord = t.pe(k)[axis]
            groups.setdefault((side, coord, var), []).append((acc, k, kx))

    meta = {acc: (var, m, off) for acc, var, m, off in accesses}
    bank_no: Dict[Tuple[str, int, str], int] = {}
    per_border: Dict[str, int] = {}
    for key in sorted(groups):
        bank_no[key] = per_border.get(key[0], 0)
        per_border[key[0]] = bank_no[key] + 1
    for side, used in sorted(per_border.items()):
        if used > a.banks_per_border:
            raise IoAllocError(f"{side} border needs {used} banks, has {a.banks_per_border}")

    streams: List[AgConfig] = []
    served: Dict[Tuple[str, int, Point], int] = {}
    ag_use: Dict[str, int] = {}
    for key in sorted(groups):
        side, _coord, var = key
        members = groups[key]
        idxs = [
            tuple(sum(r * v for r, v in zip(row, x)) + o for row, o in zip(meta[acc][1], meta[acc][2]))
            for acc, _k, xs in members
            for x in xs
        ]
        rank = len(idxs[0]) if idxs else 0
        if var in layouts:
            s, alpha = tuple(layouts[var][0]), int(layouts[var][1])
        else:
            lo = tuple(min(ix[d] for ix in idxs) for d in range(rank))
            hi = tuple(max(ix[d] for ix in idxs) for d in range(rank))
            s = _row_major(tuple(h - l + 1 for l, h in zip(lo, hi)))
            alpha = -sum(a_ * b for a_, b in zip(s, lo))
        for ix in idxs:
            addr = sum(a_ * b for a_, b in zip(s, ix)) + alpha
            if not 0 <= addr < a.bank_words:
                raise IoAllocError(f"bank overflow: {var}{list(ix)} maps to word {addr} of a {a.bank_words}-word bank on the {side} border")
        accs = sorted({acc for acc, _k, _x in members})
        for acc in accs:
            _var, matrix, off = meta[acc]
            n = t.n
            m = tuple(sum(s[r] * matrix[r][c] for r in range(rank)) for c in range(n))
            mu = sum(s[r] * off[r] for r in range(rank)) + alpha
            tiles = tuple(sorted({k for ac, k, _x in members if ac == acc}))
            idx = len(streams)
            streams.append(AgConfig(var, side, bank_no[key], acc, m, mu, s, alpha, tiles))
            for k in tiles:
                served[(acc[0], acc[1], k)] = idx
            ag_use[side] = ag_use.get(side, 0) + 1
    for side, used in sorted(ag_use.items()):
        if used > a.ag_count:
            raise IoAllocError(f"{side} border needs {used} address generators, has {a.ag_count}")
    _debug(f"{p.name}: {len(streams)} address streams over {sum(per_border.values())} banks")
    return IoAllocation(tuple(streams), served, a.bank_words)
