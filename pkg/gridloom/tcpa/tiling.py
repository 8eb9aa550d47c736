from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import List, Mapping, Optional, Sequence, Tuple

from gridloom.errors import TilingError
from gridloom.pra.interpret import classify_dependency
from gridloom.pra.model import IterationSpace, PraProgram, VarRef
from gridloom.util.log import make_debug

_debug = make_debug("tcpa.tiling")

Point = Tuple[int, ...]


@dataclass(frozen=True)
class Tiling:
    """LSGP decomposition of a box: each PE runs one tile sequentially, tiles run in parallel.

    `dims` lists the tiled dimensions in grid order: with two of them the
    first runs down the array rows and the second across the columns; with
    one, tiles are laid out row-major over the whole array.
    """

    lower: Tuple[int, ...]
    counts: Tuple[int, ...]  # t
    sizes: Tuple[int, ...]  # p
    dims: Tuple[int, ...]
    rows: int
    cols: int
    params: Tuple[Tuple[str, int], ...] = ()

    @property
    def n(self) -> int:
        return len(self.counts)

    @property
    def extents(self) -> Tuple[int, ...]:
        return tuple(t * p for t, p in zip(self.counts, self.sizes))

    @property
    def upper(self) -> Tuple[int, ...]:
        return tuple(lo + e - 1 for lo, e in zip(self.lower, self.extents))

    @property
    def tile_count(self) -> int:
        out = 1
        for t in self.counts:
            out *= t
        return out

    @property
    def tile_iterations(self) -> int:
        out = 1
        for p in self.sizes:
            out *= p
        return out

    @property
    def unused_pes(self) -> int:
        return self.rows * self.cols - self.tile_count

    @property
    def param_map(self) -> dict:
        return dict(self.params)

    @property
    def strides(self) -> Tuple[int, ...]:
        """Row-major strides over J, innermost dimension fastest."""
        out = [1] * self.n
        for d in range(self.n - 2, -1, -1):
            out[d] = out[d + 1] * self.sizes[d + 1]
        return tuple(out)

    @property
    def j_max(self) -> Point:
        return tuple(p - 1 for p in self.sizes)

    def tiles(self) -> List[Point]:
        return list(itertools.product(*(range(t) for t in self.counts)))

    def intra(self) -> List[Point]:
        return list(itertools.product(*(range(p) for p in self.sizes)))

    def ordinal(self, j: Point) -> int:
        return sum(a * b for a, b in zip(j, self.strides))

    def unrank(self, o: int) -> Point:
        out = []
        for s in self.strides:
            q, o = divmod(o, s)
            out.append(q)
        return tuple(out)

    def point(self, k: Point, j: Point) -> Point:
        return tuple(lo + kk * p + jj for lo, kk, p, jj in zip(self.lower, k, self.sizes, j))

    def split(self, x: Point) -> Tuple[Point, Point]:
        """(tile, offset) of a point; tile coordinates may fall outside the tile grid."""
        k, j = [], []
        for lo, p, v in zip(self.lower, self.sizes, x):
            q, r = divmod(v - lo, p)
            k.append(q)
            j.append(r)
        return tuple(k), tuple(j)

    def has_tile(self, k: Point) -> bool:
        return all(0 <= kk < t for kk, t in zip(k, self.counts))

    def pe(self, k: Point) -> Tuple[int, int]:
        if len(self.dims) >= 2:
            return k[self.dims[0]], k[self.dims[1]]
        if len(self.dims) == 1:
            return divmod(k[self.dims[0]], self.cols)
        return 0, 0

    def hops(self, k: Point, k2: Point) -> int:
        (r1, c1), (r2, c2) = self.pe(k), self.pe(k2)
        return abs(r1 - r2) + abs(c1 - c2)

    def to_dict(self) -> dict:
        return {
            "counts": list(self.counts),
            "sizes": list(self.sizes),
            "lower": list(self.lower),
            "dims": list(self.dims),
            "array": [self.rows, self.cols],
            "params": dict(self.params),
        }


def tileable_dims(p: PraProgram) -> Tuple[int, ...]:
    """Dimensions in which no internal dependency points backwards."""
    n = p.space.n
    ok = [True] * n
    for e in p.equations:
        for k, a in enumerate(e.args):
            if not isinstance(a, VarRef) or p.kind_of(a.var) != "internal":
                continue
            d = classify_dependency(p, e, k).distance or ()
            for dim, v in enumerate(d):
                if v < 0:
                    ok[dim] = False
    return tuple(d for d in range(n) if ok[d])


def _divisors(n: int, cap: int) -> List[int]:
    return [d for d in range(1, min(n, cap) + 1) if n % d == 0]


def _admissible(ext: Sequence[int], dims: Sequence[int], rows: int, cols: int) -> List[Tuple[int, ...]]:
    n = len(ext)
    out: List[Tuple[int, ...]] = []
    if len(dims) >= 2:
        for a in _divisors(ext[dims[0]], rows):
            for b in _divisors(ext[dims[1]], cols):
                t = [1] * n
                t[dims[0]], t[dims[1]] = a, b
                out.append(tuple(t))
    elif len(dims) == 1:
        for a in _divisors(ext[dims[0]], rows * cols):
            t = [1] * n
            t[dims[0]] = a
            out.append(tuple(t))
    else:
        out.append((1,) * n)
    return out


def partition(
    s: IterationSpace,
    params: Mapping[str, int],
    rows: int,
    cols: int,
    *,
    tileable: Optional[Sequence[int]] = None,
    counts: Optional[Sequence[int]] = None,
) -> Tiling:
    """Choose tile counts for a rows x cols array.

    Only the two outermost tileable dimensions are split. The product of the
    counts is maximized; ties go to the larger count in the outer dimension.
    Explicit `counts` are checked instead of searched.
    """
    bounds = s.bounds(params)
    ext = tuple(max(0, hi - lo + 1) for lo, hi in bounds)
    if any(e == 0 for e in ext):
        raise TilingError(f"iteration space {ext} is empty")
    allowed = tuple(d for d in (range(s.n) if tileable is None else sorted(set(tileable))) if 0 <= d < s.n)
    dims = allowed[:2]
    options = _admissible(ext, dims, rows, cols)
    if counts is not None:
        t = tuple(int(c) for c in counts)
        if t not in options:
            raise TilingError(f"tile counts {t} do not divide {ext} on a {rows}x{cols} array", factorizations=options)
    else:
        t = max(options, key=lambda c: (_prod(c), [c[d] for d in dims]))
    tiling = Tiling(
        lower=tuple(lo for lo, _ in bounds),
        counts=t,
        sizes=tuple(e // c for e, c in zip(ext, t)),
        dims=tuple(dims),
        rows=rows,
        cols=cols,
        params=tuple(sorted((k, int(v)) for k, v in params.items())),
    )
    _debug(f"extents={ext} on {rows}x{cols}: t={t} p={tiling.sizes}")
    return tiling


def _prod(t: Sequence[int]) -> int:
    out = 1
    for x in t:
        out *= x
    return out
