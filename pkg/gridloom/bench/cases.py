"""Built-in benchmark kernels, each in both input forms.

Every case carries a PRA (iteration-centric path), a loop nest (operation-centric
path), a seeded input generator and a direct oracle. Values are drawn from
[-128, 127] so accumulations up to N = 32 stay far from 32-bit overflow.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from gridloom.config import load_config
from gridloom.dfg.loopnest import (
    Affine,
    ArrayDecl,
    Assign,
    Carried,
    Imm,
    LoadStmt,
    Loop,
    LoopNestSpec,
    Ref,
    StoreStmt,
)
from gridloom.pra.model import PraProgram
from gridloom.pra.parser import parse_pra
from gridloom.util.words import apply_binary, wrap32

Images = Dict[str, np.ndarray]

VALUE_RANGE = (-128, 127)


def _wrap(x: np.ndarray) -> np.ndarray:
    return (((np.asarray(x, dtype=np.int64) + (1 << 31)) % (1 << 32)) - (1 << 31)).astype(np.int32)


def _rand(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    lo, hi = VALUE_RANGE
    return rng.integers(lo, hi + 1, size=shape, dtype=np.int64).astype(np.int32)


def _nonzero_diagonal(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    for i in range(min(a.shape)):
        if a[i, i] == 0:
            a[i, i] = 1
    return a


def _load(dest: str, array: str, *index: str) -> LoadStmt:
    return LoadStmt(dest, array, tuple(Affine.parse(x) for x in index))


def _store(array: str, index: Tuple[str, ...], value: str) -> StoreStmt:
    return StoreStmt(array, tuple(Affine.parse(x) for x in index), Ref(value))


def _op(dest: str, op: str, *args, guard: Optional[str] = None) -> Assign:
    return Assign(dest, op, tuple(Imm(a) if isinstance(a, int) else Ref(a) for a in args), guard=guard)


# -----------------
# GEMM: D = A . B + C
# -----------------
GEMM_PRA = """
program gemm {
  variable A 2 in int;
  variable B 2 in int;
  variable C 2 in int;
  variable D 2 out int;
  variable a 3 int;
  variable b 3 int;
  variable z 3 int;
  variable c 3 int;
  parameter N;
  par (i >= 0 and i <= N - 1 and j >= 0 and j <= N - 1 and k >= 0 and k <= N - 1) {
    S1: a[i, j, k] = A[i, k] if (j == 0);
    S2: a[i, j, k] = a[i, j - 1, k] if (j >= 1);
    S3: b[i, j, k] = B[k, j] if (i == 0);
    S4: b[i, j, k] = b[i - 1, j, k] if (i >= 1);
    S5: z[i, j, k] = a[i, j, k] * b[i, j, k];
    S6: c[i, j, k] = C[i, j] + z[i, j, k] if (k == 0);
    S7: c[i, j, k] = c[i, j, k - 1] + z[i, j, k] if (k >= 1);
    S8: D[i, j] = c[i, j, k] if (k == N - 1);
  }
}
"""

GEMM_NEST = LoopNestSpec(
    name="gemm",
    params=("N",),
    loops=(Loop("i", 0, "N"), Loop("j", 0, "N"), Loop("k", 0, "N")),
    arrays=(
        ArrayDecl("A", ("N", "N"), "in"),
        ArrayDecl("B", ("N", "N"), "in"),
        ArrayDecl("D", ("N", "N"), "out", init="C"),
    ),
    body=(
        _load("a", "A", "i", "k"),
        _load("b", "B", "k", "j"),
        _load("d", "D", "i", "j"),
        _op("m", "mul", "a", "b"),
        _op("s", "add", "d", "m"),
        _store("D", ("i", "j"), "s"),
    ),
)


def _gemm_inputs(n: int, rng: np.random.Generator) -> Images:
    return {"A": _rand(rng, (n, n)), "B": _rand(rng, (n, n)), "C": _rand(rng, (n, n))}


def _gemm_oracle(x: Mapping[str, np.ndarray]) -> Images:
    a, b, c = (np.asarray(x[k], dtype=np.int64) for k in "ABC")
    return {"D": _wrap(a @ b + c)}


# -----------------
# ATAX: y = A^T . (A . x)
# -----------------
ATAX_PRA = """
program atax {
  variable A 2 in int;
  variable x 1 in int;
  variable Y 1 out int;
  variable xv 2 int;
  variable p 2 int;
  variable t 2 int;
  variable tv 2 int;
  variable q 2 int;
  variable yv 2 int;
  parameter N;
  // the second half of each row reuses A[i, *] to accumulate y along i
  par (i >= 0 and i <= N - 1 and j >= 0 and j <= 2 * N - 1) {
    S1: xv[i, j] = x[j] if (i == 0 and j <= N - 1);
    S2: xv[i, j] = xv[i - 1, j] if (i >= 1 and j <= N - 1);
    S3: p[i, j] = A[i, j] * xv[i, j] if (j <= N - 1);
    S4: t[i, j] = p[i, j] if (j == 0);
    S5: t[i, j] = t[i, j - 1] + p[i, j] if (j >= 1 and j <= N - 1);
    S6: tv[i, j] = t[i, j - 1] if (j == N);
    S7: tv[i, j] = tv[i, j - 1] if (j >= N + 1);
    S8: q[i, j] = A[i, j - N] * tv[i, j] if (j >= N);
    S9: yv[i, j] = q[i, j] if (i == 0 and j >= N);
    S10: yv[i, j] = yv[i - 1, j] + q[i, j] if (i >= 1 and j >= N);
    S11: Y[j - N] = yv[i, j] if (i == N - 1 and j >= N);
  }
}
"""

# The two phases of a row run as the two iterations of the middle loop `p`.
ATAX_NEST = LoopNestSpec(
    name="atax",
    params=("N",),
    loops=(Loop("i", 0, "N"), Loop("p", 0, 2), Loop("j", 0, "N")),
    arrays=(
        ArrayDecl("A", ("N", "N"), "in"),
        ArrayDecl("x", ("N",), "in"),
        ArrayDecl("Y", ("N",), "out"),
    ),
    carried=(Carried("t", 0),),
    body=(
        _load("a", "A", "i", "j"),
        _load("xj", "x", "j"),
        _load("yj", "Y", "j"),
        _op("m0", "mul", "a", "xj"),
        _op("pj", "add", "p", "j"),
        _op("first", "cmp_eq", "pj", 0),
        _op("tb", "sel", "first", 0, "t"),
        _op("tn", "add", "tb", "m0"),
        _op("ph0", "cmp_eq", "p", 0),
        _op("t", "sel", "ph0", "tn", "t"),
        _op("m1", "mul", "a", "t"),
        _op("y2", "add", "yj", "m1"),
        _op("yo", "sel", "p", "y2", "yj"),
        _store("Y", ("j",), "yo"),
    ),
)


def _atax_inputs(n: int, rng: np.random.Generator) -> Images:
    return {"A": _rand(rng, (n, n)), "x": _rand(rng, (n,))}


def _atax_oracle(x: Mapping[str, np.ndarray]) -> Images:
    a = np.asarray(x["A"], dtype=np.int64)
    t = _wrap(a @ np.asarray(x["x"], dtype=np.int64)).astype(np.int64)
    return {"Y": _wrap(a.T @ t)}


# -----------------
# GESUMMV: y = A . x + B . x
# -----------------
GESUMMV_PRA = """
program gesummv {
  variable A 2 in int;
  variable B 2 in int;
  variable x 1 in int;
  variable Y 1 out int;
  variable xv 2 int;
  variable pa 2 int;
  variable pb 2 int;
  variable pp 2 int;
  variable s 2 int;
  parameter N;
  par (i >= 0 and i <= N - 1 and j >= 0 and j <= N - 1) {
    S1: xv[i, j] = x[j] if (i == 0);
    S2: xv[i, j] = xv[i - 1, j] if (i >= 1);
    S3: pa[i, j] = A[i, j] * xv[i, j];
    S4: pb[i, j] = B[i, j] * xv[i, j];
    S5: pp[i, j] = pa[i, j] + pb[i, j];
    S6: s[i, j] = pp[i, j] if (j == 0);
    S7: s[i, j] = s[i, j - 1] + pp[i, j] if (j >= 1);
    S8: Y[i] = s[i, j] if (j == N - 1);
  }
}
"""

GESUMMV_NEST = LoopNestSpec(
    name="gesummv",
    params=("N",),
    loops=(Loop("i", 0, "N"), Loop("j", 0, "N")),
    arrays=(
        ArrayDecl("A", ("N", "N"), "in"),
        ArrayDecl("B", ("N", "N"), "in"),
        ArrayDecl("x", ("N",), "in"),
        ArrayDecl("Y", ("N",), "out"),
    ),
    carried=(Carried("s", 0),),
    body=(
        _load("a", "A", "i", "j"),
        _load("b", "B", "i", "j"),
        _load("xj", "x", "j"),
        _op("pa", "mul", "a", "xj"),
        _op("pb", "mul", "b", "xj"),
        _op("pp", "add", "pa", "pb"),
        _op("first", "cmp_eq", "j", 0),
        _op("sb", "sel", "first", 0, "s"),
        _op("s", "add", "sb", "pp"),
        _store("Y", ("i",), "s"),
    ),
)


def _gesummv_inputs(n: int, rng: np.random.Generator) -> Images:
    return {"A": _rand(rng, (n, n)), "B": _rand(rng, (n, n)), "x": _rand(rng, (n,))}


def _gesummv_oracle(x: Mapping[str, np.ndarray]) -> Images:
    a, b, v = (np.asarray(x[k], dtype=np.int64) for k in ("A", "B", "x"))
    return {"Y": _wrap(a @ v + b @ v)}


# -----------------
# MVT: z1 = x1 + A . y1; z2 = x2 + A^T . y2
# -----------------
MVT_PRA = """
program mvt {
  variable A 2 in int;
  variable x1 1 in int;
  variable x2 1 in int;
  variable y1 1 in int;
  variable y2 1 in int;
  variable Z1 1 out int;
  variable Z2 1 out int;
  variable y1v 2 int;
  variable y2v 2 int;
  variable p1 2 int;
  variable p2 2 int;
  variable s1 2 int;
  variable s2 2 int;
  parameter N;
  par (i >= 0 and i <= N - 1 and j >= 0 and j <= N - 1) {
    S1: y1v[i, j] = y1[j] if (i == 0);
    S2: y1v[i, j] = y1v[i - 1, j] if (i >= 1);
    S3: y2v[i, j] = y2[i] if (j == 0);
    S4: y2v[i, j] = y2v[i, j - 1] if (j >= 1);
    S5: p1[i, j] = A[i, j] * y1v[i, j];
    S6: p2[i, j] = A[i, j] * y2v[i, j];
    S7: s1[i, j] = x1[i] + p1[i, j] if (j == 0);
    S8: s1[i, j] = s1[i, j - 1] + p1[i, j] if (j >= 1);
    S9: s2[i, j] = x2[j] + p2[i, j] if (i == 0);
    S10: s2[i, j] = s2[i - 1, j] + p2[i, j] if (i >= 1);
    S11: Z1[i] = s1[i, j] if (j == N - 1);
    S12: Z2[j] = s2[i, j] if (i == N - 1);
  }
}
"""

MVT_NEST = LoopNestSpec(
    name="mvt",
    params=("N",),
    loops=(Loop("i", 0, "N"), Loop("j", 0, "N")),
    arrays=(
        ArrayDecl("A", ("N", "N"), "in"),
        ArrayDecl("x1", ("N",), "in"),
        ArrayDecl("x2", ("N",), "in"),
        ArrayDecl("y1", ("N",), "in"),
        ArrayDecl("y2", ("N",), "in"),
        ArrayDecl("Z1", ("N",), "out"),
        ArrayDecl("Z2", ("N",), "out"),
    ),
    carried=(Carried("s1", 0),),
    body=(
        _load("a", "A", "i", "j"),
        _load("y1j", "y1", "j"),
        _load("y2i", "y2", "i"),
        _load("x1i", "x1", "i"),
        _load("x2j", "x2", "j"),
        _load("z2j", "Z2", "j"),
        _op("p1", "mul", "a", "y1j"),
        _op("p2", "mul", "a", "y2i"),
        _op("jf", "cmp_eq", "j", 0),
        _op("sb", "sel", "jf", "x1i", "s1"),
        _op("s1", "add", "sb", "p1"),
        _store("Z1", ("i",), "s1"),
        _op("if0", "cmp_eq", "i", 0),
        _op("zb", "sel", "if0", "x2j", "z2j"),
        _op("s2", "add", "zb", "p2"),
        _store("Z2", ("j",), "s2"),
    ),
)


def _mvt_inputs(n: int, rng: np.random.Generator) -> Images:
    return {k: _rand(rng, (n, n) if k == "A" else (n,)) for k in ("A", "x1", "x2", "y1", "y2")}


def _mvt_oracle(x: Mapping[str, np.ndarray]) -> Images:
    a = np.asarray(x["A"], dtype=np.int64)
    v = {k: np.asarray(x[k], dtype=np.int64) for k in ("x1", "x2", "y1", "y2")}
    return {"Z1": _wrap(v["x1"] + a @ v["y1"]), "Z2": _wrap(v["x2"] + a.T @ v["y2"])}


# -----------------
# TRISOLV: x_i = (y_i - sum_{j<i} x_j a_{j,i}) / a_{i,i}
# -----------------
TRISOLV_PRA = """
program trisolv {
  variable A 2 in int;
  variable y 1 in int;
  variable X 1 out int;
  variable s 2 int;
  variable t 2 int;
  variable xd 2 int;
  variable xx 2 int;
  parameter N;
  par (i >= 0 and i <= N - 1 and j >= 0 and j <= N - 1) {
    S1: s[i, j] = y[i] if (j == 0);
    S2: t[i, j] = A[j, i] * xx[i, j] if (j <= i - 1);
    S3: s[i, j] = s[i, j - 1] - t[i, j - 1] if (j >= 1 and j <= i);
    S4: xd[i, j] = s[i, j] / A[j, i] if (j == i);
    S5: xx[i, j] = xd[i - 1, j] if (i == j + 1);
    S6: xx[i, j] = xx[i - 1, j] if (i >= j + 2);
    S7: X[i] = xd[i, j] if (j == i);
  }
}
"""


def _trisolv_body(row: Tuple[str, ...], col: Tuple[str, ...]) -> Tuple:
    """Partially predicated forward substitution; `row`/`col` prefix the y and X subscripts."""
    return (
        _op("first", "cmp_eq", "j", 0),
        _load("yi", "y", *row, "i"),
        _op("sb", "sel", "first", "yi", "s"),
        _load("av", "A", "j", "i"),
        _load("xj", "X", *col, "j"),
        _op("prod", "mul", "av", "xj"),
        _op("lt", "cmp_lt", "j", "i"),
        _op("sd", "sub", "sb", "prod"),
        _op("s", "sel", "lt", "sd", "sb"),
        _op("diag", "cmp_eq", "j", "i"),
        _op("dv", "sel", "diag", "av", 1),
        _op("q", "div", "s", "dv"),
        _op("xo", "sel", "diag", "q", "xj"),
        _store("X", (*col, "j"), "xo"),
    )


TRISOLV_NEST = LoopNestSpec(
    name="trisolv",
    params=("N",),
    loops=(Loop("i", 0, "N"), Loop("j", 0, "N")),
    arrays=(
        ArrayDecl("A", ("N", "N"), "in"),
        ArrayDecl("y", ("N",), "in"),
        ArrayDecl("X", ("N",), "out"),
    ),
    carried=(Carried("s", 0),),
    body=_trisolv_body((), ()),
)


def _trisolv_inputs(n: int, rng: np.random.Generator) -> Images:
    return {"A": _nonzero_diagonal(_rand(rng, (n, n))), "y": _rand(rng, (n,))}


def _solve(a: np.ndarray, y: np.ndarray) -> np.ndarray:
    n = len(y)
    out = [0] * n
    for i in range(n):
        s = int(y[i])
        for j in range(i):
            s = apply_binary("sub", s, wrap32(int(a[j, i]) * out[j]))
        out[i] = apply_binary("div", s, int(a[i, i]))
    return np.asarray(out, dtype=np.int32)


def _trisolv_oracle(x: Mapping[str, np.ndarray]) -> Images:
    return {"X": _solve(np.asarray(x["A"]), np.asarray(x["y"]))}


# -----------------
# TRSM: TRISOLV over the N right-hand sides y[k, *]
# -----------------
TRSM_PRA = """
program trsm {
  variable A 2 in int;
  variable y 2 in int;
  variable X 2 out int;
  variable s 3 int;
  variable t 3 int;
  variable xd 3 int;
  variable xx 3 int;
  parameter N;
  par (k >= 0 and k <= N - 1 and i >= 0 and i <= N - 1 and j >= 0 and j <= N - 1) {
    S1: s[k, i, j] = y[k, i] if (j == 0);
    S2: t[k, i, j] = A[j, i] * xx[k, i, j] if (j <= i - 1);
    S3: s[k, i, j] = s[k, i, j - 1] - t[k, i, j - 1] if (j >= 1 and j <= i);
    S4: xd[k, i, j] = s[k, i, j] / A[j, i] if (j == i);
    S5: xx[k, i, j] = xd[k, i - 1, j] if (i == j + 1);
    S6: xx[k, i, j] = xx[k, i - 1, j] if (i >= j + 2);
    S7: X[k, i] = xd[k, i, j] if (j == i);
  }
}
"""

TRSM_NEST = LoopNestSpec(
    name="trsm",
    params=("N",),
    loops=(Loop("k", 0, "N"), Loop("i", 0, "N"), Loop("j", 0, "N")),
    arrays=(
        ArrayDecl("A", ("N", "N"), "in"),
        ArrayDecl("y", ("N", "N"), "in"),
        ArrayDecl("X", ("N", "N"), "out"),
    ),
    carried=(Carried("s", 0),),
    body=_trisolv_body(("k",), ("k",)),
)


def _trsm_inputs(n: int, rng: np.random.Generator) -> Images:
    return {"A": _nonzero_diagonal(_rand(rng, (n, n))), "y": _rand(rng, (n, n))}


def _trsm_oracle(x: Mapping[str, np.ndarray]) -> Images:
    a, y = np.asarray(x["A"]), np.asarray(x["y"])
    return {"X": np.stack([_solve(a, y[k]) for k in range(y.shape[0])])}


# -----------------
# registry
# -----------------
@dataclass(frozen=True)
class BenchmarkCase:
    name: str
    pra_text: str
    nest: LoopNestSpec
    make_inputs: Callable[[int, np.random.Generator], Images]
    oracle: Callable[[Mapping[str, np.ndarray]], Images]
    default_n: int = 20
    # published II per path: "tcpa" for the tiled mapping, otherwise the
    # best published CGRA mapper result for that loop optimization (absent where it failed)
    reference_ii: Tuple[Tuple[str, int], ...] = ()

    @property
    def pra(self) -> PraProgram:
        return _parsed(self.pra_text)

    @property
    def depth(self) -> int:
        return self.pra.space.n

    def params(self, n: Optional[int] = None) -> Dict[str, int]:
        return {"N": int(self.default_n if n is None else n)}

    def inputs(self, n: Optional[int] = None, seed: int = 1) -> Images:
        return self.make_inputs(self.params(n)["N"], np.random.default_rng(seed))


@lru_cache(maxsize=None)
def _parsed(text: str) -> PraProgram:
    return parse_pra(text)


_CASES: Tuple[BenchmarkCase, ...] = (
    BenchmarkCase(
        "GEMM", GEMM_PRA, GEMM_NEST, _gemm_inputs, _gemm_oracle,
        reference_ii=(("tcpa", 1), ("none", 10), ("flat", 6), ("flat+unroll", 6)),
    ),
    BenchmarkCase(
        "ATAX", ATAX_PRA, ATAX_NEST, _atax_inputs, _atax_oracle,
        reference_ii=(("tcpa", 3), ("none", 13), ("flat", 10), ("flat+unroll", 25)),
    ),
    BenchmarkCase(
        "GESUMMV", GESUMMV_PRA, GESUMMV_NEST, _gesummv_inputs, _gesummv_oracle,
        reference_ii=(("tcpa", 3), ("none", 8), ("flat", 5), ("flat+unroll", 7)),
    ),
    BenchmarkCase(
        "MVT", MVT_PRA, MVT_NEST, _mvt_inputs, _mvt_oracle,
        reference_ii=(("tcpa", 3), ("none", 8), ("flat", 5), ("flat+unroll", 7)),
    ),
    BenchmarkCase(
        "TRISOLV", TRISOLV_PRA, TRISOLV_NEST, _trisolv_inputs, _trisolv_oracle,
        reference_ii=(("tcpa", 6), ("none", 10)),
    ),
)

TRSM_CASE = BenchmarkCase("TRSM", TRSM_PRA, TRSM_NEST, _trsm_inputs, _trsm_oracle, default_n=8)


def builtin_benchmarks(include_trsm: Optional[bool] = None) -> List[BenchmarkCase]:
    """The five kernels, plus TRSM when asked for (or GRIDLOOM_ENABLE_TRSM is set)."""
    if include_trsm is None:
        include_trsm = load_config().ENABLE_TRSM
    return list(_CASES) + ([TRSM_CASE] if include_trsm else [])


def get_case(name: str) -> BenchmarkCase:
    for c in list(_CASES) + [TRSM_CASE]:
        if c.name.lower() == name.lower():
            return c
    raise KeyError(f"unknown benchmark {name!r}; expected one of {[c.name for c in _CASES + (TRSM_CASE,)]}")
