from __future__ import annotations

import numpy as np
import pytest

from gridloom.bench.cases import GEMM_PRA, TRISOLV_PRA, get_case
from gridloom.errors import InterpretError, MemImageError, PraSemanticError, PraSyntaxError, UnboundParameterError
from gridloom.pra import (
    classify_dependency,
    enumerate_iterations,
    format_pra,
    interpret,
    parse_pra,
    validate_program,
)
from gridloom.pra.interpret import instance_graph
from gridloom.pra.memimage import dumps_images, load_images, loads_images, save_images
from gridloom.pra.model import IterationSpace, ParamExpr

COPY = """
program copy {
  variable x 1 in int;
  variable y 1 out int;
  parameter N;
  par (i >= 0 and i <= N - 1) {
    y[i] = x[i];
  }
}
"""


def _box(n: int, hi: int) -> IterationSpace:
    names = tuple(f"i{d}" for d in range(n))
    return IterationSpace(names, tuple(ParamExpr.of(0) for _ in names), tuple(ParamExpr.of(hi) for _ in names))


# -----------------
# parsing
# -----------------
def test_parse_gemm_counts():
    p = parse_pra(GEMM_PRA)
    assert p.name == "gemm"
    assert p.parameters == ("N",)
    assert len(p.equations) == 8
    assert len(p.internals) == 4
    assert len(p.inputs) == 3 and len(p.outputs) == 1


def test_parse_minimal_program():
    p = parse_pra(COPY)
    assert len(p.equations) == 1
    e = p.equations[0]
    assert e.op == "copy"
    assert e.args[0].index.is_identity(1)


def test_unbalanced_guard_reports_line():
    text = COPY.replace("y[i] = x[i];", "y[i] = x[i] if ((i >= 0);")
    with pytest.raises(PraSyntaxError) as err:
        parse_pra(text)
    assert err.value.line == 7
    assert "line 7" in str(err.value)


def test_unknown_identifier():
    with pytest.raises(PraSemanticError, match="unknown identifier"):
        parse_pra(COPY.replace("x[i];", "w[i];"))


def test_two_operators_is_arity_error():
    with pytest.raises(PraSemanticError, match="arity"):
        parse_pra(COPY.replace("x[i];", "x[i] + x[i] + x[i];"))


def test_round_trip_preserves_structure():
    for name in ("GEMM", "ATAX", "GESUMMV", "MVT", "TRISOLV"):
        p = get_case(name).pra
        assert parse_pra(format_pra(p)) == p


# -----------------
# validation
# -----------------
def test_gemm_validates_clean():
    assert validate_program(parse_pra(GEMM_PRA)) == []


def test_non_identity_internal_indexing_flagged():
    p = parse_pra(GEMM_PRA.replace("a[i, j - 1, k] if", "a[i, k, j - 1] if"))
    assert any("non-identity indexing on internal variable" in d for d in validate_program(p))


def test_overlapping_domains_flagged():
    p = parse_pra(GEMM_PRA.replace("c[i, j, k - 1] + z[i, j, k] if (k >= 1)", "c[i, j, k - 1] + z[i, j, k] if (k >= 0)"))
    diags = validate_program(p)
    assert any("single assignment" in d for d in diags)


# -----------------
# iteration spaces and dependencies
# -----------------
def test_enumerate_box():
    pts = enumerate_iterations(_box(3, 1), {})
    assert len(pts) == 8
    assert pts[0] == (0, 0, 0) and pts[-1] == (1, 1, 1)


def test_enumerate_gemm_space():
    p = parse_pra(GEMM_PRA)
    assert len(enumerate_iterations(p.space, {"N": 4})) == 64


def test_enumerate_empty_dimension():
    assert enumerate_iterations(_box(1, -1), {}) == []


def test_unbound_parameter():
    p = parse_pra(GEMM_PRA)
    with pytest.raises(UnboundParameterError):
        interpret(p, {}, {})


def test_classify_gemm_dependencies():
    p = parse_pra(GEMM_PRA)
    assert classify_dependency(p, p.equation("S1"), 0).kind == "input"
    assert classify_dependency(p, p.equation("S5"), 0).kind == "intra-iteration"
    dep = classify_dependency(p, p.equation("S7"), 0)
    assert dep.kind == "inter-iteration"
    assert dep.distance == (0, 0, 1)


@pytest.mark.parametrize("n", [2, 4])
def test_instance_graph_acyclic(n):
    import networkx as nx

    for name in ("GEMM", "MVT", "TRISOLV"):
        g, undefined = instance_graph(get_case(name).pra, {"N": n})
        assert nx.is_directed_acyclic_graph(g)
        assert undefined == []


# -----------------
# interpreter
# -----------------
def test_identity_times_b_plus_zero(rng):
    p = parse_pra(GEMM_PRA)
    b = rng.integers(-128, 128, size=(4, 4), dtype=np.int32)
    out = interpret(p, {"N": 4}, {"A": np.eye(4, dtype=np.int32), "B": b, "C": np.zeros((4, 4), np.int32)})
    assert np.array_equal(out["D"], b)


@pytest.mark.parametrize("name", ["GEMM", "ATAX", "GESUMMV", "MVT", "TRISOLV"])
@pytest.mark.parametrize("n", [4, 8])
def test_interpreter_matches_oracle(name, n):
    case = get_case(name)
    x = case.inputs(n, seed=3)
    got = interpret(case.pra, case.params(n), x)
    want = case.oracle(x)
    for k, v in want.items():
        assert np.array_equal(got[k], v), k


def test_evaluation_order_independent():
    case = get_case("MVT")
    x = case.inputs(4, seed=5)
    a = interpret(case.pra, {"N": 4}, x)
    b = interpret(case.pra, {"N": 4}, x, order="random", seed=11)
    c = interpret(case.pra, {"N": 4}, x, order="topological")
    for k in a:
        assert np.array_equal(a[k], b[k]) and np.array_equal(a[k], c[k])


def test_trisolv_single_element():
    p = parse_pra(TRISOLV_PRA)
    out = interpret(p, {"N": 1}, {"A": np.array([[3]], np.int32), "y": np.array([-7], np.int32)})
    assert out["X"].tolist() == [-2]  # truncation toward zero


def test_division_by_zero_names_iteration():
    p = parse_pra(TRISOLV_PRA)
    with pytest.raises(InterpretError) as err:
        interpret(p, {"N": 1}, {"A": np.array([[0]], np.int32), "y": np.array([5], np.int32)})
    assert err.value.iteration == (0, 0)


def test_missing_input():
    with pytest.raises(InterpretError, match="missing input"):
        interpret(parse_pra(COPY), {"N": 2}, {})


# -----------------
# memory images
# -----------------
def test_memory_image_file(tmp_path, rng):
    images = {"A": rng.integers(-5, 5, size=(3, 2), dtype=np.int32), "s": np.array(9, dtype=np.int32)}
    path = tmp_path / "in.glmi"
    save_images(path, images)
    assert path.read_bytes()[:4] == b"GLMI"
    back = load_images(path)
    assert set(back) == {"A", "s"}
    assert np.array_equal(back["A"], images["A"]) and back["s"].shape == ()


def test_memory_image_scalar_keeps_rank_zero():
    raw = dumps_images({"s": np.int32(-3)})
    # magic, count, name_len, "s", rank 0, one int32 payload word
    assert len(raw) == 4 + 4 + 2 + 1 + 1 + 4
    assert raw[11] == 0
    back = loads_images(raw)["s"]
    assert back.shape == () and int(back) == -3


def test_memory_image_non_contiguous_input():
    a = np.arange(6, dtype=np.int32).reshape(2, 3).T
    back = loads_images(dumps_images({"a": a}))["a"]
    assert back.shape == (3, 2) and np.array_equal(back, a)


def test_memory_image_rejects_garbage():
    with pytest.raises(MemImageError):
        loads_images(b"NOPE")
    with pytest.raises(MemImageError):
        loads_images(dumps_images({"x": np.arange(4, dtype=np.int32)})[:-2])
