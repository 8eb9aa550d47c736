from __future__ import annotations

import numpy as np
import pytest

from gridloom.bench.cases import GEMM_NEST, get_case
from gridloom.dfg import build_loop_dfg, evaluate_loopnest, flatten_loop, rec_mii, res_mii, unroll_loop
from gridloom.dfg.analysis import cycle_ratios, min_ii
from gridloom.dfg.export import to_dot, to_text, write_graphml
from gridloom.dfg.graph import Dfg, DfgEdge, DfgNode
from gridloom.dfg.layout import plan_layout
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
    loopnest_from_dict,
    loopnest_to_dict,
    validate_loopnest,
)
from gridloom.errors import ConfigGenError, LoopNestError


def _ix(*xs) -> tuple:
    return tuple(Affine.parse(x) for x in xs)


COPY_NEST = LoopNestSpec(
    name="copy",
    params=("N",),
    loops=(Loop("i", 0, "N"),),
    arrays=(ArrayDecl("x", ("N",), "in"), ArrayDecl("y", ("N",), "out")),
    body=(LoadStmt("v", "x", _ix("i")), StoreStmt("y", _ix("i"), Ref("v"))),
)

# acc += x[j] whenever i < j
GUARDED = LoopNestSpec(
    name="guarded",
    params=("N",),
    loops=(Loop("i", 0, "N"), Loop("j", 0, "N")),
    arrays=(ArrayDecl("x", ("N",), "in"), ArrayDecl("y", (1,), "out")),
    carried=(Carried("acc", 0),),
    body=(
        LoadStmt("t", "x", _ix("j")),
        Assign("c", "cmp_lt", (Ref("i"), Ref("j"))),
        Assign("acc", "add", (Ref("acc"), Ref("t")), guard="c"),
        StoreStmt("y", _ix(0), Ref("acc")),
    ),
)


def _gemm_inputs(n: int, seed: int = 1):
    return get_case("GEMM").inputs(n, seed)


# -----------------
# graph construction
# -----------------
def test_gemm_body_has_22_nodes():
    g = build_loop_dfg(GEMM_NEST, {"N": 4})
    assert g.node_count == 22
    assert g.section_counts()["index"] == 9
    assert sum(1 for n in g.ops if n.op in ("Load", "Store")) == 4
    assert g.trip_count == 64
    assert g.check() == []


def test_guarded_update_is_one_select():
    g = build_loop_dfg(GUARDED, {"N": 4})
    sels = [n for n in g.ops if n.op == "Sel" and n.section == "compute"]
    assert len(sels) == 1


def test_copy_loop_has_one_load_and_store():
    g = build_loop_dfg(COPY_NEST, {"N": 8})
    ops = [n.op for n in g.ops]
    assert ops.count("Load") == 1 and ops.count("Store") == 1
    assert g.section_counts()["index"] == 3


def test_memory_nodes_carry_banks():
    g = build_loop_dfg(GEMM_NEST, {"N": 4}, banks=4, bank_bytes=4096)
    banks = {n.array: n.bank for n in g.ops if n.array}
    assert banks == {"A": 0, "B": 1, "D": 2}


# -----------------
# transforms
# -----------------
def test_flatten_counts_iterations():
    flat = flatten_loop(GUARDED)
    assert len(flat.loops) == 1
    assert flat.trip_count({"N": 4}) == 16


def test_flatten_single_level_is_identity():
    assert flatten_loop(COPY_NEST) == COPY_NEST


@pytest.mark.parametrize("spec", [GEMM_NEST, GUARDED])
def test_flatten_preserves_semantics(spec):
    x = _gemm_inputs(4) if spec is GEMM_NEST else {"x": np.arange(-2, 2, dtype=np.int32)}
    want = evaluate_loopnest(spec, {"N": 4}, x)
    got = evaluate_loopnest(flatten_loop(spec), {"N": 4}, x)
    for k in want:
        assert np.array_equal(got[k], want[k])


def test_guarded_accumulation_value():
    x = np.array([3, -1, 4, 2], dtype=np.int32)
    out = evaluate_loopnest(GUARDED, {"N": 4}, {"x": x})
    assert out["y"].tolist() == [int(sum(j * v for j, v in enumerate(x)))]


def test_unroll_factor_one_is_identity():
    assert unroll_loop(GEMM_NEST, 1, {"N": 4}) == GEMM_NEST


def test_unroll_copy_by_two():
    u = unroll_loop(COPY_NEST, 2, {"N": 8})
    assert u.trip_count({"N": 8}) == 4
    assert sum(isinstance(s, LoadStmt) for s in u.body) == 2
    assert sum(isinstance(s, StoreStmt) for s in u.body) == 2
    x = {"x": np.arange(8, dtype=np.int32)}
    assert np.array_equal(evaluate_loopnest(u, {"N": 8}, x)["y"], x["x"])


def test_unroll_gemm_inner_by_four():
    u = unroll_loop(GEMM_NEST, 4, {"N": 4})
    assert sum(isinstance(s, Assign) and s.op == "mul" for s in u.body) == 4
    x = _gemm_inputs(4)
    assert np.array_equal(evaluate_loopnest(u, {"N": 4}, x)["D"], evaluate_loopnest(GEMM_NEST, {"N": 4}, x)["D"])


def test_unroll_rejects_indivisible_extent():
    with pytest.raises(LoopNestError, match="not divisible"):
        unroll_loop(COPY_NEST, 3, {"N": 8})


def test_nest_dict_round_trip():
    assert loopnest_from_dict(loopnest_to_dict(GEMM_NEST)) == GEMM_NEST
    assert validate_loopnest(GEMM_NEST) == []


# -----------------
# bounds
# -----------------
def _graph(lat, edges) -> Dfg:
    nodes = [DfgNode(id=i, op="Add", latency=l, section="compute") for i, l in enumerate(lat)]
    return Dfg(name="t", nodes=nodes, edges=[DfgEdge(s, d, p, distance=dist) for s, d, p, dist in edges])


def test_index_chain_recurrence():
    g = build_loop_dfg(GEMM_NEST, {"N": 4})
    assert rec_mii(g) == 3


def test_res_mii_matches_pe_budget():
    g = build_loop_dfg(GEMM_NEST, {"N": 4})
    assert res_mii(g, 9) == 3
    assert res_mii(g, 16) == 2
    assert min_ii(g, 16) == 3


def test_acyclic_graph_bound_is_one():
    assert rec_mii(_graph([1, 1, 1], [(0, 1, 0, 0), (1, 2, 0, 0)])) == 1
    assert res_mii(_graph([1], []), 1) == 1


def test_two_node_cycle():
    g = _graph([1, 2], [(0, 1, 0, 0), (1, 0, 0, 1)])
    assert rec_mii(g) == 3
    cycles = cycle_ratios(g)
    assert max(-(-w // d) for _, w, d in cycles if d) == 3
    assert rec_mii(g, method="search") == 3


# -----------------
# layout and export
# -----------------
def test_first_fit_layout_offsets():
    lay = plan_layout([("a", 256), ("b", 256)], banks=1, bank_bytes=4096)
    assert [p.byte_offset for p in lay.placements] == [0, 1024]


def test_layout_overflow():
    with pytest.raises(ConfigGenError):
        plan_layout([("a", 2000)], banks=1, bank_bytes=4096)


def test_exports(tmp_path):
    g = build_loop_dfg(COPY_NEST, {"N": 4})
    assert to_dot(g).startswith('digraph "copy"')
    text = to_text(g)
    assert text.splitlines()[0].startswith("DFG copy nodes=")
    assert sum(1 for line in text.splitlines() if line.startswith("NODE")) == g.node_count
    write_graphml(g, tmp_path / "g.graphml")
    assert (tmp_path / "g.graphml").stat().st_size > 0
