from __future__ import annotations

import dataclasses
import random

import numpy as np
import pytest

from gridloom.bench.cases import GEMM_NEST, get_case
from gridloom.bench.runner import cgra_pipeline
from gridloom.cgra import (
    CgraArch,
    CgraMapping,
    dump_trace,
    exhaustive_map,
    final_state,
    format_mapping,
    generate_config,
    map_dfg,
    replay_trace,
    simulate_cgra,
    validate_mapping,
)
from gridloom.cgra.schedule import list_schedule, recurrence_order
from gridloom.cgra.sim import read_outputs
from gridloom.dfg import build_loop_dfg, rec_mii
from gridloom.dfg.analysis import min_ii
from gridloom.dfg.graph import Dfg, DfgEdge, DfgNode
from gridloom.errors import CgraSimError, ConfigGenError, MappingFailed, TractabilityError
from gridloom.pra import interpret
from gridloom.util.trace import format_trace, parse_trace

from conftest import KERNELS


def _gemm_dfg(a: CgraArch, n: int = 4) -> Dfg:
    return build_loop_dfg(GEMM_NEST, {"N": n}, latencies=dict(a.latencies), banks=a.banks, bank_bytes=a.bank_bytes)


def _adds(count: int, edges) -> Dfg:
    nodes = [DfgNode(id=i, op="Add", section="compute") for i in range(count)]
    return Dfg(name="rand", nodes=nodes, edges=[DfgEdge(s, d, p, distance=dist) for s, d, p, dist in edges])


def _random_dfg(seed: int) -> Dfg:
    r = random.Random(seed)
    n = r.randint(1, 6)
    edges = []
    fan_in = [0] * n
    for d in range(1, n):
        for s in r.sample(range(d), k=min(d, r.randint(1, 2))):
            edges.append((s, d, fan_in[d], 0))
            fan_in[d] += 1
    if n > 1 and r.random() < 0.5 and fan_in[0] < 2:
        edges.append((n - 1, 0, fan_in[0], r.randint(1, 2)))
    return _adds(n, edges)


# -----------------
# mapping
# -----------------
@pytest.fixture(scope="module")
def gemm_mapping(cgra4):
    g = _gemm_dfg(cgra4)
    return g, map_dfg(g, cgra4)


def test_gemm_mapping_valid_and_bounded(cgra4, gemm_mapping):
    g, m = gemm_mapping
    assert validate_mapping(m, g, cgra4) == []
    assert min_ii(g, cgra4.pe_count) == 3
    assert 3 <= m.ii <= 7


def test_modulo_slots_exclusive(gemm_mapping):
    g, m = gemm_mapping
    slots = [(m.binding[n.id], m.schedule[n.id] % m.ii) for n in g.ops]
    assert len(slots) == len(set(slots))


def test_mapping_report_lists_every_node(gemm_mapping):
    g, m = gemm_mapping
    text = format_mapping(m, g)
    assert text.startswith(f"MAPPING gemm II={m.ii}")
    assert sum(1 for line in text.splitlines() if line.startswith("NODE")) == g.node_count


def test_single_load_on_one_pe():
    a = CgraArch(name="one", rows=1, cols=1)
    g = Dfg(name="ld", nodes=[DfgNode(id=0, op="Load", section="memory", array="x", bank=0)])
    m = map_dfg(g, a)
    assert m.ii == 1 and m.schedule == {0: 0}


def test_resource_bound_failure(cgra3):
    g = _gemm_dfg(cgra3)
    with pytest.raises(MappingFailed) as err:
        map_dfg(g, cgra3, ii_limit=2)
    assert err.value.bottleneck == "resource bound 3"


def test_shifted_consumer_is_flagged(cgra4, gemm_mapping):
    g, m = gemm_mapping
    e = next(e for e in g.edges if e.kind == "data" and not g.nodes[e.src].is_const and e.distance == 0)
    bad = CgraMapping(ii=m.ii, binding=dict(m.binding), schedule=dict(m.schedule), routes=dict(m.routes))
    bad.schedule[e.dst] += 1
    assert validate_mapping(bad, g, cgra4) != []


def test_store_on_interior_pe_is_flagged(cgra4, gemm_mapping):
    g, m = gemm_mapping
    store = next(n for n in g.ops if n.op == "Store")
    bad = CgraMapping(ii=m.ii, binding=dict(m.binding), schedule=dict(m.schedule), routes=dict(m.routes))
    bad.binding[store.id] = cgra4.pe_at(1, 1)
    assert any("memory-affinity" in v for v in validate_mapping(bad, g, cgra4))


@pytest.mark.slow
def test_anneal_strategy_valid(cgra4):
    g = _gemm_dfg(cgra4)
    m = map_dfg(g, cgra4, strategy="anneal", seed=3)
    assert validate_mapping(m, g, cgra4) == []
    assert 3 <= m.ii <= 7


@pytest.mark.parametrize("strategy", ["heuristic", pytest.param("anneal", marks=pytest.mark.slow)])
def test_same_seed_same_mapping(cgra4, strategy):
    g = _gemm_dfg(cgra4)
    m1 = map_dfg(g, cgra4, strategy, seed=5)
    m2 = map_dfg(g, cgra4, strategy, seed=5)
    assert (m1.ii, m1.binding, m1.schedule, m1.routes) == (m2.ii, m2.binding, m2.schedule, m2.routes)
    assert format_mapping(m1, g) == format_mapping(m2, g)


def test_memory_pe_slots_are_kept_for_memory_ops():
    a = CgraArch(name="pair", rows=1, cols=2)
    nodes = [
        DfgNode(id=0, op="Add", section="compute"),
        DfgNode(id=1, op="Add", section="compute"),
        DfgNode(id=2, op="Load", section="memory", array="x", bank=0),
    ]
    g = Dfg(name="mem", nodes=nodes, edges=[DfgEdge(0, 1, 0), DfgEdge(1, 2, 0)])
    binding, sched = list_schedule(g, a, 2)
    assert binding == {0: 0, 1: 1, 2: 0}
    assert sched[2] % 2 != sched[0] % 2


def test_memory_recurrence_scheduled_as_one_group(cgra4, gemm_mapping):
    g, m = gemm_mapping
    load_d = next(n.id for n in g.ops if n.op == "Load" and n.array == "D")
    store = next(n.id for n in g.ops if n.op == "Store")
    mul = next(n.id for n in g.ops if n.op == "Mul" and n.section == "compute")
    groups = recurrence_order(g)
    group = next(c for c in groups if store in c)
    assert load_d in group and len(group) == 3
    flat = [v for c in groups for v in c]
    assert flat.index(mul) < flat.index(load_d)
    # the load waits for the product instead of stretching the carried store -> load edge
    assert m.schedule[load_d] >= m.schedule[mul]
    assert m.schedule[store] - m.schedule[load_d] < m.ii


def test_unknown_strategy(cgra4, gemm_mapping):
    with pytest.raises(ValueError):
        map_dfg(gemm_mapping[0], cgra4, strategy="greedy")


# -----------------
# exhaustive search
# -----------------
def test_exhaustive_empty_graph():
    m = exhaustive_map(Dfg(name="empty"), CgraArch(rows=2, cols=2), 1)
    assert m is not None and m.binding == {}


def test_exhaustive_chain_at_ii_one():
    a = CgraArch(rows=2, cols=2)
    g = _adds(4, [(0, 1, 0, 0), (1, 2, 0, 0), (2, 3, 0, 0)])
    m = exhaustive_map(g, a, 1)
    assert m is not None
    assert validate_mapping(m, g, a) == []


def test_exhaustive_respects_recurrence():
    a = CgraArch(rows=2, cols=2)
    g = _adds(3, [(0, 1, 0, 0), (1, 2, 0, 0), (2, 0, 0, 1)])
    assert rec_mii(g) == 3
    assert exhaustive_map(g, a, 2) is None


def test_exhaustive_guard(cgra4):
    with pytest.raises(TractabilityError):
        exhaustive_map(_gemm_dfg(cgra4), cgra4, 3)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(50))
def test_heuristic_agrees_with_exhaustive(seed):
    a = CgraArch(rows=2, cols=2)
    g = _random_dfg(seed)
    best = next((ii for ii in range(min_ii(g, a.pe_count), 9) if exhaustive_map(g, a, ii) is not None), None)
    try:
        got = map_dfg(g, a, ii_limit=8, exact_fallback=False).ii
    except MappingFailed:
        got = None
    assert got == best


# -----------------
# configuration and simulation
# -----------------
def test_config_depth_limit(cgra4, gemm_mapping):
    g, _ = gemm_mapping
    with pytest.raises(ConfigGenError, match="configuration memory depth"):
        generate_config(CgraMapping(ii=17), g, cgra4)


def test_config_words_per_pe(cgra4, gemm_mapping):
    g, m = gemm_mapping
    c = generate_config(m, g, cgra4)
    assert c.pe_count == cgra4.pe_count
    assert all(len(words) == m.ii for words in c.words)


def test_zero_trip_leaves_memory(cgra4, gemm_mapping, gemm):
    g, m = gemm_mapping
    x = gemm.inputs(4, seed=2)
    res = simulate_cgra(generate_config(m, g, cgra4), cgra4, x, 0)
    assert res.latency == 0
    assert np.array_equal(res.outputs["D"], x["C"])


def test_latency_formula(cgra4, gemm_mapping, gemm):
    g, m = gemm_mapping
    res = simulate_cgra(generate_config(m, g, cgra4), cgra4, gemm.inputs(4, seed=2), g.trip_count)
    assert res.latency == m.ii * (g.trip_count - 1) + m.makespan(g)


def test_trace_window_and_replay(cgra4, gemm_mapping, gemm):
    g, m = gemm_mapping
    c = generate_config(m, g, cgra4)
    x = gemm.inputs(4, seed=4)
    first = dump_trace(c, cgra4, x, g.trip_count, (0, 0))
    assert len(first) == cgra4.pe_count
    res = simulate_cgra(c, cgra4, x, g.trip_count)
    records = dump_trace(c, cgra4, x, g.trip_count, (0, res.latency))
    assert any(r.op == "nop" for r in records)
    want = final_state(c, cgra4, x, g.trip_count)
    got = replay_trace(c, cgra4, x, parse_trace(format_trace(records)), g.trip_count)
    assert np.array_equal(got.spm, want.spm)
    assert (got.out, got.regs, got.links, got.issued) == (want.out, want.regs, want.links, want.issued)
    assert np.array_equal(read_outputs(c, got.spm)["D"], res.outputs["D"])


def test_replay_uses_recorded_values(cgra4, gemm_mapping, gemm):
    g, m = gemm_mapping
    c = generate_config(m, g, cgra4)
    x = gemm.inputs(4, seed=4)
    records = dump_trace(c, cgra4, x, g.trip_count, (0, simulate_cgra(c, cgra4, x, g.trip_count).latency))
    # the last store of the run is never overwritten
    i = max(i for i, r in enumerate(records) if r.mem is not None and r.mem.kind == "st")
    st = records[i]
    records[i] = dataclasses.replace(st, mem=dataclasses.replace(st.mem, value=st.mem.value + 1))
    got = replay_trace(c, cgra4, x, records, g.trip_count)
    assert int(got.spm[st.mem.address]) == st.mem.value + 1


def test_replay_rejects_foreign_trace(cgra4, gemm_mapping, gemm):
    g, m = gemm_mapping
    c = generate_config(m, g, cgra4)
    x = gemm.inputs(4, seed=4)
    records = dump_trace(c, cgra4, x, g.trip_count, (0, 2 * m.ii))
    busy = [r for r in records if r.op != "nop" and not r.op.startswith("busy:")]
    with pytest.raises(CgraSimError, match="trace has"):
        replay_trace(c, cgra4, x, busy[1:], g.trip_count)


def test_bad_trace_window(cgra4, gemm_mapping, gemm):
    g, m = gemm_mapping
    with pytest.raises(ValueError):
        dump_trace(generate_config(m, g, cgra4), cgra4, gemm.inputs(4), g.trip_count, (3, 1))


@pytest.mark.parametrize("name", KERNELS)
@pytest.mark.parametrize("n", [4, 8])
def test_cgra_matches_interpreter(cgra4, name, n):
    case = get_case(name)
    x = case.inputs(n, seed=1)
    run = cgra_pipeline(case.nest, case.params(n), cgra4, x)
    assert validate_mapping(run.mapping, run.dfg, cgra4) == []
    assert rec_mii(run.dfg) <= min_ii(run.dfg, cgra4.pe_count) <= run.mapping.ii
    assert run.result.matches(interpret(case.pra, case.params(n), x))
