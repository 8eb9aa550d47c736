from __future__ import annotations

import itertools
import random
from dataclasses import replace

import numpy as np
import pytest

from gridloom.bench import run_case
from gridloom.bench.cases import get_case
from gridloom.errors import ProgramCapacityError, TcpaSimError, TilingError
from gridloom.pra import enumerate_iterations, interpret
from gridloom.pra.interpret import compile_equations
from gridloom.tcpa import (
    TcpaArch,
    allocate_io,
    bind_registers,
    classify_tiled,
    compile_tcpa,
    dependence_feasible,
    derive_classes,
    dump_tcpa_trace,
    dumps_configuration,
    left_edge,
    partition,
    predict_latency,
    schedule_loop,
    simulate_tcpa,
    tileable_dims,
)

from conftest import KERNELS


def _tiling(name: str, n: int, rows: int, cols: int, **kw):
    p = get_case(name).pra
    return p, partition(p.space, {"N": n}, rows, cols, tileable=tileable_dims(p), **kw)


# -----------------
# partitioning
# -----------------
def test_fig4_partition():
    _, t = _tiling("GEMM", 4, 2, 2)
    assert t.counts == (2, 2, 1)
    assert t.sizes == (2, 2, 4)
    assert t.tile_iterations == 16
    assert t.unused_pes == 0


def test_single_point_partition():
    _, t = _tiling("GEMM", 1, 4, 4)
    assert t.tile_count == 1 and t.tile_iterations == 1


def test_gemm_20_on_4x4():
    _, t = _tiling("GEMM", 20, 4, 4)
    assert t.counts == (4, 4, 1)
    assert t.sizes == (5, 5, 20)
    assert t.tile_iterations == 500


def test_explicit_counts_checked():
    with pytest.raises(TilingError) as err:
        _tiling("GEMM", 4, 2, 2, counts=(3, 1, 1))
    assert (2, 2, 1) in err.value.factorizations


def test_tiled_dependency_classes():
    p, t = _tiling("GEMM", 4, 2, 2)
    cls = classify_tiled(p, t)
    assert cls[("S7", 0)] == ("intra-tile",)
    assert cls[("S2", 0)] == ("intra-tile", "inter-tile")
    assert cls[("S1", 0)] == ("input",)
    assert cls[("S8", -1)] == ("output",)


# -----------------
# scheduling
# -----------------
def test_gemm_ii_one(tcpa4):
    p, t = _tiling("GEMM", 20, 4, 4)
    assert schedule_loop(p, t, tcpa4).ii == 1


def test_trisolv_ii_is_first_feasible(tcpa4):
    p, t = _tiling("TRISOLV", 8, 4, 4)
    sched = schedule_loop(p, t, tcpa4)
    first = next(ii for ii in range(1, 17) if dependence_feasible(p, t, tcpa4, ii))
    assert sched.ii >= first
    assert sched.ii <= 8


def test_unpipelined_divider_sets_ii(tcpa2):
    slow = replace(tcpa2, fus=tuple(replace(f, pipelined=False) if f.kind == "divider" else f for f in tcpa2.fus))
    case = get_case("TRISOLV")
    p, t = _tiling("TRISOLV", 4, 2, 2)
    # the divider stays busy for its full 16-cycle latency
    assert schedule_loop(p, t, slow).ii == 16
    x = case.inputs(4, seed=6)
    c = compile_tcpa(case.pra, case.params(4), slow)
    assert c.schedule.ii == 16
    res = simulate_tcpa(c, slow, x)
    assert res.matches(case.oracle(x))
    assert predict_latency(c.schedule, c.tiling) == (res.first_pe_latency, res.last_pe_latency)


@pytest.mark.parametrize("name,limit", [("ATAX", 3), ("GESUMMV", 3), ("MVT", 3), ("TRISOLV", 8)])
def test_table_ii_and_full_array(tcpa4, name, limit):
    case = get_case(name)
    c = compile_tcpa(case.pra, case.params(20), tcpa4)
    assert c.schedule.ii <= limit
    assert c.tiling.unused_pes == 0


# -----------------
# registers
# -----------------
def _brute_min_registers(ivs) -> int:
    for k in range(1, len(ivs) + 1):
        for colors in itertools.product(range(k), repeat=len(ivs)):
            if all(
                colors[a] != colors[b] or ivs[a][1] < ivs[b][0] or ivs[b][1] < ivs[a][0]
                for a, b in itertools.combinations(range(len(ivs)), 2)
            ):
                return k
    return 0


@pytest.mark.parametrize("seed", range(20))
def test_left_edge_is_minimal(seed):
    r = random.Random(seed)
    ivs = []
    for _ in range(r.randint(1, 6)):
        lo = r.randint(0, 10)
        ivs.append((lo, lo + r.randint(0, 5)))
    regs = left_edge(ivs)
    for a, b in itertools.combinations(range(len(ivs)), 2):
        if regs[a] == regs[b]:
            assert ivs[a][1] < ivs[b][0] or ivs[b][1] < ivs[a][0]
    assert max(regs) + 1 == _brute_min_registers(ivs)


def test_fifo_depths_are_tight(tcpa2):
    case = get_case("GEMM")
    c = compile_tcpa(case.pra, case.params(4), tcpa2)
    res = simulate_tcpa(c, tcpa2, case.inputs(4))
    assert c.binding.fd
    depth = {f"FD{s.index}": s.depth for s in c.binding.fd.values()}
    peaks = {r: v for r, v in res.fifo_peak.items() if r.startswith("FD")}
    assert all(peaks[r] <= depth[r] for r in peaks)
    assert any(peaks.get(r) == d for r, d in depth.items())


def test_tile_crossing_uses_channels(tcpa2):
    p, t = _tiling("GEMM", 4, 2, 2)
    sched = schedule_loop(p, t, tcpa2)
    b = bind_registers(p, sched, t, tcpa2)
    assert b.channels
    assert all(ch.hops >= 1 for ch in b.channels.values())


def test_gemm_a_propagation_fifo_depth(tcpa2):
    case = get_case("GEMM")
    c = compile_tcpa(case.pra, case.params(4), tcpa2)
    assert c.tiling.sizes == (2, 2, 4)
    # consecutive j iterations of a tile lie one full k run apart
    slot = c.binding.fd[("S2", 0)]
    assert slot.depth == 4
    res = simulate_tcpa(c, tcpa2, case.inputs(4))
    assert res.fifo_peak[f"FD{slot.index}"] == 4


# -----------------
# classes, programs, I/O
# -----------------
@pytest.mark.parametrize("rows,n", [(2, 4), (4, 8)])
def test_gemm_processor_classes(rows, n):
    p, t = _tiling("GEMM", n, rows, rows)
    assert len(derive_classes(p, t)) == 4


def test_one_pe_one_class():
    p, t = _tiling("GEMM", 4, 1, 1)
    assert len(derive_classes(p, t)) == 1


def test_program_capacity_error(tcpa4):
    tiny = replace(tcpa4, fus=tuple(replace(f, capacity=1) for f in tcpa4.fus))
    case = get_case("GEMM")
    with pytest.raises(ProgramCapacityError) as err:
        compile_tcpa(case.pra, case.params(8), tiny)
    assert err.value.capacity == 1


def test_row_major_address_stream():
    p, t = _tiling("GEMM", 4, 2, 2)
    io = allocate_io(p, t, {"A": ((4, 1), 0)})
    streams = [s for s in io.streams if s.var == "A"]
    assert streams
    params = {"N": 4}
    s1 = compile_equations(p, params)[0]
    for s in streams:
        assert s.m == (4, 0, 1) and s.mu == 0
    for x in enumerate_iterations(p.space, params):
        if s1.active(x):
            st = io.stream("S1", 0, t.split(x)[0])
            assert st.address(x) == 4 * x[0] + x[2]


def test_output_stream_writes_each_element_once():
    p, t = _tiling("GEMM", 4, 2, 2)
    io = allocate_io(p, t)
    params = {"N": 4}
    s8 = next(c for c in compile_equations(p, params) if c.target[0] == "D")
    words = {}
    for x in enumerate_iterations(p.space, params):
        if s8.active(x):
            assert x[2] == 3
            st = io.stream("S8", -1, t.split(x)[0])
            words.setdefault((st.border, st.bank, st.address(x)), []).append((x[0], x[1]))
    assert all(len(v) == 1 for v in words.values())
    assert sorted(v[0] for v in words.values()) == [(i, j) for i in range(4) for j in range(4)]


def test_configuration_export(tcpa2):
    case = get_case("MVT")
    text = dumps_configuration(compile_tcpa(case.pra, case.params(4), tcpa2))
    assert '"program": "mvt"' in text
    assert '"lambda_k"' in text


# -----------------
# simulation
# -----------------
@pytest.mark.parametrize("name", KERNELS)
@pytest.mark.parametrize("n", [4, 8])
def test_tcpa_matches_interpreter_and_prediction(tcpa4, name, n):
    case = get_case(name)
    x = case.inputs(n, seed=1)
    c = compile_tcpa(case.pra, case.params(n), tcpa4)
    res = simulate_tcpa(c, tcpa4, x)
    assert res.matches(interpret(case.pra, case.params(n), x))
    assert predict_latency(c.schedule, c.tiling) == (res.first_pe_latency, res.last_pe_latency)
    tails = dict(c.schedule.tails)
    if len(tails) == c.tiling.tile_count and len(set(tails.values())) == 1:
        # every tile runs the same tail, so the spread is the spread of the tile starts
        starts = [c.schedule.tile_start(k) for k in c.tiling.tiles()]
        assert res.last_pe_latency - res.first_pe_latency == max(starts) - min(starts)


def test_idle_tiles_do_not_count_as_completed(tcpa4):
    case = get_case("TRISOLV")
    x = case.inputs(8, seed=4)
    c = compile_tcpa(case.pra, case.params(8), tcpa4)
    res = simulate_tcpa(c, tcpa4, x)
    assert res.matches(case.oracle(x))
    idle = [pe for pe, n in res.busy.items() if n == 0]
    assert idle and c.tiling.unused_pes == 0
    active = set(c.schedule.active_tiles)
    assert len(active) == c.tiling.tile_count - len(idle)
    assert all(k in active for k in c.tiling.tiles() if res.busy["{},{}".format(*c.tiling.pe(k))])
    assert predict_latency(c.schedule, c.tiling) == (res.first_pe_latency, res.last_pe_latency)


def test_report_counts_idle_pes(tcpa4):
    row = run_case(get_case("TRISOLV"), "tcpa", tcpa4, 8)
    assert row.correct and row.unused_pes == 0
    assert row.idle_pes and row.idle_pes > 0
    assert (row.predicted_first, row.predicted_last) == (row.first_pe_latency, row.last_pe_latency)


@pytest.mark.slow
@pytest.mark.parametrize("name", KERNELS)
def test_prediction_exact_at_20(tcpa4, name):
    case = get_case(name)
    c = compile_tcpa(case.pra, case.params(20), tcpa4)
    res = simulate_tcpa(c, tcpa4, case.inputs(20))
    assert predict_latency(c.schedule, c.tiling) == (res.first_pe_latency, res.last_pe_latency)


def test_gemm_on_two_by_two(tcpa2):
    case = get_case("GEMM")
    x = case.inputs(4, seed=9)
    res = simulate_tcpa(compile_tcpa(case.pra, case.params(4), tcpa2), tcpa2, x)
    assert np.array_equal(res.outputs["D"], case.oracle(x)["D"])


def test_single_pe_array():
    a = TcpaArch(name="tcpa_1x1", rows=1, cols=1)
    case = get_case("GEMM")
    x = case.inputs(4, seed=2)
    c = compile_tcpa(case.pra, case.params(4), a)
    assert c.tiling.tile_count == 1 and len(c.classes) == 1
    res = simulate_tcpa(c, a, x)
    assert res.first_pe_latency == res.last_pe_latency
    assert res.matches(case.oracle(x))


@pytest.mark.parametrize("name", ["MVT", "TRISOLV"])
def test_wavefront_gap(tcpa4, name):
    case = get_case(name)
    c = compile_tcpa(case.pra, case.params(8), tcpa4)
    first, last = predict_latency(c.schedule, c.tiling)
    assert last > first


def test_gemm_gap_smaller_than_mvt(tcpa4):
    rel = {}
    for name in ("GEMM", "MVT"):
        case = get_case(name)
        c = compile_tcpa(case.pra, case.params(20), tcpa4)
        first, last = predict_latency(c.schedule, c.tiling)
        rel[name] = (last - first) / last
    assert rel["GEMM"] < rel["MVT"]


def test_trace_window(tcpa2):
    case = get_case("GEMM")
    c = compile_tcpa(case.pra, case.params(4), tcpa2)
    recs = dump_tcpa_trace(c, tcpa2, case.inputs(4), (0, 0))
    assert len(recs) == c.tiling.tile_count * len(tcpa2.fus)
    assert {r.pe for r in recs} == {"0,0", "0,1", "1,0", "1,1"}


def test_sim_rejects_other_array(tcpa2, tcpa4):
    case = get_case("GEMM")
    c = compile_tcpa(case.pra, case.params(4), tcpa2)
    with pytest.raises(TcpaSimError):
        simulate_tcpa(c, tcpa4, case.inputs(4))


def test_sim_missing_input(tcpa2):
    case = get_case("GEMM")
    c = compile_tcpa(case.pra, case.params(4), tcpa2)
    x = case.inputs(4)
    del x["B"]
    with pytest.raises(TcpaSimError, match="missing input"):
        simulate_tcpa(c, tcpa2, x)
