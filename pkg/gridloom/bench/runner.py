from __future__ import annotations

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from gridloom.bench.cases import BenchmarkCase
from gridloom.bench.report import ReportRow, ScalingRow, sort_key
from gridloom.cgra.arch import CgraArch, load_cgra_arch
from gridloom.cgra.config_gen import CgraConfig, generate_config
from gridloom.cgra.mapper import map_dfg
from gridloom.cgra.mapping import CgraMapping
from gridloom.cgra.sim import simulate_cgra
from gridloom.config import Config, load_config
from gridloom.dfg.analysis import min_ii
from gridloom.dfg.build import build_loop_dfg
from gridloom.dfg.graph import Dfg
from gridloom.dfg.loopnest import LoopNestSpec
from gridloom.dfg.transform import unroll_loop
from gridloom.errors import GridloomError
from gridloom.pra.interpret import interpret
from gridloom.tcpa.arch import TcpaArch, load_tcpa_arch
from gridloom.tcpa.configuration import TcpaConfiguration, compile_tcpa
from gridloom.tcpa.schedule import predict_latency, schedule_loop
from gridloom.tcpa.sim import simulate_tcpa
from gridloom.tcpa.tiling import partition, tileable_dims
from gridloom.util.log import make_debug
from gridloom.util.simresult import SimResult

_debug = make_debug("bench")

TARGETS = ("cgra", "tcpa")

ArchLike = Union[CgraArch, TcpaArch, str, Path, None]
Images = Dict[str, np.ndarray]


def optimization_name(target: str, unroll: int = 1) -> str:
    """Report label of the loop transformation a run used."""
    if target == "tcpa":
        return "none"
    return "flat" if unroll <= 1 else f"flat+unroll*{unroll}"


def parse_optimization(text: str) -> int:
    """Unroll factor encoded in an optimization label ("flat", "flat+unroll*2", "unroll2", ...)."""
    t = text.strip().lower()
    if t in ("flat", "none", ""):
        return 1
    digits = "".join(ch for ch in t.rpartition("unroll")[2] if ch.isdigit())
    if "unroll" not in t:
        raise ValueError(f"unknown optimization {text!r}; expected flat or flat+unroll*<f>")
    return int(digits) if digits else 2


def default_arch_path(target: str, cfg: Optional[Config] = None) -> Path:
    cfg = cfg or load_config()
    return Path(cfg.ARCH_DIR) / f"{target}_4x4.json"


def resolve_arch(target: str, arch: ArchLike = None, cfg: Optional[Config] = None) -> Union[CgraArch, TcpaArch]:
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}; expected one of {TARGETS}")
    if isinstance(arch, (CgraArch, TcpaArch)):
        return arch
    path = Path(arch) if arch is not None else default_arch_path(target, cfg)
    return load_cgra_arch(path) if target == "cgra" else load_tcpa_arch(path)


def _reference(case: BenchmarkCase, target: str, unroll: int) -> Optional[int]:
    ref = dict(case.reference_ii)
    if target == "tcpa":
        return ref.get("tcpa")
    return ref.get("flat" if unroll <= 1 else "flat+unroll")


# -----------------
# operation-centric path
# -----------------
@dataclass
class CgraRun:
    """Everything one CGRA pipeline run produced, for callers that need more than the row."""

    dfg: Dfg
    mapping: CgraMapping
    config: CgraConfig
    result: SimResult


def cgra_pipeline(
    nest: LoopNestSpec,
    params: Dict[str, int],
    a: CgraArch,
    inputs: Images,
    *,
    unroll: int = 1,
    seed: Optional[int] = None,
    strategy: str = "heuristic",
    ii_limit: Optional[int] = None,
) -> CgraRun:
    spec = unroll_loop(nest, unroll, params) if unroll > 1 else nest
    g = build_loop_dfg(spec, params, latencies=dict(a.latencies), banks=a.banks, bank_bytes=a.bank_bytes)
    m = map_dfg(g, a, strategy=strategy, seed=seed, ii_limit=ii_limit)
    c = generate_config(m, g, a)
    res = simulate_cgra(c, a, inputs, g.trip_count)
    return CgraRun(g, m, c, res)


def _run_cgra(case: BenchmarkCase, a: CgraArch, n: int, inputs: Images, expected: Images, **kw) -> ReportRow:
    unroll = int(kw.pop("unroll", 1))
    row = ReportRow(
        benchmark=case.name,
        toolpath="cgra",
        optimization=optimization_name("cgra", unroll),
        architecture=a.name,
        n=n,
        loops=len(case.nest.loops),
        ops=0,
        reference_ii=_reference(case, "cgra", unroll),
    )
    run = cgra_pipeline(case.nest, case.params(n), a, inputs, unroll=unroll, **kw)
    per_pe = Counter(run.mapping.binding[x.id] for x in run.dfg.ops if x.id in run.mapping.binding)
    return row.model_copy(
        update={
            "ops": run.dfg.node_count,
            "ii": run.mapping.ii,
            "mii": min_ii(run.dfg, a.pe_count),
            "unused_pes": a.pe_count - len(per_pe),
            "max_ops_per_pe": max(per_pe.values(), default=0),
            "latency": run.result.latency,
            "correct": run.result.matches(expected),
        }
    )


# -----------------
# iteration-centric path
# -----------------
def _run_tcpa(case: BenchmarkCase, a: TcpaArch, n: int, inputs: Images, expected: Images) -> ReportRow:
    p = case.pra
    row = ReportRow(
        benchmark=case.name,
        toolpath="tcpa",
        optimization="none",
        architecture=a.name,
        n=n,
        loops=p.space.n,
        ops=len(p.equations),
        reference_ii=_reference(case, "tcpa", 1),
    )
    c: TcpaConfiguration = compile_tcpa(p, case.params(n), a)
    res = simulate_tcpa(c, a, inputs)
    first, last = predict_latency(c.schedule, c.tiling)
    if row.reference_ii is not None and c.schedule.ii != row.reference_ii:
        _debug(f"{case.name} tcpa: II={c.schedule.ii} differs from reference II={row.reference_ii}")
    return row.model_copy(
        update={
            "ii": c.schedule.ii,
            "unused_pes": c.tiling.unused_pes,
            "idle_pes": sum(1 for v in res.busy.values() if v == 0),
            # every PE of a class runs the whole program; one op per equation
            "max_ops_per_pe": len(p.equations),
            "latency": res.last_pe_latency,
            "first_pe_latency": res.first_pe_latency,
            "last_pe_latency": res.last_pe_latency,
            "predicted_first": first,
            "predicted_last": last,
            "correct": res.matches(expected),
        }
    )


def run_case(
    case: BenchmarkCase,
    target: str,
    arch: ArchLike = None,
    n: Optional[int] = None,
    *,
    unroll: int = 1,
    seed: Optional[int] = None,
    strategy: str = "heuristic",
    ii_limit: Optional[int] = None,
) -> ReportRow:
    """Map, configure, simulate and verify one benchmark against the PRA interpreter.

    Pipeline failures (mapping, tiling, allocation, simulation) do not raise;
    they end up in the row's `status` with `correct` left False.
    """
    cfg = load_config()
    a = resolve_arch(target, arch, cfg)
    n = case.default_n if n is None else int(n)
    seed = cfg.SEED if seed is None else int(seed)
    inputs = case.inputs(n, seed)
    expected = interpret(case.pra, case.params(n), inputs)
    _debug(f"start {case.name} target={target} N={n} arch={a.name}")
    try:
        if target == "cgra":
            row = _run_cgra(
                case, a, n, inputs, expected, unroll=unroll, seed=seed, strategy=strategy, ii_limit=ii_limit
            )
        else:
            row = _run_tcpa(case, a, n, inputs, expected)
    except GridloomError as e:
        _debug(f"failed {case.name} target={target}: {type(e).__name__}: {e}")
        row = ReportRow(
            benchmark=case.name,
            toolpath=target,
            optimization=optimization_name(target, unroll),
            architecture=a.name,
            n=n,
            loops=case.depth if target == "tcpa" else len(case.nest.loops),
            ops=len(case.pra.equations) if target == "tcpa" else 0,
            reference_ii=_reference(case, target, unroll),
            status=f"{type(e).__name__}: {e}",
        )
    else:
        if not row.correct:
            row = row.model_copy(update={"status": "mismatch"})
    _debug(f"done {case.name} target={target} II={row.ii} latency={row.latency} status={row.status}")
    return row


# -----------------
# suites
# -----------------
Job = Tuple[BenchmarkCase, str, int]  # (case, target, unroll)


def suite_jobs(
    cases: Sequence[BenchmarkCase], targets: Sequence[str] = TARGETS, unrolls: Sequence[int] = (1,)
) -> List[Job]:
    jobs: List[Job] = []
    for c in cases:
        for t in targets:
            for u in ([1] if t == "tcpa" else unrolls):
                jobs.append((c, t, int(u)))
    return jobs


def run_suite(
    cases: Sequence[BenchmarkCase],
    *,
    targets: Sequence[str] = TARGETS,
    unrolls: Sequence[int] = (1,),
    n: Optional[int] = None,
    archs: Optional[Dict[str, ArchLike]] = None,
    seed: Optional[int] = None,
    strategy: str = "heuristic",
    workers: Optional[int] = None,
) -> List[ReportRow]:
    """Run every (case, target, unroll) job; independent jobs run on a thread pool.

    The returned rows are in report order no matter how jobs finish.
    """
    cfg = load_config()
    workers = cfg.BENCH_WORKERS if workers is None else int(workers)
    resolved = {t: resolve_arch(t, (archs or {}).get(t), cfg) for t in targets}
    jobs = suite_jobs(cases, targets, unrolls)
    _debug(f"suite: {len(jobs)} jobs on {max(1, workers)} workers")

    def one(job: Job) -> ReportRow:
        case, target, unroll = job
        return run_case(case, target, resolved[target], n, unroll=unroll, seed=seed, strategy=strategy)

    if workers <= 1:
        rows = [one(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, jobs))
    return sorted(rows, key=sort_key)


def scaling_report(
    cases: Sequence[BenchmarkCase], sizes: Sequence[int] = (2, 4, 8, 16), n: Optional[int] = None
) -> List[ScalingRow]:
    """Predicted TCPA latencies on square arrays of growing size, no simulation."""
    rows: List[ScalingRow] = []
    for case in cases:
        nn = case.default_n if n is None else int(n)
        params = case.params(nn)
        p = case.pra
        for s in sizes:
            a = TcpaArch(name=f"tcpa_{s}x{s}", rows=s, cols=s)
            row = ScalingRow(benchmark=case.name, n=nn, array=f"{s}x{s}")
            try:
                t = partition(p.space, params, s, s, tileable=tileable_dims(p))
                sched = schedule_loop(p, t, a)
                first, last = predict_latency(sched, t)
                row = row.model_copy(
                    update={
                        "ii": sched.ii,
                        "unused_pes": t.unused_pes,
                        "idle_pes": t.tile_count - len(sched.tails),
                        "predicted_first": first,
                        "predicted_last": last,
                    }
                )
            except GridloomError as e:
                row = row.model_copy(update={"status": f"{type(e).__name__}: {e}"})
            _debug(f"scaling {case.name} {s}x{s}: last={row.predicted_last} status={row.status}")
            rows.append(row)
    return rows
