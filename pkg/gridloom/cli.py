"""Command-line front door.

Usage:
  gridloom bench --format csv -o report.csv
  gridloom map --bench GEMM --target cgra --optimization flat
  gridloom simulate --bench MVT --target tcpa -n 8 --trace 0:20
  gridloom dfg-dump --bench GEMM --format dot
  gridloom report --scaling --sizes 2,4,8,16
  gridloom serve

Exit code 0 only when every correctness check passed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from gridloom.bench.cases import BenchmarkCase, builtin_benchmarks, get_case
from gridloom.bench.report import ReportRow, all_correct, emit_report, emit_scaling
from gridloom.bench.runner import (
    TARGETS,
    cgra_pipeline,
    optimization_name,
    parse_optimization,
    resolve_arch,
    run_suite,
    scaling_report,
)
from gridloom.cgra.mapping import format_mapping
from gridloom.cgra.sim import dump_trace
from gridloom.config import load_config
from gridloom.dfg.build import build_loop_dfg
from gridloom.dfg.export import to_dot, to_text, write_graphml
from gridloom.dfg.loopnest import LoopNestSpec, load_loopnest
from gridloom.dfg.transform import unroll_loop
from gridloom.errors import GridloomError
from gridloom.pra.interpret import interpret
from gridloom.pra.memimage import load_images, save_images
from gridloom.tcpa.configuration import compile_tcpa, dumps_configuration
from gridloom.tcpa.sim import dump_tcpa_trace, simulate_tcpa
from gridloom.util.hashing import fingerprint_lines, sha256_hex
from gridloom.util.log import make_debug, set_debug
from gridloom.util.trace import TraceRecord, format_record, format_trace

_debug = make_debug("cli")


def _write(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
        _debug(f"wrote {out}")
    else:
        sys.stdout.write(text)


def _csv_ints(text: str) -> List[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _window(text: str) -> tuple:
    lo, _, hi = text.partition(":")
    return int(lo), int(hi or lo)


def _trace(records: List[TraceRecord], out: Optional[str]) -> None:
    _debug(f"trace: {len(records)} records sha256={fingerprint_lines(format_record(r) for r in records)}")
    _write(format_trace(records), out)


def _inputs(case: BenchmarkCase, n: int, seed: int, path: Optional[str]) -> Dict[str, np.ndarray]:
    return load_images(path) if path else case.inputs(n, seed)


# -----------------
# commands
# -----------------
def cmd_map(args: argparse.Namespace) -> int:
    cfg = load_config()
    case = get_case(args.bench)
    n = args.n or case.default_n
    seed = cfg.SEED if args.seed is None else args.seed
    a = resolve_arch(args.target, args.arch, cfg)
    if args.target == "cgra":
        unroll = parse_optimization(args.optimization)
        run = cgra_pipeline(
            case.nest, case.params(n), a, case.inputs(n, seed), unroll=unroll, seed=seed, strategy=args.strategy
        )
        text = format_mapping(run.mapping, run.dfg)
        if args.config:
            text += json.dumps(run.config.to_dict(), indent=2, sort_keys=True) + "\n"
    else:
        text = dumps_configuration(compile_tcpa(case.pra, case.params(n), a))
    _write(text, args.output)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config()
    case = get_case(args.bench)
    n = args.n or case.default_n
    seed = cfg.SEED if args.seed is None else args.seed
    a = resolve_arch(args.target, args.arch, cfg)
    inputs = _inputs(case, n, seed, args.inputs)
    params = case.params(n)
    expected = interpret(case.pra, params, inputs)
    if args.target == "cgra":
        unroll = parse_optimization(args.optimization)
        run = cgra_pipeline(case.nest, params, a, inputs, unroll=unroll, seed=seed, strategy=args.strategy)
        res = run.result
        if args.trace:
            _trace(dump_trace(run.config, a, inputs, run.dfg.trip_count, _window(args.trace)), args.trace_out)
        line = f"{case.name} cgra {optimization_name('cgra', unroll)} N={n} II={run.mapping.ii} latency={res.latency}"
    else:
        c = compile_tcpa(case.pra, params, a)
        res = simulate_tcpa(c, a, inputs)
        if args.trace:
            _trace(dump_tcpa_trace(c, a, inputs, _window(args.trace)), args.trace_out)
        line = (
            f"{case.name} tcpa N={n} II={c.schedule.ii} first={res.first_pe_latency} last={res.last_pe_latency}"
        )
    ok = res.matches(expected)
    if args.outputs:
        save_images(args.outputs, res.outputs)
    print(f"{line} correct={'yes' if ok else 'no'}")
    return 0 if ok else 1


def cmd_bench(args: argparse.Namespace) -> int:
    if args.bench:
        cases = [get_case(b) for b in args.bench.split(",")]
    else:
        cases = builtin_benchmarks(True if args.trsm else None)
    targets = [t for t in args.targets.split(",") if t]
    for t in targets:
        if t not in TARGETS:
            raise SystemExit(f"unknown target {t!r}; expected one of {TARGETS}")
    archs = {"cgra": args.cgra_arch, "tcpa": args.tcpa_arch}
    rows = run_suite(
        cases,
        targets=targets,
        unrolls=_csv_ints(args.unroll),
        n=args.n,
        archs={t: archs[t] for t in targets},
        seed=args.seed,
        strategy=args.strategy,
        workers=args.workers,
    )
    text = emit_report(rows, args.format)
    _debug(f"report: {len(rows)} rows sha256={sha256_hex(text)}")
    _write(text, args.output)
    return 0 if all_correct(rows) else 1


def cmd_dfg_dump(args: argparse.Namespace) -> int:
    cfg = load_config()
    if args.nest:
        spec: LoopNestSpec = load_loopnest(args.nest)
        params = {k: int(v) for k, v in (p.split("=") for p in args.param)}
    else:
        case = get_case(args.bench or "GEMM")
        spec, params = case.nest, case.params(args.n)
    a = resolve_arch("cgra", args.arch, cfg)
    if args.unroll > 1:
        spec = unroll_loop(spec, args.unroll, params)
    g = build_loop_dfg(spec, params, latencies=dict(a.latencies), banks=a.banks, bank_bytes=a.bank_bytes)
    if args.format == "graphml":
        if not args.output:
            raise SystemExit("--format graphml needs -o")
        write_graphml(g, args.output)
        return 0
    _write(to_dot(g) if args.format == "dot" else to_text(g), args.output)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    if args.scaling:
        cases = [get_case(b) for b in args.bench.split(",")] if args.bench else builtin_benchmarks()
        rows = scaling_report(cases, _csv_ints(args.sizes), args.n)
        _write(emit_scaling(rows), args.output)
        return 0 if all(r.status == "ok" for r in rows) else 1
    if not args.input:
        raise SystemExit("report needs --input rows.json or --scaling")
    data = json.loads(Path(args.input).read_text(encoding="utf-8"))
    rows = [ReportRow(**r) for r in data.get("rows", [])]
    _write(emit_report(rows, args.format), args.output)
    return 0 if all_correct(rows) else 1


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    cfg = load_config()
    uvicorn.run("gridloom.api.server:app", host=args.host or cfg.API_HOST, port=args.port or cfg.API_PORT, reload=False)
    return 0


# -----------------
# parser
# -----------------
def _case_flags(p: argparse.ArgumentParser, *, target: bool = True) -> None:
    p.add_argument("--bench", default="GEMM", help="benchmark name (GEMM, ATAX, GESUMMV, MVT, TRISOLV, TRSM)")
    if target:
        p.add_argument("--target", choices=TARGETS, default="tcpa")
    p.add_argument("--arch", default=None, help="architecture JSON (default: <arch dir>/<target>_4x4.json)")
    p.add_argument("-n", type=int, default=None, help="problem size N")
    p.add_argument("--optimization", default="flat", help="CGRA loop transformation: flat or flat+unroll*<f>")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--strategy", choices=("heuristic", "anneal"), default="heuristic")
    p.add_argument("-o", "--output", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridloom", description="Map loop nests onto CGRA and TCPA models.")
    parser.add_argument("-v", "--verbose", action="store_true", help="print [tag] debug lines to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("map", help="map one benchmark and print the mapping or configuration")
    _case_flags(p)
    p.add_argument("--config", action="store_true", help="also print the CGRA configuration")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("simulate", help="map, simulate and check one benchmark")
    _case_flags(p)
    p.add_argument("--inputs", default=None, help="memory image with the input arrays")
    p.add_argument("--outputs", default=None, help="write the output arrays as a memory image")
    p.add_argument("--trace", default=None, help="cycle window LO:HI to trace")
    p.add_argument("--trace-out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="run the benchmark suite and emit a report")
    p.add_argument("--bench", default=None, help="comma-separated subset")
    p.add_argument("--targets", default="cgra,tcpa")
    p.add_argument("--unroll", default="1,2", help="CGRA unroll factors (1 = flat only)")
    p.add_argument("-n", type=int, default=None)
    p.add_argument("--cgra-arch", default=None)
    p.add_argument("--tcpa-arch", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--strategy", choices=("heuristic", "anneal"), default="heuristic")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--trsm", action="store_true", help="include TRSM")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("dfg-dump", help="print the DFG of a loop nest")
    p.add_argument("--bench", default=None)
    p.add_argument("--nest", default=None, help="loop-nest JSON file instead of a benchmark")
    p.add_argument("--param", action="append", default=[], help="NAME=VALUE for --nest")
    p.add_argument("--arch", default=None)
    p.add_argument("-n", type=int, default=None)
    p.add_argument("--unroll", type=int, default=1)
    p.add_argument("--format", choices=("text", "dot", "graphml"), default="text")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_dfg_dump)

    p = sub.add_parser("report", help="re-emit a JSON report or compute the analytic scaling table")
    p.add_argument("--input", default=None)
    p.add_argument("--scaling", action="store_true")
    p.add_argument("--bench", default=None)
    p.add_argument("--sizes", default="2,4,8,16")
    p.add_argument("-n", type=int, default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    set_debug(bool(args.verbose) or load_config().DEBUG)
    try:
        return int(args.func(args))
    except (GridloomError, KeyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
