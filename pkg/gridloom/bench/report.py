from __future__ import annotations

import csv
import io
import json
from typing import Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel

BENCH_ORDER = ("GEMM", "ATAX", "GESUMMV", "MVT", "TRISOLV", "TRSM")
TARGET_ORDER = ("cgra", "tcpa")


class ReportRow(BaseModel):
    """One mapped-and-simulated benchmark instance.

    `reference_ii` is the published result for the same path (TCPA, or
    the best published CGRA mapper for the same loop optimization); `mii` is our own lower bound.
    `latency` is the cycle the last PE finishes; the TCPA path also fills the
    first-PE latency and the analytic prediction.
    """

    benchmark: str
    toolpath: str  # cgra | tcpa
    optimization: str  # none | flat | flat+unroll*f
    architecture: str
    n: int
    loops: int
    ops: int
    ii: Optional[int] = None
    mii: Optional[int] = None
    reference_ii: Optional[int] = None
    unused_pes: Optional[int] = None
    idle_pes: Optional[int] = None  # tcpa: PEs that hold a tile but never execute an operation
    max_ops_per_pe: Optional[int] = None
    latency: Optional[int] = None
    first_pe_latency: Optional[int] = None
    last_pe_latency: Optional[int] = None
    predicted_first: Optional[int] = None
    predicted_last: Optional[int] = None
    speedup: Optional[float] = None  # cgra latency / tcpa last-PE latency, on cgra rows
    correct: bool = False
    status: str = "ok"


CSV_FIELDS: Tuple[str, ...] = tuple(ReportRow.model_fields)


def _opt_key(opt: str) -> Tuple[int, int]:
    if opt == "none":
        return (0, 0)
    if opt == "flat":
        return (1, 0)
    _, _, f = opt.partition("*")
    return (2, int(f) if f.isdigit() else 0)


def sort_key(r: ReportRow) -> tuple:
    b = BENCH_ORDER.index(r.benchmark) if r.benchmark in BENCH_ORDER else len(BENCH_ORDER)
    t = TARGET_ORDER.index(r.toolpath) if r.toolpath in TARGET_ORDER else len(TARGET_ORDER)
    return (b, r.benchmark, r.n, t, _opt_key(r.optimization), r.architecture)


def with_speedups(rows: Sequence[ReportRow]) -> List[ReportRow]:
    """Ordered copy of `rows` with the speedup filled on every CGRA row that has a TCPA partner."""
    tcpa: Dict[Tuple[str, int], int] = {}
    for r in rows:
        if r.toolpath == "tcpa" and r.correct and r.last_pe_latency:
            tcpa.setdefault((r.benchmark, r.n), r.last_pe_latency)
    out: List[ReportRow] = []
    for r in sorted(rows, key=sort_key):
        last = tcpa.get((r.benchmark, r.n))
        if r.toolpath == "cgra" and r.correct and r.latency and last:
            r = r.model_copy(update={"speedup": round(r.latency / last, 3)})
        out.append(r)
    return out


def _cell(v: object) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    return str(v)


def emit_report(rows: Sequence[ReportRow], fmt: str = "csv") -> str:
    """Deterministic CSV or JSON document (benchmark, target, optimization order)."""
    ordered = with_speedups(rows)
    if fmt == "json":
        return json.dumps({"rows": [r.model_dump() for r in ordered]}, indent=2, sort_keys=True) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}; expected csv or json")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in ordered:
        d = r.model_dump()
        w.writerow([_cell(d[k]) for k in CSV_FIELDS])
    return buf.getvalue()


def all_correct(rows: Sequence[ReportRow]) -> bool:
    return all(r.correct for r in rows)


# -----------------
# analytic scaling (no simulation)
# -----------------
class ScalingRow(BaseModel):
    benchmark: str
    n: int
    array: str
    ii: Optional[int] = None
    unused_pes: Optional[int] = None
    idle_pes: Optional[int] = None
    predicted_first: Optional[int] = None
    predicted_last: Optional[int] = None
    status: str = "ok"


def emit_scaling(rows: Sequence[ScalingRow]) -> str:
    fields = tuple(ScalingRow.model_fields)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        d = r.model_dump()
        w.writerow([_cell(d[k]) for k in fields])
    return buf.getvalue()
