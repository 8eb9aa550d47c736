"""Built-in kernels, the end-to-end runner for both backends and report emission."""

from gridloom.bench.cases import TRSM_CASE, BenchmarkCase, builtin_benchmarks, get_case
from gridloom.bench.report import ReportRow, ScalingRow, emit_report, emit_scaling
from gridloom.bench.runner import cgra_pipeline, run_case, run_suite, scaling_report

__all__ = [
    "BenchmarkCase",
    "ReportRow",
    "ScalingRow",
    "TRSM_CASE",
    "builtin_benchmarks",
    "cgra_pipeline",
    "emit_report",
    "emit_scaling",
    "get_case",
    "run_case",
    "run_suite",
    "scaling_report",
]
