from __future__ import annotations

import csv
import dataclasses
import io
import json

import pytest

from gridloom.bench import (
    ReportRow,
    builtin_benchmarks,
    emit_report,
    emit_scaling,
    get_case,
    run_case,
    run_suite,
    scaling_report,
)
from gridloom.bench.report import CSV_FIELDS
from gridloom.bench.runner import optimization_name, parse_optimization
from gridloom.cli import main


def _rows(text: str):
    return list(csv.DictReader(io.StringIO(text)))


def test_builtin_suite():
    assert [c.name for c in builtin_benchmarks(False)] == ["GEMM", "ATAX", "GESUMMV", "MVT", "TRISOLV"]
    assert builtin_benchmarks(True)[-1].name == "TRSM"


def test_unknown_benchmark():
    with pytest.raises(KeyError):
        get_case("SYRK")


def test_optimization_labels():
    assert optimization_name("tcpa", 4) == "none"
    assert optimization_name("cgra") == "flat"
    assert optimization_name("cgra", 2) == "flat+unroll*2"
    assert parse_optimization("flat+unroll*4") == 4
    assert parse_optimization("flat") == 1
    with pytest.raises(ValueError):
        parse_optimization("tiled")


def test_empty_report_is_header_only():
    assert emit_report([], "csv") == ",".join(CSV_FIELDS) + "\n"
    assert json.loads(emit_report([], "json")) == {"rows": []}
    with pytest.raises(ValueError):
        emit_report([], "xml")


def test_tcpa_gemm_row(tcpa4):
    row = run_case(get_case("GEMM"), "tcpa", tcpa4, 8)
    assert row.correct and row.status == "ok"
    assert row.ii == 1 and row.unused_pes == 0
    assert (row.predicted_first, row.predicted_last) == (row.first_pe_latency, row.last_pe_latency)


def test_failure_lands_in_status(cgra3):
    # a 3x3 array with an II cap of 2 cannot host GEMM
    row = run_case(get_case("GEMM"), "cgra", cgra3, 4, ii_limit=2)
    assert not row.correct
    assert row.status.startswith("MappingFailed")
    assert row.ii is None


def test_speedup_and_order(cgra4, tcpa4):
    rows = run_suite(
        [get_case("GEMM"), get_case("MVT")], n=4, archs={"cgra": cgra4, "tcpa": tcpa4}, workers=2
    )
    assert [(r.benchmark, r.toolpath) for r in rows] == [
        ("GEMM", "cgra"), ("GEMM", "tcpa"), ("MVT", "cgra"), ("MVT", "tcpa")
    ]
    out = _rows(emit_report(rows))
    for r in out:
        assert r["correct"] == "1"
        if r["toolpath"] == "cgra":
            assert float(r["speedup"]) == round(int(r["latency"]) / int(next(
                x["last_pe_latency"] for x in out if x["toolpath"] == "tcpa" and x["benchmark"] == r["benchmark"]
            )), 3)
        else:
            assert r["speedup"] == ""


def test_report_is_deterministic(cgra4, tcpa4):
    cases = [get_case("GESUMMV")]
    a = emit_report(run_suite(cases, n=4, archs={"cgra": cgra4, "tcpa": tcpa4}, workers=1))
    b = emit_report(run_suite(cases, n=4, archs={"cgra": cgra4, "tcpa": tcpa4}, workers=3))
    assert a == b


def test_json_rows_reload(tcpa4):
    row = run_case(get_case("MVT"), "tcpa", tcpa4, 4)
    doc = json.loads(emit_report([row], "json"))
    assert ReportRow(**doc["rows"][0]) == row


@pytest.mark.slow
def test_full_sweep(cgra4, tcpa4):
    rows = run_suite(builtin_benchmarks(False), unrolls=(1, 2), archs={"cgra": cgra4, "tcpa": tcpa4})
    out = _rows(emit_report(rows))
    assert all(r["correct"] == "1" for r in out)
    tcpa = [r for r in out if r["toolpath"] == "tcpa"]
    assert int(tcpa[0]["ii"]) == 1
    assert all(int(r["ii"]) <= int(r["reference_ii"]) for r in tcpa[:4])
    assert all(r["unused_pes"] == "0" for r in tcpa)
    gemm = next(r for r in out if r["benchmark"] == "GEMM" and r["optimization"] == "flat")
    assert 10 <= float(gemm["speedup"]) <= 30
    for r in out:
        if r["toolpath"] == "cgra" and r["benchmark"] in ("ATAX", "GESUMMV", "MVT"):
            assert float(r["speedup"]) > 1


def test_scaling_report():
    rows = scaling_report([get_case("GEMM")], sizes=(2, 4), n=8)
    assert [r.array for r in rows] == ["2x2", "4x4"]
    assert all(r.status == "ok" for r in rows)
    assert rows[1].predicted_last < rows[0].predicted_last
    assert emit_scaling(rows).splitlines()[0].startswith("benchmark,n,array")


# -----------------
# command line
# -----------------
def test_cli_bench_exit_code(tmp_path):
    out = tmp_path / "report.csv"
    assert main(["bench", "--bench", "GEMM", "--targets", "tcpa", "-n", "4", "-o", str(out)]) == 0
    rows = _rows(out.read_text())
    assert len(rows) == 1 and rows[0]["ii"] == "1"


def test_cli_simulate(capsys):
    assert main(["simulate", "--bench", "MVT", "--target", "tcpa", "-n", "4"]) == 0
    assert "correct=yes" in capsys.readouterr().out


def test_cli_dfg_dump(capsys):
    assert main(["dfg-dump", "--bench", "GEMM", "-n", "4"]) == 0
    assert capsys.readouterr().out.startswith("DFG gemm")


def test_cli_reports_errors(capsys):
    assert main(["map", "--bench", "NOPE"]) == 1
    assert "unknown benchmark" in capsys.readouterr().err


def test_cli_map_cgra(tmp_path):
    out = tmp_path / "gemm.map"
    assert main(["map", "--bench", "GEMM", "--target", "cgra", "-n", "4", "--config", "-o", str(out)]) == 0
    text = out.read_text()
    assert text.startswith("MAPPING gemm II=")
    assert sum(1 for line in text.splitlines() if line.startswith("NODE")) > 0
    assert '"layout"' in text


def test_cli_map_tcpa(capsys):
    assert main(["map", "--bench", "MVT", "--target", "tcpa", "-n", "4"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["program"] == "mvt"
    assert doc["schedule"]["ii"] >= 1


def test_cli_report_round_trip(tmp_path, capsys):
    rows = tmp_path / "rows.json"
    assert main(["bench", "--bench", "MVT", "--targets", "tcpa", "-n", "4", "--format", "json", "-o", str(rows)]) == 0
    assert main(["report", "--input", str(rows)]) == 0
    out = _rows(capsys.readouterr().out)
    assert [(r["benchmark"], r["toolpath"], r["correct"]) for r in out] == [("MVT", "tcpa", "1")]


def test_cli_report_scaling(capsys):
    assert main(["report", "--scaling", "--bench", "GEMM", "--sizes", "2,4", "-n", "8"]) == 0
    out = _rows(capsys.readouterr().out)
    assert [r["array"] for r in out] == ["2x2", "4x4"]
    assert all(r["status"] == "ok" for r in out)


def test_tcpa_ii_off_reference_is_logged(tcpa4, capsys, monkeypatch):
    monkeypatch.setattr("gridloom.util.log._FORCED", True)
    case = dataclasses.replace(get_case("MVT"), reference_ii=(("tcpa", 99),))
    row = run_case(case, "tcpa", tcpa4, 4)
    assert row.correct and row.reference_ii == 99
    assert f"II={row.ii} differs from reference II=99" in capsys.readouterr().err
