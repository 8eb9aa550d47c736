from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from gridloom.api.server import app
from gridloom.util.hashing import sha256_hex


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok"}


def test_benchmarks(client):
    names = [b["name"] for b in client.get("/benchmarks", params={"include_trsm": False}).json()["benchmarks"]]
    assert names == ["GEMM", "ATAX", "GESUMMV", "MVT", "TRISOLV"]
    gemm = client.get("/benchmarks").json()["benchmarks"][0]
    assert gemm["depth"] == 3 and gemm["equations"] == 8
    assert gemm["reference_ii"]["tcpa"] == 1


def test_archs(client):
    archs = client.get("/archs").json()["archs"]
    assert "cgra_4x4" in archs and "tcpa_4x4" in archs


def test_run_tcpa(client):
    r = client.post("/run", json={"benchmark": "GEMM", "target": "tcpa", "n": 4})
    assert r.status_code == 200
    row = r.json()["row"]
    assert row["correct"] is True
    assert row["ii"] == 1 and row["architecture"] == "tcpa_4x4"


def test_run_csv(client):
    r = client.post("/run", params={"fmt": "csv"}, json={"benchmark": "MVT", "n": 4, "arch": "tcpa_2x2"})
    body = r.json()
    assert body["sha256"] == sha256_hex(body["csv"])
    lines = body["csv"].splitlines()
    assert lines[0].startswith("benchmark,toolpath")
    assert lines[1].startswith("MVT,tcpa,none,tcpa_2x2,4")


@pytest.mark.parametrize(
    "body,status,detail",
    [
        ({"benchmark": "NOPE"}, 404, "unknown_benchmark"),
        ({"benchmark": "GEMM", "target": "gpu"}, 400, "unknown_target"),
        ({"benchmark": "GEMM", "target": "cgra", "optimization": "tiled"}, 400, "unknown_optimization"),
        ({"benchmark": "GEMM", "arch": "../etc/passwd"}, 400, "bad_arch_name"),
        ({"benchmark": "GEMM", "arch": "tcpa_9x9"}, 404, "arch_not_found"),
    ],
)
def test_run_rejects(client, body, status, detail):
    r = client.post("/run", json=body)
    assert r.status_code == status
    assert r.json()["detail"] == detail


def test_run_size_limit(client):
    assert client.post("/run", json={"benchmark": "GEMM", "n": 1000}).status_code == 422
