from __future__ import annotations

import re
from pathlib import Path
from typing import Any, Dict, List, Optional

from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel, Field

from gridloom import __version__
from gridloom.bench.cases import builtin_benchmarks, get_case
from gridloom.bench.report import emit_report
from gridloom.bench.runner import TARGETS, parse_optimization, run_case
from gridloom.config import Config, load_config
from gridloom.util.hashing import sha256_hex
from gridloom.util.log import make_debug

_debug = make_debug("api")

app = FastAPI(title="gridloom mapping service", version=__version__)
cfg: Config = load_config()

# Requests above this size are refused; the simulators are not meant for them.
MAX_N = 32

_ARCH_ID = re.compile(r"^[A-Za-z0-9_]+$")


# -----------------------------
# Health
# -----------------------------


@app.get("/health")
def health() -> Dict[str, Any]:
    return {"status": "ok"}


# -----------------------------
# Benchmarks
# -----------------------------


@app.get("/benchmarks")
def benchmarks(include_trsm: Optional[bool] = Query(default=None)) -> Dict[str, Any]:
    cases = builtin_benchmarks(include_trsm)
    return {
        "benchmarks": [
            {
                "name": c.name,
                "depth": c.depth,
                "equations": len(c.pra.equations),
                "default_n": c.default_n,
                "reference_ii": dict(c.reference_ii),
            }
            for c in cases
        ]
    }


@app.get("/archs")
def archs() -> Dict[str, List[str]]:
    d = Path(cfg.ARCH_DIR)
    return {"archs": sorted(p.stem for p in d.glob("*.json")) if d.is_dir() else []}


class RunRequest(BaseModel):
    benchmark: str
    target: str = "tcpa"  # cgra|tcpa
    n: Optional[int] = Field(default=None, ge=1, le=MAX_N)
    arch: Optional[str] = None  # file stem under the architecture directory
    optimization: str = "flat"
    seed: Optional[int] = None
    strategy: str = "heuristic"


def _arch_path(target: str, arch: Optional[str]) -> Path:
    name = arch or f"{target}_4x4"
    if not _ARCH_ID.match(name):
        raise HTTPException(status_code=400, detail="bad_arch_name")
    path = Path(cfg.ARCH_DIR) / f"{name}.json"
    if not path.is_file():
        raise HTTPException(status_code=404, detail="arch_not_found")
    return path


@app.post("/run")
def run(req: RunRequest, fmt: str = Query(default="json")) -> Any:
    if req.target not in TARGETS:
        raise HTTPException(status_code=400, detail="unknown_target")
    try:
        case = get_case(req.benchmark)
    except KeyError:
        raise HTTPException(status_code=404, detail="unknown_benchmark")
    try:
        unroll = parse_optimization(req.optimization)
    except ValueError:
        raise HTTPException(status_code=400, detail="unknown_optimization")
    path = _arch_path(req.target, req.arch)
    _debug(f"run {case.name} target={req.target} n={req.n} arch={path.stem}")
    try:
        row = run_case(case, req.target, path, req.n, unroll=unroll, seed=req.seed, strategy=req.strategy)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    if fmt == "csv":
        text = emit_report([row], "csv")
        return {"csv": text, "sha256": sha256_hex(text)}
    return {"row": row.model_dump()}
