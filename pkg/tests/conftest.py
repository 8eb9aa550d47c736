from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from gridloom.bench.cases import get_case
from gridloom.cgra.arch import load_cgra_arch
from gridloom.tcpa.arch import load_tcpa_arch

ARCH_DIR = ROOT / "archs"

KERNELS = ("GEMM", "ATAX", "GESUMMV", "MVT", "TRISOLV")


@pytest.fixture(scope="session")
def cgra4():
    return load_cgra_arch(ARCH_DIR / "cgra_4x4.json")


@pytest.fixture(scope="session")
def cgra3():
    return load_cgra_arch(ARCH_DIR / "cgra_3x3.json")


@pytest.fixture(scope="session")
def tcpa4():
    return load_tcpa_arch(ARCH_DIR / "tcpa_4x4.json")


@pytest.fixture(scope="session")
def tcpa2():
    return load_tcpa_arch(ARCH_DIR / "tcpa_2x2.json")


@pytest.fixture(scope="session")
def gemm():
    return get_case("GEMM")


@pytest.fixture
def rng():
    return np.random.default_rng(7)
