import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

# Optional: load a local .env file if present.
try:
    from dotenv import load_dotenv

    load_dotenv()
except Exception:
    # If python-dotenv isn't installed or .env isn't present, that's fine.
    pass


_REPO_ROOT = Path(__file__).resolve().parents[1]


def _env_bool(name: str, default: Optional[bool] = None) -> Optional[bool]:
    """Parse a boolean environment variable.

    Accepted truthy: 1, true, yes, y, on
    Accepted falsy:  0, false, no, n, off
    Anything else (or unset) yields `default`.
    """

    raw = os.environ.get(name)
    if raw is None:
        return default
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "y", "on"):
        return True
    if v in ("0", "false", "no", "n", "off"):
        return False
    return default


def _env(name: str, default: str):
    return field(default_factory=lambda: os.environ.get(name, default))


def _env_int(name: str, default: int):
    return field(default_factory=lambda: int(os.environ.get(name, str(default))))


def _env_float(name: str, default: float):
    return field(default_factory=lambda: float(os.environ.get(name, str(default))))


def _env_flag(name: str):
    return field(default_factory=lambda: _env_bool(name, False) is True)


def debug_from_env() -> bool:
    return _env_bool("GRIDLOOM_DEBUG", False) is True


@dataclass(frozen=True)
class Config:
    """Runtime configuration.

    Every field reads the environment (or a .env file) when the instance is built.
    Explicit function arguments always take precedence over these defaults.
    """

    # -----------------
    # Core
    # -----------------
    # Directory holding architecture description files (cgra_4x4.json, tcpa_4x4.json, ...)
    ARCH_DIR: str = _env("GRIDLOOM_ARCH_DIR", str(_REPO_ROOT / "archs"))

    # Default seed for mappers and input generators
    SEED: int = _env_int("GRIDLOOM_SEED", 1)

    # Print [tag] debug lines to stderr
    DEBUG: bool = field(default_factory=debug_from_env)

    # -----------------
    # CGRA mapper
    # -----------------
    CGRA_II_LIMIT: int = _env_int("GRIDLOOM_CGRA_II_LIMIT", 16)

    # PathFinder rounds per II attempt (history cost grows each round)
    PATHFINDER_ROUNDS: int = _env_int("GRIDLOOM_PATHFINDER_ROUNDS", 12)

    # Seeded randomized list-scheduling passes per II after the fixed orderings
    CGRA_RESTARTS: int = _env_int("GRIDLOOM_CGRA_RESTARTS", 32)

    # Simulated annealing
    ANNEAL_COOLING: float = _env_float("GRIDLOOM_ANNEAL_COOLING", 0.95)
    ANNEAL_MOVES_PER_TEMP: int = _env_int("GRIDLOOM_ANNEAL_MOVES", 100)
    # Initial temperature is calibrated so roughly this share of uphill moves is accepted
    ANNEAL_INITIAL_ACCEPT: float = _env_float("GRIDLOOM_ANNEAL_ACCEPT", 0.5)
    ANNEAL_MIN_TEMP: float = _env_float("GRIDLOOM_ANNEAL_MIN_TEMP", 0.05)
    # Independent seed streams evaluated per II (merged deterministically)
    ANNEAL_CANDIDATES: int = _env_int("GRIDLOOM_ANNEAL_CANDIDATES", 2)

    # -----------------
    # Bench harness
    # -----------------
    # TRSM is an extra experiment; off unless asked for.
    ENABLE_TRSM: bool = _env_flag("GRIDLOOM_ENABLE_TRSM")
    BENCH_WORKERS: int = _env_int("GRIDLOOM_BENCH_WORKERS", 4)

    # -----------------
    # HTTP service
    # -----------------
    API_HOST: str = _env("API_HOST", "0.0.0.0")
    API_PORT: int = _env_int("API_PORT", 8000)


def load_config() -> Config:
    return Config()
