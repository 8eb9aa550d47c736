from __future__ import annotations

import sys
from typing import Callable

from gridloom.config import debug_from_env

_FORCED: bool | None = None


def set_debug(enabled: bool) -> None:
    """Force debug output on/off regardless of GRIDLOOM_DEBUG (used by the CLI -v flag)."""
    global _FORCED
    _FORCED = bool(enabled)


def debug_enabled() -> bool:
    if _FORCED is not None:
        return _FORCED
    return debug_from_env()


def make_debug(tag: str) -> Callable[[str], None]:
    def _debug(msg: str) -> None:
        if debug_enabled():
            print(f"[{tag}] {msg}", file=sys.stderr)

    return _debug
