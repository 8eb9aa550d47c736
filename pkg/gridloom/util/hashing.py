import hashlib
from typing import Iterable


def sha256_hex(s: str) -> str:
    return hashlib.sha256(s.encode("utf-8")).hexdigest()


def fingerprint_lines(lines: Iterable[str]) -> str:
    """Stable digest of a sequence of text lines (traces, reports)."""
    h = hashlib.sha256()
    for line in lines:
        h.update(line.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()
