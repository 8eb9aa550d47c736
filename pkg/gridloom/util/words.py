"""32-bit signed word arithmetic shared by the interpreter and both simulators."""

from __future__ import annotations

MASK32 = 0xFFFFFFFF


def wrap32(x: int) -> int:
    x &= MASK32
    return x - (1 << 32) if x & 0x80000000 else x


def div_trunc(a: int, b: int) -> int:
    """Integer division truncating toward zero. Caller checks b != 0."""
    q = abs(a) // abs(b)
    return wrap32(q if (a >= 0) == (b >= 0) else -q)


def apply_binary(op: str, a: int, b: int) -> int:
    if op == "add":
        return wrap32(a + b)
    if op == "sub":
        return wrap32(a - b)
    if op == "mul":
        return wrap32(a * b)
    if op == "div":
        if b == 0:
            raise ZeroDivisionError("division by zero")
        return div_trunc(a, b)
    if op == "cmp_lt":
        return 1 if a < b else 0
    if op == "cmp_eq":
        return 1 if a == b else 0
    raise ValueError(f"unknown binary op {op!r}")


def select(cond: int, a: int, b: int) -> int:
    return a if cond != 0 else b
