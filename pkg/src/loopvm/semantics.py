"""Signed 64-bit wrapping arithmetic shared by both execution tiers."""

from __future__ import annotations

from .ir import I64_MAX, I64_MIN

_MASK = (1 << 64) - 1
_BIAS = 1 << 63


class Trap(Exception):
    """Run-time execution error raised by the guest program."""

    def __init__(self, kind: str, message: str = ""):
        super().__init__(f"{kind}: {message}" if message else kind)
        self.kind = kind
        self.output = ""


def wrap(v: int) -> int:
    if I64_MIN <= v <= I64_MAX:
        return v
    return ((v + _BIAS) & _MASK) - _BIAS


def sdiv(a: int, b: int) -> int:
    """Division truncating toward zero; ``I64_MIN / -1`` wraps."""
    if b == 0:
        raise Trap("divide-by-zero", "division by zero")
    q = abs(a) // abs(b)
    return wrap(q if (a < 0) == (b < 0) else -q)


def smod(a: int, b: int) -> int:
    """Remainder with the sign of the dividend (pairs with :func:`sdiv`)."""
    if b == 0:
        raise Trap("divide-by-zero", "modulo by zero")
    r = abs(a) % abs(b)
    return -r if a < 0 else r


BINARY = {
    "add": lambda a, b: wrap(a + b),
    "sub": lambda a, b: wrap(a - b),
    "mul": lambda a, b: wrap(a * b),
    "div": sdiv,
    "mod": smod,
    "cmp_lt": lambda a, b: 1 if a < b else 0,
    "cmp_le": lambda a, b: 1 if a <= b else 0,
    "cmp_eq": lambda a, b: 1 if a == b else 0,
    "cmp_ne": lambda a, b: 1 if a != b else 0,
}
