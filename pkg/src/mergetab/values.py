"""Value domain for table cells: Null, 64-bit Int, exact rational Dec, Str.

Python representation: ``None`` | ``int`` | ``fractions.Fraction`` | ``str``.
Fractions are always reduced (the Fraction type guarantees it). All
arithmetic is exact; nothing in this module ever rounds.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union

Value = Union[None, int, Fraction, str]

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

INT = "int"
DEC = "dec"
STR = "str"

VALUE_TYPES = (INT, DEC, STR)


class EvalError(Exception):
    """Raised for type errors during expression evaluation (e.g. 'CA' + 1)."""


def is_numeric(v: Value) -> bool:
    return isinstance(v, (int, Fraction)) and not isinstance(v, bool)


def check_value(v: Value, typ: str) -> Value:
    """Validate and coerce a value against a declared column type.

    Int literals are accepted into Dec columns (widened to Fraction);
    anything lossy or cross-kind raises ValueError.
    """
    if v is None:
        return None
    if typ == INT:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ValueError(f"expected Int value, got {v!r}")
        if not (INT64_MIN <= v <= INT64_MAX):
            raise ValueError(f"Int value out of 64-bit range: {v}")
        return v
    if typ == DEC:
        if isinstance(v, bool):
            raise ValueError(f"expected Dec value, got {v!r}")
        if isinstance(v, int):
            return Fraction(v)
        if isinstance(v, Fraction):
            return v
        raise ValueError(f"expected Dec value, got {v!r}")
    if typ == STR:
        if not isinstance(v, str):
            raise ValueError(f"expected Str value, got {v!r}")
        return v
    raise ValueError(f"unknown column type {typ!r}")


def values_equal(a: Value, b: Value) -> bool:
    """Exact equality: numerics compare across Int/Dec, Str only with Str.

    Null equals nothing, including another Null (callers deal with
    Null-vs-Null identity themselves where it matters).
    """
    if a is None or b is None:
        return False
    if is_numeric(a) and is_numeric(b):
        return a == b
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    return False


def compare(op: str, a: Value, b: Value) -> bool:
    """Three-valued collapse: any Null or cross-kind comparison is False."""
    if a is None or b is None:
        return False
    if is_numeric(a) and is_numeric(b):
        pass
    elif isinstance(a, str) and isinstance(b, str):
        pass
    else:
        return False
    if op == "=":
        return a == b
    if op == "<>":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise ValueError(f"unknown comparison operator {op!r}")


def arith(op: str, a: Value, b: Value) -> Value:
    """Exact arithmetic; Null propagates, division by zero yields Null.

    Int op Int stays Int except '/', which always yields Dec.
    """
    if isinstance(a, str) or isinstance(b, str):
        raise EvalError(f"arithmetic on Str value ({op})")
    if a is None or b is None:
        return None
    if op == "+":
        r = a + b
    elif op == "-":
        r = a - b
    elif op == "*":
        r = a * b
    elif op == "/":
        if b == 0:
            return None
        return Fraction(a) / Fraction(b)
    else:
        raise ValueError(f"unknown arithmetic operator {op!r}")
    return r


def _decimal_digits(num: int, den: int) -> str | None:
    """Exact decimal expansion of num/den, or None when non-terminating."""
    d = den
    twos = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    fives = 0
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return None
    k = max(twos, fives)
    scaled = abs(num) * 10**k // den
    sign = "-" if num < 0 else ""
    if k == 0:
        return f"{sign}{scaled}"
    digits = str(scaled).rjust(k + 1, "0")
    return f"{sign}{digits[:-k]}.{digits[-k:]}"


def format_value(v: Value) -> str:
    """Canonical text form: Null -> '', Dec -> exact decimal or 'num/den'."""
    if v is None:
        return ""
    if isinstance(v, Fraction):
        dec = _decimal_digits(v.numerator, v.denominator)
        if dec is not None:
            return dec
        return f"{v.numerator}/{v.denominator}"
    return str(v)


def parse_value(text: str, typ: str) -> Value:
    """Parse the canonical text form back into a typed value."""
    if typ == STR:
        return text
    if text == "":
        return None
    if typ == INT:
        return check_value(int(text), INT)
    if typ == DEC:
        return Fraction(text)
    raise ValueError(f"unknown column type {typ!r}")
