"""Exact rational scalars and small vector helpers.

All problem data is kept as :class:`fractions.Fraction` so feasibility,
duality and stationarity tests can compare exactly. Floats only appear
where a square root is unavoidable (norms, step sizes); converting such a
float back through ``Fraction(x)`` is exact, so downstream arithmetic stays
rational.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence, Union

Number = Union[int, float, str, Fraction]

ZERO = Fraction(0)
HALF = Fraction(1, 2)


def as_fraction(value: Number) -> Fraction:
    """Parse user-supplied data into an exact Fraction.

    Floats are read through their decimal representation, so ``0.1`` in an
    instance file means one tenth. Strings accept ``"3/7"`` and decimals.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite number: {value!r}")
        return Fraction(str(value))
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"cannot parse number: {value!r}") from exc
    raise TypeError(f"cannot convert {type(value).__name__} to a rational")


def format_number(x: Fraction) -> Union[int, str]:
    """Serialize a Fraction as an int when integral, else as ``"p/q"``."""
    if x.denominator == 1:
        return int(x)
    return f"{x.numerator}/{x.denominator}"


def safe_float(x: Fraction) -> float:
    try:
        return float(x)
    except OverflowError:
        return math.inf if x > 0 else -math.inf


def dot(a: Sequence, b: Sequence) -> Fraction:
    if len(a) != len(b):
        raise ValueError(f"dot length mismatch: {len(a)} vs {len(b)}")
    total = ZERO
    for x, y in zip(a, b):
        if x and y:
            total += x * y
    return total


def norm_sq(v: Iterable) -> Fraction:
    total = ZERO
    for x in v:
        if x:
            total += x * x
    return total


def pos_part(v: Iterable) -> list:
    return [x if x > 0 else ZERO for x in v]


def inf_norm(v: Iterable) -> Fraction:
    best = ZERO
    for x in v:
        m = -x if x < 0 else x
        if m > best:
            best = m
    return best


def float_norm(v: Iterable) -> float:
    """Euclidean norm as a float (exact sum of squares, then sqrt)."""
    return math.sqrt(safe_float(norm_sq(v)))
