"""Exact-rational and float number handling.

Two arithmetic backends coexist: ``fractions.Fraction`` (exact mode) and
``float``. A quantity computed from Fractions is tested for zero exactly; a
float is treated as zero when its magnitude is at most :data:`FLOAT_ZERO`.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational

from .errors import ContractError, ValidationError

FLOAT_ZERO = 1e-12
INF = math.inf

EXACT = "exact"
FLOAT = "float"
MODES = (EXACT, FLOAT)


def check_mode(mode):
    if mode not in MODES:
        raise ValidationError(f"unknown numeric mode {mode!r}; expected one of {MODES}")
    return mode


def parse_number(value, mode=EXACT):
    """Convert user input (int, float, Fraction, ``"p/q"`` or decimal string).

    In exact mode decimal strings and floats are converted to the Fraction
    they spell (``"0.1"`` -> 1/10), not to their binary expansion.
    """
    check_mode(mode)
    if isinstance(value, bool):
        raise ValidationError(f"boolean {value!r} is not a number")
    if isinstance(value, str):
        text = value.strip()
        if text.lower() in ("inf", "+inf", "infinity"):
            return INF
        try:
            q = Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"cannot parse number {value!r}") from exc
        return q if mode == EXACT else float(q)
    if isinstance(value, Rational):
        return Fraction(value) if mode == EXACT else float(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            return value
        return Fraction(repr(value)) if mode == EXACT else value
    try:
        return parse_number(float(value), mode)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"cannot parse number {value!r}") from exc


def convert(value, mode):
    """Coerce an already-numeric value to the backend of ``mode``."""
    if isinstance(value, float) and math.isinf(value):
        return value
    if mode == EXACT:
        if isinstance(value, float):
            return Fraction(value)
        return Fraction(value)
    return float(value)


def is_exact(value):
    return isinstance(value, Rational)


def all_exact(values):
    return all(isinstance(v, Rational) for v in values)


def mode_of(values):
    return EXACT if all_exact(values) else FLOAT


def is_zero(x):
    if isinstance(x, Rational):
        return x == 0
    return abs(x) <= FLOAT_ZERO


def is_positive(x):
    if isinstance(x, Rational):
        return x > 0
    return x > FLOAT_ZERO


def is_negative(x):
    return is_positive(-x)


def ext_add(a, b):
    """Extended-real addition; ``inf - inf`` is a contract error."""
    if math.isinf(a) and math.isinf(b) and (a > 0) != (b > 0):
        raise ContractError("undefined extended-real sum inf - inf")
    if isinstance(a, float) and math.isinf(a):
        return a
    if isinstance(b, float) and math.isinf(b):
        return b
    return a + b


def ext_sub(a, b):
    if isinstance(b, float) and math.isinf(b):
        return ext_add(a, -b)
    return ext_add(a, -b)


def dot(a, b):
    return sum((x * y for x, y in zip(a, b)), 0 * a[0] if a else 0)


def format_number(x):
    """Render a number for reports: ``"p/q"`` for rationals, 12 significant
    digits for floats, ``"inf"``/``"-inf"`` for infinities."""
    if isinstance(x, bool):
        return x
    if isinstance(x, Rational):
        q = Fraction(x)
        return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(f"{x:.12g}")
