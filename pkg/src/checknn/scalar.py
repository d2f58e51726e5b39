"""Exact scalar arithmetic for network weights and verification.

Every value that flows through inference or a verification engine is either
an arbitrary-precision rational (``Rational``, an alias for the stdlib
``fractions.Fraction``) or an arbitrary-precision integer for quantised
networks (``QuantInt``, a plain ``int``).  Floats are deliberately absent
from this module; the only place floating point is tolerated is wall-clock
timing in the benchmark harness.

``Fraction`` already maintains the canonical form we need (denominator
positive, gcd(num, den) = 1), so the functions here are a thin, tested
surface over it plus exact decimal parsing/rendering.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Union

Rational = Fraction
QuantInt = int
Scalar = Union[Fraction, int]

__all__ = [
    "Rational",
    "QuantInt",
    "Scalar",
    "DecimalParseError",
    "rat_add",
    "rat_mul",
    "rat_neg",
    "rat_cmp",
    "rat_from_decimal_string",
    "rat_to_decimal_string",
    "is_terminating_decimal",
    "format_decimal",
    "format_exact",
    "round_half_away_from_zero",
    "parse_scalar_token",
]


class DecimalParseError(ValueError):
    """Raised when a decimal literal does not match the accepted grammar."""


# Optional sign, mandatory integer digits, optional fraction part, optional
# exponent.  Stricter than Fraction's own string grammar on purpose: ".5",
# "5.", "1/2" and whitespace are rejected here.
_DECIMAL_RE = re.compile(r"([+-]?)(\d+)(?:\.(\d+))?(?:[eE]([+-]?\d+))?\Z")

_RATIO_RE = re.compile(r"([+-]?\d+)/(\d+)\Z")


def rat_add(a: Rational, b: Rational) -> Rational:
    return a + b


def rat_mul(a: Rational, b: Rational) -> Rational:
    return a * b


def rat_neg(a: Rational) -> Rational:
    return -a


def rat_cmp(a: Rational, b: Rational) -> int:
    """Three-way comparison: -1 if a < b, 0 if equal, 1 if a > b."""
    return (a > b) - (a < b)


def rat_from_decimal_string(text: str) -> Rational:
    """Parse a decimal literal exactly into a rational.

    Accepts an optional sign, digits, an optional fraction part and an
    optional exponent ("0.05374", "-1", "2.5e-1").  The result is exact:
    "0.05374" becomes 2687/50000, never a float.
    """
    m = _DECIMAL_RE.match(text.strip())
    if m is None:
        raise DecimalParseError(f"malformed decimal literal: {text!r}")
    sign, intpart, fracpart, exp = m.groups()
    fracpart = fracpart or ""
    digits = int(intpart + fracpart) if (intpart + fracpart) else 0
    value = Fraction(digits, 10 ** len(fracpart))
    if exp:
        e = int(exp)
        value = value * Fraction(10) ** e
    if sign == "-":
        value = -value
    return value


def is_terminating_decimal(q: Rational) -> bool:
    """True when q has a finite decimal expansion (denominator is 2^a * 5^b)."""
    d = Fraction(q).denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    return d == 1


def rat_to_decimal_string(q: Rational) -> str:
    """Render a rational as its minimal exact decimal string.

    Raises ValueError for non-terminating values such as 1/3; callers that
    want a rounded rendering should use :func:`format_decimal` instead.
    """
    q = Fraction(q)
    num, den = q.numerator, q.denominator
    if den == 1:
        return str(num)
    d = den
    two = five = 0
    while d % 2 == 0:
        d //= 2
        two += 1
    while d % 5 == 0:
        d //= 5
        five += 1
    if d != 1:
        raise ValueError(f"{q} has no terminating decimal expansion")
    k = max(two, five)
    scaled = abs(num) * 10**k // den
    digits = str(scaled).rjust(k + 1, "0")
    intpart, fracpart = digits[:-k], digits[-k:]
    fracpart = fracpart.rstrip("0")
    sign = "-" if num < 0 else ""
    return f"{sign}{intpart}.{fracpart}" if fracpart else f"{sign}{intpart}"


def _significant_digits(decimal_text: str) -> int:
    stripped = decimal_text.lstrip("-+").replace(".", "").lstrip("0")
    return len(stripped)


def round_half_away_from_zero(q: Rational) -> int:
    """Round to the nearest integer, ties away from zero (0.5 -> 1, -0.5 -> -1)."""
    q = Fraction(q)
    n, d = q.numerator, q.denominator
    if n >= 0:
        return (2 * n + d) // (2 * d)
    return -((-2 * n + d) // (2 * d))


def format_decimal(q: Rational, significant: int = 6) -> str:
    """Render a rational as a decimal rounded to `significant` digits.

    Values with a short exact expansion are printed exactly ("0.05374"),
    everything else is rounded half away from zero ("0.333333" for 1/3).
    Pure integer arithmetic throughout; no floats.
    """
    if significant < 1:
        raise ValueError("significant digit count must be >= 1")
    q = Fraction(q)
    if q == 0:
        return "0"
    if is_terminating_decimal(q):
        exact = rat_to_decimal_string(q)
        if _significant_digits(exact) <= significant:
            return exact
    sign = "-" if q < 0 else ""
    a = abs(q)
    # Find e with 10^e <= a < 10^(e+1) by exact comparison.
    e = len(str(a.numerator)) - len(str(a.denominator))
    while a < Fraction(10) ** e:
        e -= 1
    while a >= Fraction(10) ** (e + 1):
        e += 1
    mantissa = round_half_away_from_zero(a * Fraction(10) ** (significant - 1 - e))
    if mantissa == 10**significant:
        mantissa //= 10
        e += 1
    s = str(mantissa)
    point = e + 1
    if point <= 0:
        out = "0." + "0" * (-point) + s
    elif point >= len(s):
        out = s + "0" * (point - len(s))
    else:
        out = s[:point] + "." + s[point:]
    if "." in out:
        out = out.rstrip("0").rstrip(".")
    return sign + out


def format_exact(q: Scalar) -> str:
    """Render a scalar without any loss: "5", "-1", "5/2"."""
    return str(Fraction(q))


def parse_scalar_token(text: str) -> Scalar:
    """Parse a serialised scalar: integer, exact decimal, or "p/q" ratio.

    Integer tokens come back as ``int`` (the quantised scalar kind), the
    other two as ``Fraction``.  Used by the model and property file loaders.
    """
    t = text.strip()
    m = _RATIO_RE.match(t)
    if m is not None:
        den = int(m.group(2))
        if den == 0:
            raise DecimalParseError(f"zero denominator in ratio: {text!r}")
        return Fraction(int(m.group(1)), den)
    if "." in t or "e" in t or "E" in t:
        return rat_from_decimal_string(t)
    if re.fullmatch(r"[+-]?\d+", t):
        return int(t)
    raise DecimalParseError(f"malformed scalar token: {text!r}")
