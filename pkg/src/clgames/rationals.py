"""Exact rational helpers: parsing and JSON encoding of `fractions.Fraction`.

Every real-valued quantity in this package (distances, predicate values,
formula values, game values, epsilons) is a `Fraction`, so all comparisons
are exact.  On the wire a rational is a ``[numerator, denominator]`` pair;
plain integers, ``"num/den"`` strings and decimal strings are accepted on
input and converted exactly.
"""

from __future__ import annotations

from fractions import Fraction

__all__ = ["Rational", "rat", "rat_from_json", "rat_to_json", "format_rat"]

Rational = Fraction


def rat(value) -> Fraction:
    """Coerce ints, strings ("3/4", "0.25") and Fractions to an exact Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, float):
        raise TypeError(
            "floats are rejected to keep arithmetic exact; pass a string or [num, den]"
        )
    raise TypeError(f"cannot interpret {value!r} as a rational")


def rat_from_json(value) -> Fraction:
    """Decode a JSON rational: [num, den], int, or an exact string form."""
    if isinstance(value, list):
        if len(value) != 2 or not all(isinstance(v, int) for v in value):
            raise ValueError(f"rational pair must be [num, den] with integers, got {value!r}")
        num, den = value
        if den <= 0:
            raise ValueError(f"rational denominator must be positive, got {den}")
        return Fraction(num, den)
    return rat(value)


def rat_to_json(value: Fraction) -> list:
    return [value.numerator, value.denominator]


def format_rat(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"
