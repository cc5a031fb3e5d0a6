"""Reference structure families for the inexpressibility demos.

All of them live over tiny signatures and are built exactly, so solver
outputs can be compared against hand-computed values.
"""

from __future__ import annotations

from fractions import Fraction

from .rationals import rat
from .structures import MetricStructure, NamedPair, Signature

__all__ = [
    "discrete_structure",
    "line_structure",
    "cardinality_witness_pair",
    "distance_witness_pair",
]

_ZERO = Fraction(0)
_ONE = Fraction(1)


def _metric_structure(points, dist):
    return MetricStructure(
        signature=Signature(), points=tuple(points), dist=tuple(tuple(row) for row in dist)
    )


def discrete_structure(n: int) -> MetricStructure:
    """n points, all at distance 1."""
    if n < 1:
        raise ValueError("need at least one point")
    dist = [[_ZERO if i == j else _ONE for j in range(n)] for i in range(n)]
    return _metric_structure([f"p{i}" for i in range(n)], dist)


def line_structure(positions) -> MetricStructure:
    """Points on [0,1] with the absolute-difference metric."""
    xs = [rat(p) for p in positions]
    if len(set(xs)) != len(xs):
        raise ValueError("positions must be distinct")
    if any(x < 0 or x > 1 for x in xs):
        raise ValueError("positions must lie in [0,1]")
    dist = [[abs(a - b) for b in xs] for a in xs]
    from .rationals import format_rat

    return _metric_structure([format_rat(x) for x in xs], dist)


def cardinality_witness_pair(epsilon) -> NamedPair:
    """Two-point discrete space vs the three-point space where two points sit
    eps/2 apart: the pair showing that 'at least n points' has no sentence.

    The n-round game value is exactly eps/2 once both near points can be
    exhibited; the duplicator's optimal play pretends they are one point.
    """
    eps = rat(epsilon)
    if not (0 < eps <= 1):
        raise ValueError("epsilon must be in (0, 1]")
    left = discrete_structure(2)
    half = eps / 2
    dist = (
        (_ZERO, _ONE, _ONE),
        (_ONE, _ZERO, half),
        (_ONE, half, _ZERO),
    )
    right = _metric_structure(["p0", "p1", "p2"], dist)
    return NamedPair(left, right)


def distance_witness_pair(delta, m: int) -> NamedPair:
    """Truncations (points 0..m) of the pair showing that 'some two points
    sit at distance exactly delta' has no sentence.

    Left realizes distances delta + 1/(n+1) from point 0; right realizes
    delta itself plus delta + 1/n.  Matching n on the left with n+1 on the
    right is exact except at the truncation edge, so the 2-round value is
    exactly 1/(m+1).
    """
    delta = rat(delta)
    if not (0 < delta <= Fraction(1, 2)):
        raise ValueError("delta must be in (0, 1/2] for the truncated triangle inequality")
    if m < 2:
        raise ValueError("need m >= 2")
    if 2 * delta + Fraction(1, m) < 1:
        raise ValueError(
            f"truncation m={m} breaks the triangle inequality for delta={delta} "
            f"(need 2*delta + 1/m >= 1)"
        )
    n_points = m + 1

    def d_left(i, j):
        if i == j:
            return _ZERO
        if i == 0:
            return delta + Fraction(1, j + 1)
        if j == 0:
            return delta + Fraction(1, i + 1)
        return _ONE

    def d_right(i, j):
        if i == j:
            return _ZERO
        lo, hi = min(i, j), max(i, j)
        if lo == 0:
            return delta if hi == 1 else delta + Fraction(1, hi)
        return _ONE

    left = _metric_structure(
        [str(i) for i in range(n_points)],
        [[d_left(i, j) for j in range(n_points)] for i in range(n_points)],
    )
    right = _metric_structure(
        [str(i) for i in range(n_points)],
        [[d_right(i, j) for j in range(n_points)] for i in range(n_points)],
    )
    return NamedPair(left, right)
