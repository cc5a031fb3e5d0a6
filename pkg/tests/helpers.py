"""Shared test utilities: random fixtures and independent oracles.

Random structures draw distances from [1/2, 1] so the triangle inequality
holds automatically, and give predicates the modulus min(2t, 1), which is
never binding at those distances; fixtures are therefore always valid.
Tighter-modulus fixtures for perturbation tests are built explicitly.
"""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import product

from clgames.formulas import enumerate_atomic, evaluate
from clgames.game import Position
from clgames.moduli import capped_linear
from clgames.structures import (
    MetricStructure,
    NamedPair,
    PredicateSymbol,
    Signature,
)

F = Fraction

DIST_GRID = (F(1, 2), F(5, 8), F(3, 4), F(7, 8), F(1))
VALUE_GRID = (F(0), F(1, 4), F(1, 2), F(3, 4), F(1))


def random_signature(rng: random.Random, max_predicates: int = 2, with_constant: bool = False):
    preds = []
    for i in range(rng.randint(1, max_predicates)):
        arity = rng.choice((1, 1, 2))
        preds.append(PredicateSymbol(f"P{i}", arity, capped_linear(2)))
    constants = ("c",) if with_constant else ()
    return Signature(predicates=tuple(preds), constants=constants)


def random_structure(
    rng: random.Random,
    signature: Signature,
    n_points: int | None = None,
    max_points: int = 4,
    values: tuple = VALUE_GRID,
) -> MetricStructure:
    """Valid when every predicate modulus allows diffs of max(values)-min(values)
    at distance 1/2; the default grid suits the min(2t,1) modulus."""
    n = n_points if n_points is not None else rng.randint(2, max_points)
    dist = [[F(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            v = rng.choice(DIST_GRID)
            dist[i][j] = dist[j][i] = v
    tables = {
        p.name: {args: rng.choice(values) for args in product(range(n), repeat=p.arity)}
        for p in signature.predicates
    }
    cmap = {c: rng.randrange(n) for c in signature.constants}
    return MetricStructure(
        signature=signature,
        points=tuple(f"p{i}" for i in range(n)),
        dist=tuple(tuple(row) for row in dist),
        predicate_tables=tables,
        constant_map=cmap,
    )


def random_pair(rng: random.Random, max_points: int = 4, with_constant: bool = False) -> NamedPair:
    sig = random_signature(rng, with_constant=with_constant)
    return NamedPair(
        random_structure(rng, sig, max_points=max_points),
        random_structure(rng, sig, max_points=max_points),
    )


def permuted_copy(structure: MetricStructure, rng: random.Random) -> MetricStructure:
    """An isomorphic structure with shuffled point order and fresh labels."""
    n = structure.size
    order = list(range(n))
    rng.shuffle(order)  # new index i holds old point order[i]
    inv = [0] * n
    for new, old in enumerate(order):
        inv[old] = new
    dist = tuple(
        tuple(structure.dist[order[i]][order[j]] for j in range(n)) for i in range(n)
    )
    tables = {
        name: {
            args: table[tuple(order[a] for a in args)]
            for args in product(range(n), repeat=_arity(structure, name))
        }
        for name, table in structure.predicate_tables.items()
    }
    funcs = {
        name: {
            args: inv[table[tuple(order[a] for a in args)]]
            for args in product(range(n), repeat=_farity(structure, name))
        }
        for name, table in structure.function_tables.items()
    }
    cmap = {c: inv[i] for c, i in structure.constant_map.items()}
    return MetricStructure(
        signature=structure.signature,
        points=tuple(f"q{i}" for i in range(n)),
        dist=dist,
        predicate_tables=tables,
        function_tables=funcs,
        constant_map=cmap,
    )


def _arity(structure, name):
    return structure.signature.predicate(name).arity


def _farity(structure, name):
    return structure.signature.function(name).arity


def plain_leaf(pair: NamedPair, left: tuple, right: tuple, term_depth: int = 0) -> Fraction:
    """Order-respecting leaf discrepancy, independent of the solver caches."""
    env_l = dict(enumerate(left))
    env_r = dict(enumerate(right))
    best = F(0)
    for atom in enumerate_atomic(pair.signature, len(left), term_depth):
        gap = abs(evaluate(atom, pair.left, env_l) - evaluate(atom, pair.right, env_r))
        best = max(best, gap)
    return best


def brute_force_game_value(
    pair: NamedPair, left: tuple, right: tuple, rounds: int, term_depth: int = 0
) -> Fraction:
    """Unmemoized minimax over ordered positions: the game-tree oracle."""
    if rounds == 0:
        return plain_leaf(pair, left, right, term_depth)
    best = F(0)
    for a in range(pair.left.size):
        worst = min(
            brute_force_game_value(pair, left + (a,), right + (b,), rounds - 1, term_depth)
            for b in range(pair.right.size)
        )
        best = max(best, worst)
    for b in range(pair.right.size):
        worst = min(
            brute_force_game_value(pair, left + (a,), right + (b,), rounds - 1, term_depth)
            for a in range(pair.left.size)
        )
        best = max(best, worst)
    return best


def _extend(position: Position, side: str, element: int, reply: int) -> Position:
    if side == "L":
        return position.extended(element, reply)
    return position.extended(reply, element)


def worst_leaf_following_ii(pair, position, node, term_depth: int = 0) -> Fraction:
    """Max final discrepancy over all spoiler plays when II follows the tree."""
    if node is None:
        return plain_leaf(pair, position.left, position.right, term_depth)
    worst = F(0)
    for (side, element), (reply, child) in node.responses.items():
        nxt = _extend(position, side, element, reply)
        worst = max(worst, worst_leaf_following_ii(pair, nxt, child, term_depth))
    return worst


def best_leaf_against_i(pair, position, node, term_depth: int = 0) -> Fraction:
    """Min final discrepancy over all duplicator replies to the witness tree."""
    if node is None:
        return plain_leaf(pair, position.left, position.right, term_depth)
    best = None
    for reply, child in node.continuations.items():
        nxt = _extend(position, node.side, node.element, reply)
        v = best_leaf_against_i(pair, nxt, child, term_depth)
        best = v if best is None else min(best, v)
    return best


def value_iteration_omega(pair: NamedPair, term_depth: int = 0) -> Fraction:
    """Infinite-game value by repeated clock sweeps until the whole table is
    stable: the independent oracle for the single-pass fixpoint solver."""
    nl, nr = pair.left.size, pair.right.size
    pair_list = [(a, b) for a in range(nl) for b in range(nr)]
    masks = range(1 << len(pair_list))

    def leaf(mask: int) -> Fraction:
        pairs = [pair_list[i] for i in range(len(pair_list)) if mask >> i & 1]
        return plain_leaf(
            pair, tuple(a for a, _ in pairs), tuple(b for _, b in pairs), term_depth
        )

    leaves = {m: leaf(m) for m in masks}
    values = dict(leaves)
    while True:
        nxt = {}
        for mask in masks:
            v = leaves[mask]
            for a in range(nl):
                forced = min(values[mask | 1 << pair_list.index((a, b))] for b in range(nr))
                v = max(v, forced)
            for b in range(nr):
                forced = min(values[mask | 1 << pair_list.index((a, b))] for a in range(nl))
                v = max(v, forced)
            nxt[mask] = v
        if nxt == values:
            return values[0]
        values = nxt
