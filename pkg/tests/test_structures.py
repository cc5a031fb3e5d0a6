"""Structure validation, reducts, expansions, relationalization, file I/O."""

import json
import random
from fractions import Fraction
from itertools import product

import pytest

from clgames.moduli import capped_linear, identity_modulus, linear_modulus
from clgames.structures import (
    FunctionSymbol,
    MetricStructure,
    NamedPair,
    PredicateSymbol,
    Signature,
    StructureValidationError,
    expand_with_constants,
    find_isomorphism,
    load_pair,
    load_structure,
    reduct,
    relationalize,
    save_pair,
    save_structure,
    structure_from_json,
    structure_to_json,
    validate,
)

import helpers

F = Fraction


def two_point(pred_modulus) -> MetricStructure:
    sig = Signature(predicates=(PredicateSymbol("P", 1, pred_modulus),))
    return MetricStructure(
        signature=sig,
        points=("a", "b"),
        dist=((F(0), F(1)), (F(1), F(0))),
        predicate_tables={"P": {(0,): F(0), (1,): F(1)}},
    )


class TestValidate:
    def test_valid_identity_modulus(self):
        assert validate(two_point(identity_modulus())).ok

    def test_modulus_violation_witnessed(self):
        report = validate(two_point(linear_modulus(F(1, 2))))
        assert not report.ok
        kinds = {v.kind for v in report.violations}
        assert kinds == {"predicate-modulus"}
        witness = report.violations[0].witness
        assert witness[0] == "P" and {witness[1], witness[2]} == {(0,), (1,)}

    def test_triangle_violation_witnessed(self):
        s = MetricStructure(
            signature=Signature(),
            points=("a", "b", "c"),
            dist=(
                (F(0), F(1, 4), F(1)),
                (F(1, 4), F(0), F(1, 4)),
                (F(1), F(1, 4), F(0)),
            ),
        )
        report = validate(s)
        assert any(v.kind == "triangle" for v in report.violations)

    def test_zero_distance_rejected_unless_pseudometric(self):
        s = MetricStructure(
            signature=Signature(),
            points=("a", "b"),
            dist=((F(0), F(0)), (F(0), F(0))),
        )
        assert not validate(s).ok
        lax = validate(s, allow_pseudometric=True)
        assert lax.ok and any("pseudometric" in note for note in lax.notes)

    def test_diameter_and_bounds(self):
        s = MetricStructure(
            signature=Signature(),
            points=("a", "b"),
            dist=((F(0), F(3, 2)), (F(3, 2), F(0))),
        )
        assert any(v.kind == "diameter" for v in validate(s).violations)

    def test_incomplete_table_reported(self):
        sig = Signature(predicates=(PredicateSymbol("P", 1, capped_linear(2)),))
        s = MetricStructure(
            signature=sig,
            points=("a", "b"),
            dist=((F(0), F(1)), (F(1), F(0))),
            predicate_tables={"P": {(0,): F(0)}},
        )
        assert any(v.kind == "incomplete-table" for v in validate(s).violations)

    def test_random_fixtures_valid(self):
        rng = random.Random(7)
        for _ in range(25):
            s = helpers.random_structure(rng, helpers.random_signature(rng, with_constant=True))
            assert validate(s).ok

    def test_perturbation_flips_report(self):
        # tight modulus: any predicate entry pushed beyond its bound must
        # surface as a violation, and only then
        sig = Signature(predicates=(PredicateSymbol("P", 1, linear_modulus(F(3, 4))),))
        base = MetricStructure(
            signature=sig,
            points=("a", "b", "c"),
            dist=(
                (F(0), F(1, 2), F(3, 4)),
                (F(1, 2), F(0), F(1)),
                (F(3, 4), F(1), F(0)),
            ),
            predicate_tables={"P": {(0,): F(1, 2), (1,): F(1, 2), (2,): F(1, 2)}},
        )
        assert validate(base).ok
        flips = 0
        for idx in range(3):
            for value in helpers.VALUE_GRID:
                table = dict(base.predicate_tables["P"])
                table[(idx,)] = value
                mutated = MetricStructure(
                    signature=sig,
                    points=base.points,
                    dist=base.dist,
                    predicate_tables={"P": table},
                )
                expected_ok = all(
                    abs(table[(i,)] - table[(j,)]) <= F(3, 4) * base.dist[i][j]
                    for i in range(3)
                    for j in range(3)
                )
                assert validate(mutated).ok == expected_ok
                flips += not expected_ok
        assert flips > 0


class TestReduct:
    def setup_method(self):
        rng = random.Random(3)
        sig = Signature(
            predicates=(
                PredicateSymbol("P", 1, capped_linear(2)),
                PredicateSymbol("Q", 2, capped_linear(2)),
            ),
            constants=("c",),
        )
        self.s = helpers.random_structure(rng, sig, n_points=3)

    def test_full_reduct_is_identity(self):
        assert reduct(self.s, self.s.signature) == self.s

    def test_empty_reduct_is_pure_metric(self):
        bare = reduct(self.s, Signature())
        assert bare.signature == Signature()
        assert bare.dist == self.s.dist and bare.points == self.s.points
        assert bare.predicate_tables == {} and bare.constant_map == {}

    def test_drop_one_predicate(self):
        sub = Signature(predicates=(self.s.signature.predicate("P"),), constants=("c",))
        r = reduct(self.s, sub)
        assert set(r.predicate_tables) == {"P"}
        assert r.dist == self.s.dist
        assert validate(r).ok

    def test_unknown_symbol_rejected(self):
        foreign = Signature(predicates=(PredicateSymbol("Z", 1, capped_linear(2)),))
        with pytest.raises(ValueError):
            reduct(self.s, foreign)

    def test_mismatched_modulus_rejected(self):
        changed = Signature(predicates=(PredicateSymbol("P", 1, identity_modulus()),))
        with pytest.raises(ValueError):
            reduct(self.s, changed)

    def test_random_reducts_stay_valid(self):
        rng = random.Random(61)
        for _ in range(5):
            sig = helpers.random_signature(rng, with_constant=True)
            s = helpers.random_structure(rng, sig)
            for keep in range(len(sig.predicates) + 1):
                sub = Signature(predicates=sig.predicates[:keep], constants=sig.constants)
                assert validate(reduct(s, sub)).ok


class TestExpandWithConstants:
    def test_empty_expansion_is_identity(self):
        s = two_point(identity_modulus())
        assert expand_with_constants(s, []) == s

    def test_single_point(self):
        s = expand_with_constants(two_point(identity_modulus()), ["a"])
        assert s.signature.constants == ("c0",)
        assert s.constant_map == {"c0": 0}
        assert validate(s).ok

    def test_repeated_expansion_numbers_in_order(self):
        s = expand_with_constants(two_point(identity_modulus()), [0, 1])
        s = expand_with_constants(s, [1])
        assert s.signature.constants == ("c0", "c1", "c2")
        assert s.constant_map == {"c0": 0, "c1": 1, "c2": 1}

    def test_unknown_point_rejected(self):
        with pytest.raises(KeyError):
            expand_with_constants(two_point(identity_modulus()), ["zz"])


class TestRelationalize:
    def test_no_functions_unchanged(self):
        s = two_point(identity_modulus())
        assert relationalize(s) is s

    def test_identity_function_gives_distance_table(self):
        sig = Signature(functions=(FunctionSymbol("f", 1, identity_modulus()),))
        s = MetricStructure(
            signature=sig,
            points=("a", "b"),
            dist=((F(0), F(1)), (F(1), F(0))),
            function_tables={"f": {(0,): 0, (1,): 1}},
        )
        r = relationalize(s)
        assert r.signature.is_relational
        table = r.predicate_tables["P_f"]
        for a, b in product(range(2), repeat=2):
            assert table[(a, b)] == s.dist[b][a]

    def test_swap_function_table(self):
        sig = Signature(functions=(FunctionSymbol("f", 1, identity_modulus()),))
        s = MetricStructure(
            signature=sig,
            points=("0", "1"),
            dist=((F(0), F(1)), (F(1), F(0))),
            function_tables={"f": {(0,): 1, (1,): 0}},
        )
        table = relationalize(s).predicate_tables["P_f"]
        assert table[(0, 0)] == 1 and table[(0, 1)] == 0
        assert table[(1, 0)] == 0 and table[(1, 1)] == 1

    def test_function_recoverable_and_valid(self):
        rng = random.Random(11)
        sig = Signature(
            predicates=(PredicateSymbol("P", 1, capped_linear(2)),),
            functions=(FunctionSymbol("f", 1, capped_linear(2)),),
        )
        s = helpers.random_structure(rng, Signature(predicates=sig.predicates), n_points=3)
        ftab = {(i,): rng.randrange(3) for i in range(3)}
        s = MetricStructure(
            signature=sig,
            points=s.points,
            dist=s.dist,
            predicate_tables=s.predicate_tables,
            function_tables={"f": ftab},
        )
        assert validate(s).ok
        r = relationalize(s)
        assert validate(r).ok
        graph = r.predicate_tables["P_f"]
        for args, image in ftab.items():
            for b in range(3):
                assert (graph[args + (b,)] == 0) == (b == image)
        # metric and points preserved exactly
        assert r.points == s.points and r.dist == s.dist


class TestFindIsomorphism:
    def test_permuted_copy_found(self):
        rng = random.Random(5)
        s = helpers.random_structure(rng, helpers.random_signature(rng, with_constant=True))
        t = helpers.permuted_copy(s, rng)
        assert find_isomorphism(s, t) is not None

    def test_distinct_structures_not_isomorphic(self):
        a = two_point(identity_modulus())
        b = MetricStructure(
            signature=a.signature,
            points=("a", "b"),
            dist=a.dist,
            predicate_tables={"P": {(0,): F(0), (1,): F(1, 2)}},
        )
        assert find_isomorphism(a, b) is None


class TestJsonIO:
    def test_round_trip_corpus(self, tmp_path):
        rng = random.Random(23)
        for i in range(20):
            sig = helpers.random_signature(rng, with_constant=rng.random() < 0.5)
            s = helpers.random_structure(rng, sig)
            path = tmp_path / f"fixture_{i}.json"
            save_structure(s, path)
            assert load_structure(path) == s

    def test_round_trip_preserves_exact_rationals(self):
        s = two_point(identity_modulus())
        assert structure_from_json(structure_to_json(s)) == s

    def test_decimal_strings_accepted(self):
        blob = structure_to_json(two_point(identity_modulus()))
        blob["dist"][0][1] = "0.25"
        blob["dist"][1][0] = "1/4"
        loaded = structure_from_json(blob)
        assert loaded.dist[0][1] == F(1, 4) == loaded.dist[1][0]

    def test_load_rejects_triangle_violation(self, tmp_path):
        s = MetricStructure(
            signature=Signature(),
            points=("a", "b", "c"),
            dist=(
                (F(0), F(1, 4), F(1)),
                (F(1, 4), F(0), F(1, 4)),
                (F(1), F(1, 4), F(0)),
            ),
        )
        path = tmp_path / "bad.json"
        save_structure(s, path)
        with pytest.raises(StructureValidationError) as err:
            load_structure(path)
        assert "triangle" in str(err.value)
        # the skip flag loads the same file
        assert load_structure(path, check=False) == s

    def test_pair_round_trip(self, tmp_path):
        rng = random.Random(29)
        pair = helpers.random_pair(rng)
        path = tmp_path / "pair.json"
        save_pair(pair, path)
        assert load_pair(path) == pair

    def test_malformed_file_rejected(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(json.JSONDecodeError):
            load_structure(path)


class TestNamedPair:
    def test_signature_mismatch_rejected(self):
        a = two_point(identity_modulus())
        b = two_point(capped_linear(2))
        with pytest.raises(ValueError):
            NamedPair(a, b)
