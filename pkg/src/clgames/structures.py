"""Signatures and finite metric structures with exhaustive validation.

A signature lists predicate and function symbols (each with an arity and a
modulus of uniform continuity) plus constant names.  Structures are finite
labelled point sets with an exact rational distance matrix, full predicate
and function tables, and a constant map.  The diameter bound is fixed at 1
and predicate values live in [0, 1].

Validation reports every broken invariant with a concrete witness instead of
raising: violations are data.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from pathlib import Path

from .moduli import (
    PwlModulus,
    capped_linear,
    cap_at_one,
    compose,
    modulus_from_json,
    modulus_max,
    modulus_to_json,
)
from .rationals import format_rat, rat_from_json, rat_to_json

__all__ = [
    "PredicateSymbol",
    "FunctionSymbol",
    "Signature",
    "MetricStructure",
    "NamedPair",
    "Violation",
    "ValidationReport",
    "StructureValidationError",
    "validate",
    "reduct",
    "expand_with_constants",
    "relationalize",
    "find_isomorphism",
    "structure_to_json",
    "structure_from_json",
    "load_structure",
    "save_structure",
    "load_pair",
    "save_pair",
]

_ZERO = Fraction(0)
_ONE = Fraction(1)


@dataclass(frozen=True)
class PredicateSymbol:
    name: str
    arity: int
    modulus: PwlModulus

    def __post_init__(self):
        if self.arity < 1:
            raise ValueError(f"predicate {self.name!r} needs arity >= 1")


@dataclass(frozen=True)
class FunctionSymbol:
    name: str
    arity: int
    modulus: PwlModulus

    def __post_init__(self):
        if self.arity < 1:
            raise ValueError(f"function {self.name!r} needs arity >= 1 (use a constant instead)")


@dataclass(frozen=True)
class Signature:
    predicates: tuple[PredicateSymbol, ...] = ()
    functions: tuple[FunctionSymbol, ...] = ()
    constants: tuple[str, ...] = ()

    def __post_init__(self):
        names = [s.name for s in self.predicates] + [s.name for s in self.functions] + list(
            self.constants
        )
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise ValueError(f"symbol names must be unique, duplicated: {sorted(dupes)}")

    @property
    def is_relational(self) -> bool:
        return not self.functions

    def predicate(self, name: str) -> PredicateSymbol:
        for p in self.predicates:
            if p.name == name:
                return p
        raise KeyError(f"unknown predicate {name!r}")

    def function(self, name: str) -> FunctionSymbol:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(f"unknown function {name!r}")

    def has_symbol(self, name: str) -> bool:
        return (
            any(p.name == name for p in self.predicates)
            or any(f.name == name for f in self.functions)
            or name in self.constants
        )

    def is_subsignature_of(self, other: Signature) -> bool:
        return (
            all(p in other.predicates for p in self.predicates)
            and all(f in other.functions for f in self.functions)
            and all(c in other.constants for c in self.constants)
        )


@dataclass(frozen=True)
class MetricStructure:
    """Finite metric structure; treat as immutable after construction."""

    signature: Signature
    points: tuple[str, ...]
    dist: tuple[tuple[Fraction, ...], ...]
    predicate_tables: dict = field(default_factory=dict)
    function_tables: dict = field(default_factory=dict)
    constant_map: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.points:
            raise ValueError("a metric structure needs at least one point")
        if len(set(self.points)) != len(self.points):
            raise ValueError("point labels must be distinct")

    @property
    def size(self) -> int:
        return len(self.points)

    def point_index(self, label) -> int:
        if isinstance(label, int):
            if not 0 <= label < len(self.points):
                raise KeyError(f"point index {label} out of range")
            return label
        try:
            return self.points.index(label)
        except ValueError:
            raise KeyError(f"unknown point {label!r}") from None

    def distance(self, i: int, j: int) -> Fraction:
        return self.dist[i][j]

    def pred_value(self, name: str, args: tuple[int, ...]) -> Fraction:
        return self.predicate_tables[name][args]

    def func_value(self, name: str, args: tuple[int, ...]) -> int:
        return self.function_tables[name][args]

    def constant(self, name: str) -> int:
        return self.constant_map[name]


@dataclass(frozen=True)
class NamedPair:
    """Two structures over one signature; sides are kept disjoint by tagging."""

    left: MetricStructure
    right: MetricStructure

    def __post_init__(self):
        if self.left.signature != self.right.signature:
            raise ValueError("paired structures must share a signature")

    @property
    def signature(self) -> Signature:
        return self.left.signature


@dataclass(frozen=True)
class Violation:
    kind: str
    witness: tuple
    detail: str

    def __str__(self):
        return f"{self.kind} at {self.witness}: {self.detail}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind: str, witness: tuple, detail: str):
        self.violations.append(Violation(kind, witness, detail))

    def __str__(self):
        if self.ok:
            lines = ["valid"]
        else:
            lines = [f"{len(self.violations)} violation(s)"] + [
                f"  - {v}" for v in self.violations
            ]
        lines += [f"  note: {n}" for n in self.notes]
        return "\n".join(lines)


class StructureValidationError(ValueError):
    def __init__(self, report: ValidationReport):
        self.report = report
        super().__init__(str(report))


def _tuples(n_points: int, arity: int):
    return product(range(n_points), repeat=arity)


def validate(structure: MetricStructure, allow_pseudometric: bool = False) -> ValidationReport:
    """Full check of the structure axioms; every violation carries a witness."""
    report = ValidationReport()
    n = structure.size
    labels = structure.points
    d = structure.dist

    if len(d) != n or any(len(row) != n for row in d):
        report.add("matrix-shape", (), f"distance matrix must be {n}x{n}")
        return report

    for i in range(n):
        if d[i][i] != 0:
            report.add("self-distance", (labels[i],), f"d(x,x) = {format_rat(d[i][i])} != 0")
        for j in range(i + 1, n):
            if d[i][j] != d[j][i]:
                report.add(
                    "symmetry",
                    (labels[i], labels[j]),
                    f"d = {format_rat(d[i][j])} vs {format_rat(d[j][i])}",
                )
            if d[i][j] < 0:
                report.add("negative-distance", (labels[i], labels[j]), format_rat(d[i][j]))
            if d[i][j] > 1:
                report.add(
                    "diameter", (labels[i], labels[j]), f"d = {format_rat(d[i][j])} > 1"
                )
            if d[i][j] == 0:
                if allow_pseudometric:
                    report.notes.append(
                        f"pseudometric: d({labels[i]},{labels[j]}) = 0 (non-conforming)"
                    )
                else:
                    report.add("identity-of-indiscernibles", (labels[i], labels[j]), "d = 0")
    for i, j, k in product(range(n), repeat=3):
        if d[i][k] > d[i][j] + d[j][k]:
            report.add(
                "triangle",
                (labels[i], labels[j], labels[k]),
                f"d({labels[i]},{labels[k]}) = {format_rat(d[i][k])} > "
                f"{format_rat(d[i][j])} + {format_rat(d[j][k])}",
            )

    for sym in structure.signature.predicates:
        table = structure.predicate_tables.get(sym.name)
        if table is None:
            report.add("missing-table", (sym.name,), "predicate table absent")
            continue
        for args in _tuples(n, sym.arity):
            if args not in table:
                report.add("incomplete-table", (sym.name, args), "missing entry")
        for args, value in table.items():
            if not (0 <= value <= 1):
                report.add(
                    "predicate-bound", (sym.name, args), f"value {format_rat(value)} not in [0,1]"
                )
        for xs in _tuples(n, sym.arity):
            if xs not in table:
                continue
            for ys in _tuples(n, sym.arity):
                if ys <= xs or ys not in table:
                    continue
                gap = max(d[x][y] for x, y in zip(xs, ys))
                bound = sym.modulus.evaluate(gap)
                diff = abs(table[xs] - table[ys])
                if diff > bound:
                    report.add(
                        "predicate-modulus",
                        (sym.name, xs, ys),
                        f"|{format_rat(table[xs])} - {format_rat(table[ys])}| "
                        f"> modulus({format_rat(gap)}) = {format_rat(bound)}",
                    )
    for sym in structure.signature.functions:
        table = structure.function_tables.get(sym.name)
        if table is None:
            report.add("missing-table", (sym.name,), "function table absent")
            continue
        for args in _tuples(n, sym.arity):
            if args not in table:
                report.add("incomplete-table", (sym.name, args), "missing entry")
        for args, value in table.items():
            if not (isinstance(value, int) and 0 <= value < n):
                report.add("function-range", (sym.name, args), f"image {value!r} not a point")
        for xs in _tuples(n, sym.arity):
            if xs not in table:
                continue
            for ys in _tuples(n, sym.arity):
                if ys <= xs or ys not in table:
                    continue
                fx, fy = table[xs], table[ys]
                if not (isinstance(fx, int) and isinstance(fy, int)):
                    continue
                gap = max(d[x][y] for x, y in zip(xs, ys))
                bound = sym.modulus.evaluate(gap)
                if d[fx][fy] > bound:
                    report.add(
                        "function-modulus",
                        (sym.name, xs, ys),
                        f"d(f(x),f(y)) = {format_rat(d[fx][fy])} "
                        f"> modulus({format_rat(gap)}) = {format_rat(bound)}",
                    )
    for name in structure.signature.constants:
        if name not in structure.constant_map:
            report.add("missing-constant", (name,), "constant not interpreted")
        else:
            idx = structure.constant_map[name]
            if not (isinstance(idx, int) and 0 <= idx < n):
                report.add("constant-range", (name,), f"image {idx!r} not a point")
    for name in structure.constant_map:
        if name not in structure.signature.constants:
            report.add("stray-constant", (name,), "interpreted constant not in signature")
    for name in structure.predicate_tables:
        if not any(p.name == name for p in structure.signature.predicates):
            report.add("stray-table", (name,), "predicate table without a symbol")
    for name in structure.function_tables:
        if not any(f.name == name for f in structure.signature.functions):
            report.add("stray-table", (name,), "function table without a symbol")
    return report


def reduct(structure: MetricStructure, subsignature: Signature) -> MetricStructure:
    """Restrict interpretations to a subsignature; domain and metric unchanged."""
    if not subsignature.is_subsignature_of(structure.signature):
        raise ValueError("reduct target is not a subsignature (symbols must match exactly)")
    return MetricStructure(
        signature=subsignature,
        points=structure.points,
        dist=structure.dist,
        predicate_tables={
            p.name: dict(structure.predicate_tables[p.name]) for p in subsignature.predicates
        },
        function_tables={
            f.name: dict(structure.function_tables[f.name]) for f in subsignature.functions
        },
        constant_map={c: structure.constant_map[c] for c in subsignature.constants},
    )


_FRESH_CONSTANT = re.compile(r"^c(\d+)$")


def expand_with_constants(structure: MetricStructure, points) -> MetricStructure:
    """Append fresh constants c<i> naming the given points (labels or indices)."""
    indices = [structure.point_index(p) for p in points]
    taken = [int(m.group(1)) for c in structure.signature.constants if (m := _FRESH_CONSTANT.match(c))]
    next_id = max(taken, default=-1) + 1
    names = []
    for _ in indices:
        while structure.signature.has_symbol(f"c{next_id}"):
            next_id += 1
        names.append(f"c{next_id}")
        next_id += 1
    sig = Signature(
        predicates=structure.signature.predicates,
        functions=structure.signature.functions,
        constants=structure.signature.constants + tuple(names),
    )
    cmap = dict(structure.constant_map)
    cmap.update(zip(names, indices))
    return MetricStructure(
        signature=sig,
        points=structure.points,
        dist=structure.dist,
        predicate_tables={k: dict(v) for k, v in structure.predicate_tables.items()},
        function_tables={k: dict(v) for k, v in structure.function_tables.items()},
        constant_map=cmap,
    )


def _graph_predicate_modulus(func_modulus: PwlModulus) -> PwlModulus:
    # d(b, F(a)) moves by at most d(b,b') + d(F(a),F(a')); bounded by the
    # concave majorant of max(min(2t,1), min(2*mod_F(t),1)), capped at 1
    doubling = capped_linear(2)
    return cap_at_one(modulus_max(compose(doubling, func_modulus), doubling))


def relationalize(structure: MetricStructure) -> MetricStructure:
    """Replace each n-ary function F by an (n+1)-ary predicate P_F with
    P_F(a_0,...,a_n) = d(a_n, F(a_0,...,a_{n-1})).

    The original table is recoverable: F(a) = b iff P_F(a, b) = 0.
    """
    if not structure.signature.functions:
        return structure
    new_preds = list(structure.signature.predicates)
    new_tables = {k: dict(v) for k, v in structure.predicate_tables.items()}
    n = structure.size
    for sym in structure.signature.functions:
        pname = f"P_{sym.name}"
        if structure.signature.has_symbol(pname) or any(p.name == pname for p in new_preds):
            raise ValueError(f"relationalized name {pname!r} collides with an existing symbol")
        new_preds.append(
            PredicateSymbol(pname, sym.arity + 1, _graph_predicate_modulus(sym.modulus))
        )
        table = {}
        ftab = structure.function_tables[sym.name]
        for args in _tuples(n, sym.arity):
            image = ftab[args]
            for b in range(n):
                table[args + (b,)] = structure.dist[b][image]
        new_tables[pname] = table
    sig = Signature(
        predicates=tuple(new_preds), functions=(), constants=structure.signature.constants
    )
    return MetricStructure(
        signature=sig,
        points=structure.points,
        dist=structure.dist,
        predicate_tables=new_tables,
        function_tables={},
        constant_map=dict(structure.constant_map),
    )


def find_isomorphism(left: MetricStructure, right: MetricStructure):
    """Brute-force exact isomorphism; returns a point mapping or None."""
    if left.signature != right.signature or left.size != right.size:
        return None
    from itertools import permutations

    n = left.size
    sig = left.signature
    for perm in permutations(range(n)):
        if any(left.dist[i][j] != right.dist[perm[i]][perm[j]] for i in range(n) for j in range(n)):
            continue
        if any(perm[left.constant_map[c]] != right.constant_map[c] for c in sig.constants):
            continue
        ok = True
        for p in sig.predicates:
            lt, rt = left.predicate_tables[p.name], right.predicate_tables[p.name]
            if any(lt[args] != rt[tuple(perm[a] for a in args)] for args in _tuples(n, p.arity)):
                ok = False
                break
        if not ok:
            continue
        for f in sig.functions:
            lt, rt = left.function_tables[f.name], right.function_tables[f.name]
            if any(
                perm[lt[args]] != rt[tuple(perm[a] for a in args)] for args in _tuples(n, f.arity)
            ):
                ok = False
                break
        if ok:
            return {left.points[i]: right.points[perm[i]] for i in range(n)}
    return None


# --- JSON (de)serialization -------------------------------------------------

def _key_to_tuple(key: str) -> tuple[int, ...]:
    body = key.strip()
    if not (body.startswith("(") and body.endswith(")")):
        raise ValueError(f"table key must look like '(i,j,...)', got {key!r}")
    parts = [p.strip() for p in body[1:-1].split(",")]
    return tuple(int(p) for p in parts if p)


def _tuple_to_key(args: tuple[int, ...]) -> str:
    return "(" + ",".join(str(a) for a in args) + ")"


def signature_to_json(sig: Signature) -> dict:
    return {
        "predicates": [
            {"name": p.name, "arity": p.arity, "modulus": modulus_to_json(p.modulus)}
            for p in sig.predicates
        ],
        "functions": [
            {"name": f.name, "arity": f.arity, "modulus": modulus_to_json(f.modulus)}
            for f in sig.functions
        ],
        "constants": list(sig.constants),
    }


def signature_from_json(data: dict) -> Signature:
    return Signature(
        predicates=tuple(
            PredicateSymbol(p["name"], int(p["arity"]), modulus_from_json(p["modulus"]))
            for p in data.get("predicates", [])
        ),
        functions=tuple(
            FunctionSymbol(f["name"], int(f["arity"]), modulus_from_json(f["modulus"]))
            for f in data.get("functions", [])
        ),
        constants=tuple(data.get("constants", [])),
    )


def structure_to_json(structure: MetricStructure) -> dict:
    return {
        "signature": signature_to_json(structure.signature),
        "points": list(structure.points),
        "dist": [[rat_to_json(v) for v in row] for row in structure.dist],
        "predicates": {
            name: {_tuple_to_key(args): rat_to_json(v) for args, v in sorted(table.items())}
            for name, table in structure.predicate_tables.items()
        },
        "functions": {
            name: {_tuple_to_key(args): v for args, v in sorted(table.items())}
            for name, table in structure.function_tables.items()
        },
        "constants": dict(structure.constant_map),
    }


def structure_from_json(data: dict) -> MetricStructure:
    sig = signature_from_json(data["signature"])
    points = tuple(str(p) for p in data["points"])
    dist = tuple(tuple(rat_from_json(v) for v in row) for row in data["dist"])
    preds = {
        name: {_key_to_tuple(k): rat_from_json(v) for k, v in table.items()}
        for name, table in data.get("predicates", {}).items()
    }
    funcs = {
        name: {_key_to_tuple(k): int(v) for k, v in table.items()}
        for name, table in data.get("functions", {}).items()
    }
    consts = {name: int(v) for name, v in data.get("constants", {}).items()}
    return MetricStructure(
        signature=sig,
        points=points,
        dist=dist,
        predicate_tables=preds,
        function_tables=funcs,
        constant_map=consts,
    )


def save_structure(structure: MetricStructure, path):
    Path(path).write_text(json.dumps(structure_to_json(structure), indent=2) + "\n")


def load_structure(path, check: bool = True, allow_pseudometric: bool = False) -> MetricStructure:
    """Load and (by default) validate a structure file."""
    data = json.loads(Path(path).read_text())
    structure = structure_from_json(data)
    if check:
        report = validate(structure, allow_pseudometric=allow_pseudometric)
        if not report.ok:
            raise StructureValidationError(report)
    return structure


def pair_to_json(pair: NamedPair) -> dict:
    return {"left": structure_to_json(pair.left), "right": structure_to_json(pair.right)}


def pair_from_json(data: dict) -> NamedPair:
    return NamedPair(
        left=structure_from_json(data["left"]), right=structure_from_json(data["right"])
    )


def save_pair(pair: NamedPair, path):
    Path(path).write_text(json.dumps(pair_to_json(pair), indent=2) + "\n")


def load_pair(path, check: bool = True) -> NamedPair:
    data = json.loads(Path(path).read_text())
    pair = pair_from_json(data)
    if check:
        for side, structure in (("left", pair.left), ("right", pair.right)):
            report = validate(structure)
            if not report.ok:
                report.notes.append(f"side: {side}")
                raise StructureValidationError(report)
    return pair
