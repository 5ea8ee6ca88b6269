"""The thirteen basic interval relations, relation sets and composition.

Relations are defined through endpoint comparisons over exact rationals:
two proper intervals always stand in exactly one basic relation, relation
sets are 13-bit masks, and composition is a table lookup.  The shipped
table is a frozen constant; :func:`generate_composition_table` re-derives
it from scratch by enumerating small integer interval configurations, and
the test suite asserts the two agree bit for bit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Union

RationalLike = Union[int, str, Fraction]


class Relation(enum.Enum):
    """One of the 13 basic relations between two proper intervals."""

    BEFORE = "b"
    AFTER = "bi"
    MEETS = "m"
    MET_BY = "mi"
    OVERLAPS = "o"
    OVERLAPPED_BY = "oi"
    STARTS = "s"
    STARTED_BY = "si"
    DURING = "d"
    CONTAINS = "di"
    FINISHES = "f"
    FINISHED_BY = "fi"
    EQUALS = "eq"

    @property
    def token(self) -> str:
        return self.value

    @property
    def bit(self) -> int:
        return 1 << _INDEX[self]

    @property
    def inverse(self) -> "Relation":
        return _INVERSE[self]

    @classmethod
    def from_token(cls, token: str) -> "Relation":
        try:
            return _BY_TOKEN[token]
        except KeyError:
            raise ValueError(f"unknown relation token {token!r}") from None

    def __repr__(self) -> str:
        return f"Relation.{self.name}"


RELATIONS: tuple[Relation, ...] = tuple(Relation)
_INDEX = {r: i for i, r in enumerate(RELATIONS)}
_BY_TOKEN = {r.value: r for r in RELATIONS}
_ALL_BITS = (1 << len(RELATIONS)) - 1

_INVERSE = {
    Relation.BEFORE: Relation.AFTER,
    Relation.AFTER: Relation.BEFORE,
    Relation.MEETS: Relation.MET_BY,
    Relation.MET_BY: Relation.MEETS,
    Relation.OVERLAPS: Relation.OVERLAPPED_BY,
    Relation.OVERLAPPED_BY: Relation.OVERLAPS,
    Relation.STARTS: Relation.STARTED_BY,
    Relation.STARTED_BY: Relation.STARTS,
    Relation.DURING: Relation.CONTAINS,
    Relation.CONTAINS: Relation.DURING,
    Relation.FINISHES: Relation.FINISHED_BY,
    Relation.FINISHED_BY: Relation.FINISHES,
    Relation.EQUALS: Relation.EQUALS,
}


@dataclass(frozen=True)
class RelationSet:
    """A subset of the 13 basic relations stored as a fixed-width bit mask.

    The universal set stands for "no information"; the empty set marks an
    inconsistent constraint.
    """

    bits: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.bits <= _ALL_BITS:
            raise ValueError(f"relation mask out of range: {self.bits:#x}")

    @classmethod
    def of(cls, *relations: Relation) -> "RelationSet":
        bits = 0
        for r in relations:
            bits |= r.bit
        return cls(bits)

    @classmethod
    def parse(cls, text: str) -> "RelationSet":
        """Build a set from whitespace- or comma-separated relation tokens."""
        bits = 0
        for token in text.replace(",", " ").split():
            bits |= Relation.from_token(token).bit
        return cls(bits)

    def __contains__(self, r: Relation) -> bool:
        return bool(self.bits & r.bit)

    def __iter__(self) -> Iterator[Relation]:
        for r in RELATIONS:
            if self.bits & r.bit:
                yield r

    def __len__(self) -> int:
        return self.bits.bit_count()

    def __bool__(self) -> bool:
        return self.bits != 0

    def __or__(self, other: "RelationSet") -> "RelationSet":
        return RelationSet(self.bits | other.bits)

    def __and__(self, other: "RelationSet") -> "RelationSet":
        return RelationSet(self.bits & other.bits)

    def __sub__(self, other: "RelationSet") -> "RelationSet":
        return RelationSet(self.bits & ~other.bits)

    @property
    def is_universal(self) -> bool:
        return self.bits == _ALL_BITS

    @property
    def is_singleton(self) -> bool:
        return self.bits.bit_count() == 1

    def single(self) -> Relation:
        if not self.is_singleton:
            raise ValueError(f"not a singleton relation set: {self.tokens()}")
        return RELATIONS[self.bits.bit_length() - 1]

    def inverse(self) -> "RelationSet":
        bits = 0
        for r in self:
            bits |= r.inverse.bit
        return RelationSet(bits)

    def tokens(self) -> str:
        return " ".join(r.token for r in self)

    def __repr__(self) -> str:
        return f"RelationSet.parse({self.tokens()!r})"


EMPTY = RelationSet(0)
UNIVERSAL = RelationSet(_ALL_BITS)


@dataclass(frozen=True)
class Interval:
    """A closed rational interval with strictly positive length."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self) -> None:
        if not isinstance(self.lo, Fraction) or not isinstance(self.hi, Fraction):
            raise TypeError("interval endpoints must be Fraction")
        if not self.lo < self.hi:
            raise ValueError(f"degenerate interval [{self.lo}, {self.hi}]")

    def __str__(self) -> str:
        return f"[{self.lo}, {self.hi}]"


def interval(lo: RationalLike, hi: RationalLike) -> Interval:
    """Convenience constructor coercing endpoints to exact rationals."""
    return Interval(Fraction(lo), Fraction(hi))


def relation_between(i: Interval, j: Interval) -> Relation:
    """The unique basic relation holding between two proper intervals."""
    if i.hi < j.lo:
        return Relation.BEFORE
    if j.hi < i.lo:
        return Relation.AFTER
    if i.hi == j.lo:
        return Relation.MEETS
    if j.hi == i.lo:
        return Relation.MET_BY
    if i.lo == j.lo:
        if i.hi == j.hi:
            return Relation.EQUALS
        return Relation.STARTS if i.hi < j.hi else Relation.STARTED_BY
    if i.lo < j.lo:
        if i.hi == j.hi:
            return Relation.FINISHED_BY
        return Relation.CONTAINS if i.hi > j.hi else Relation.OVERLAPS
    if i.hi == j.hi:
        return Relation.FINISHES
    return Relation.DURING if i.hi < j.hi else Relation.OVERLAPPED_BY


def inverse(r: Relation) -> Relation:
    return r.inverse


def inverse_set(rels: RelationSet) -> RelationSet:
    return rels.inverse()


def generate_composition_table() -> dict[tuple[Relation, Relation], RelationSet]:
    """Derive the 13x13 composition table by brute-force enumeration.

    Six endpoints need at most six distinct values, so integer coordinates
    0..8 realize every order type of three intervals.  Every interval
    triple on that grid contributes its (i,j)/(j,k)/(i,k) relations, which
    both populates each entry and witnesses each of its members.
    """
    grid = [interval(a, b) for a in range(9) for b in range(a + 1, 9)]
    n = len(grid)
    rel = [[relation_between(grid[x], grid[y]) for y in range(n)] for x in range(n)]
    bits: dict[tuple[Relation, Relation], int] = {
        (r, s): 0 for r in RELATIONS for s in RELATIONS
    }
    for x in range(n):
        rel_x = rel[x]
        for y in range(n):
            r = rel_x[y]
            rel_y = rel[y]
            for z in range(n):
                bits[(r, rel_y[z])] |= rel_x[z].bit
    return {key: RelationSet(b) for key, b in bits.items()}


# Frozen composition table, derived once via generate_composition_table()
# and kept in sync by the test suite.  Rows are the left operand; "*" is
# the universal set.
_COMPOSITION_ROWS: dict[str, dict[str, str]] = {
    "b": {"b": "b", "bi": "*", "m": "b", "mi": "b m o s d", "o": "b", "oi": "b m o s d", "s": "b", "si": "b", "d": "b m o s d", "di": "b", "f": "b m o s d", "fi": "b", "eq": "b"},
    "bi": {"b": "*", "bi": "bi", "m": "bi mi oi d f", "mi": "bi", "o": "bi mi oi d f", "oi": "bi", "s": "bi mi oi d f", "si": "bi", "d": "bi mi oi d f", "di": "bi", "f": "bi", "fi": "bi", "eq": "bi"},
    "m": {"b": "b", "bi": "bi mi oi si di", "m": "b", "mi": "f fi eq", "o": "b", "oi": "o s d", "s": "m", "si": "m", "d": "o s d", "di": "b", "f": "o s d", "fi": "b", "eq": "m"},
    "mi": {"b": "b m o di fi", "bi": "bi", "m": "s si eq", "mi": "bi", "o": "oi d f", "oi": "bi", "s": "oi d f", "si": "bi", "d": "oi d f", "di": "bi", "f": "mi", "fi": "mi", "eq": "mi"},
    "o": {"b": "b", "bi": "bi mi oi si di", "m": "b", "mi": "oi si di", "o": "b m o", "oi": "o oi s si d di f fi eq", "s": "o", "si": "o di fi", "d": "o s d", "di": "b m o di fi", "f": "o s d", "fi": "b m o", "eq": "o"},
    "oi": {"b": "b m o di fi", "bi": "bi", "m": "o di fi", "mi": "bi", "o": "o oi s si d di f fi eq", "oi": "bi mi oi", "s": "oi d f", "si": "bi mi oi", "d": "oi d f", "di": "bi mi oi si di", "f": "oi", "fi": "oi si di", "eq": "oi"},
    "s": {"b": "b", "bi": "bi", "m": "b", "mi": "mi", "o": "b m o", "oi": "oi d f", "s": "s", "si": "s si eq", "d": "d", "di": "b m o di fi", "f": "d", "fi": "b m o", "eq": "s"},
    "si": {"b": "b m o di fi", "bi": "bi", "m": "o di fi", "mi": "mi", "o": "o di fi", "oi": "oi", "s": "s si eq", "si": "si", "d": "oi d f", "di": "di", "f": "oi", "fi": "di", "eq": "si"},
    "d": {"b": "b", "bi": "bi", "m": "b", "mi": "bi", "o": "b m o s d", "oi": "bi mi oi d f", "s": "d", "si": "bi mi oi d f", "d": "d", "di": "*", "f": "d", "fi": "b m o s d", "eq": "d"},
    "di": {"b": "b m o di fi", "bi": "bi mi oi si di", "m": "o di fi", "mi": "oi si di", "o": "o di fi", "oi": "oi si di", "s": "o di fi", "si": "di", "d": "o oi s si d di f fi eq", "di": "di", "f": "oi si di", "fi": "di", "eq": "di"},
    "f": {"b": "b", "bi": "bi", "m": "m", "mi": "bi", "o": "o s d", "oi": "bi mi oi", "s": "d", "si": "bi mi oi", "d": "d", "di": "bi mi oi si di", "f": "f", "fi": "f fi eq", "eq": "f"},
    "fi": {"b": "b", "bi": "bi mi oi si di", "m": "m", "mi": "oi si di", "o": "o", "oi": "oi si di", "s": "o", "si": "di", "d": "o s d", "di": "di", "f": "f fi eq", "fi": "fi", "eq": "fi"},
    "eq": {"b": "b", "bi": "bi", "m": "m", "mi": "mi", "o": "o", "oi": "oi", "s": "s", "si": "si", "d": "d", "di": "di", "f": "f", "fi": "fi", "eq": "eq"},
}


def _build_compose_matrix() -> list[list[RelationSet]]:
    matrix = [[EMPTY] * len(RELATIONS) for _ in RELATIONS]
    for r_token, row in _COMPOSITION_ROWS.items():
        r = Relation.from_token(r_token)
        for s_token, entry in row.items():
            s = Relation.from_token(s_token)
            rels = UNIVERSAL if entry == "*" else RelationSet.parse(entry)
            matrix[_INDEX[r]][_INDEX[s]] = rels
    return matrix


_COMPOSE: list[list[RelationSet]] = _build_compose_matrix()


def compose(r: Relation, s: Relation) -> RelationSet:
    """Composition of two basic relations, from the frozen table."""
    return _COMPOSE[_INDEX[r]][_INDEX[s]]


def compose_sets(rels1: RelationSet, rels2: RelationSet) -> RelationSet:
    """Union of the pairwise compositions of two relation sets."""
    key = (rels1.bits, rels2.bits)
    cached = _COMPOSE_SETS_CACHE.get(key)
    if cached is not None:
        return cached
    bits = 0
    for r in rels1:
        row = _COMPOSE[_INDEX[r]]
        for s in rels2:
            bits |= row[_INDEX[s]].bits
            if bits == _ALL_BITS:
                break
        if bits == _ALL_BITS:
            break
    result = RelationSet(bits)
    if len(_COMPOSE_SETS_CACHE) < 65536:
        _COMPOSE_SETS_CACHE[key] = result
    return result


_COMPOSE_SETS_CACHE: dict[tuple[int, int], RelationSet] = {}
