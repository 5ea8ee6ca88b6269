"""Qualitative constraint networks over interval variables.

A network holds a square matrix of relation sets kept converse-coherent at
all times.  Path consistency refines it; consistency and scenario search
run a backtracking solver pruned by path consistency, and every scenario
found is realized as a concrete rational schedule before being reported.
Entailment enumerates realizable scenarios exhaustively, which is
exponential and intended for desk-scale networks.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping

from .allen import (
    EMPTY,
    RELATIONS,
    UNIVERSAL,
    Interval,
    Relation,
    RelationSet,
    compose_sets,
    relation_between,
)


class UnknownVariableError(KeyError):
    """A constraint refers to a variable that is not in the network."""


class VariableSetError(ValueError):
    """Entailment requires the entailed network's variables to be a subset."""


class UnrealizableScenarioError(ValueError):
    """An atomic scenario admits no concrete schedule."""


Schedule = dict[str, Interval]


@dataclass(frozen=True)
class Qcn:
    """A qualitative constraint network (variables, constraint matrix).

    Diagonal entries are {eq}; off-diagonal entries default to the
    universal set; the matrix always satisfies C[j][i] = inverse(C[i][j]).
    """

    variables: tuple[str, ...]
    constraints: tuple[tuple[RelationSet, ...], ...]

    @classmethod
    def universal(cls, variables: tuple[str, ...] | list[str] = ()) -> "Qcn":
        names = tuple(variables)
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable names")
        eq = RelationSet.of(Relation.EQUALS)
        n = len(names)
        matrix = tuple(
            tuple(eq if i == j else UNIVERSAL for j in range(n)) for i in range(n)
        )
        return cls(names, matrix)

    def index(self, variable: str) -> int:
        try:
            return self.variables.index(variable)
        except ValueError:
            raise UnknownVariableError(variable) from None

    def get(self, vi: str, vj: str) -> RelationSet:
        return self.constraints[self.index(vi)][self.index(vj)]

    def with_variable(self, name: str) -> "Qcn":
        if name in self.variables:
            return self
        return Qcn.universal(self.variables + (name,))._merge(self)

    def _merge(self, other: "Qcn") -> "Qcn":
        out = self
        for vi, vj, rels in other.nontrivial_pairs():
            out = out.set_constraint(vi, vj, rels)
        return out

    def set_constraint(self, vi: str, vj: str, rels: RelationSet) -> "Qcn":
        """Intersect ``rels`` into C[vi][vj] (and its converse into C[vj][vi]).

        A self-constraint intersects the {eq} diagonal; anything that rules
        out eq there leaves an empty entry, i.e. an inconsistent network.
        """
        i, j = self.index(vi), self.index(vj)
        rows = [list(row) for row in self.constraints]
        if i == j:
            rows[i][i] = rows[i][i] & rels
        else:
            rows[i][j] = rows[i][j] & rels
            rows[j][i] = rows[i][j].inverse()
        return Qcn(self.variables, tuple(tuple(row) for row in rows))

    def nontrivial_pairs(self) -> Iterator[tuple[str, str, RelationSet]]:
        """Upper-triangle entries that actually constrain something."""
        n = len(self.variables)
        for i in range(n):
            for j in range(i + 1, n):
                rels = self.constraints[i][j]
                if not rels.is_universal:
                    yield self.variables[i], self.variables[j], rels

    def degenerate_diagonal(self) -> Iterator[tuple[str, RelationSet]]:
        """Variables whose diagonal entry was constrained away from {eq}."""
        eq = RelationSet.of(Relation.EQUALS)
        for i, name in enumerate(self.variables):
            if self.constraints[i][i] != eq:
                yield name, self.constraints[i][i]

    @property
    def is_scenario(self) -> bool:
        n = len(self.variables)
        return all(
            self.constraints[i][j].is_singleton
            for i in range(n)
            for j in range(i + 1, n)
        )

    def __str__(self) -> str:
        parts = [f"{vi} {{{rels.tokens()}}} {vj}" for vi, vj, rels in self.nontrivial_pairs()]
        return f"Qcn({', '.join(self.variables)}; {'; '.join(parts)})"


Scenario = Qcn


# ---------------------------------------------------------------------------
# Path consistency


def _to_bits(n: Qcn) -> list[list[int]]:
    return [[rels.bits for rels in row] for row in n.constraints]


def _from_bits(variables: tuple[str, ...], bits: list[list[int]]) -> Qcn:
    return Qcn(
        variables,
        tuple(tuple(RelationSet(b) for b in row) for row in bits),
    )


def _compose_bits(b1: int, b2: int) -> int:
    return compose_sets(RelationSet(b1), RelationSet(b2)).bits


def _inverse_bits(bits: int) -> int:
    return RelationSet(bits).inverse().bits


def _pc_bits(m: list[list[int]]) -> bool:
    """Refine the matrix in place to its path-consistent fixpoint.

    Returns False as soon as an entry becomes empty.
    """
    n = len(m)
    if n < 3:
        return all(m[i][j] for i in range(n) for j in range(n))
    queue = deque((i, j) for i in range(n) for j in range(i + 1, n))
    queued = set(queue)
    while queue:
        i, j = queue.popleft()
        queued.discard((i, j))
        for k in range(n):
            if k == i or k == j:
                continue
            # (i,k) through j
            refined = m[i][k] & _compose_bits(m[i][j], m[j][k])
            if refined != m[i][k]:
                if not refined:
                    m[i][k] = m[k][i] = 0
                    return False
                m[i][k] = refined
                m[k][i] = _inverse_bits(refined)
                edge = (min(i, k), max(i, k))
                if edge not in queued:
                    queued.add(edge)
                    queue.append(edge)
            # (k,j) through i
            refined = m[k][j] & _compose_bits(m[k][i], m[i][j])
            if refined != m[k][j]:
                if not refined:
                    m[k][j] = m[j][k] = 0
                    return False
                m[k][j] = refined
                m[j][k] = _inverse_bits(refined)
                edge = (min(k, j), max(k, j))
                if edge not in queued:
                    queued.add(edge)
                    queue.append(edge)
    return all(m[i][j] for i in range(n) for j in range(n))


def path_consistency(n: Qcn) -> tuple[Qcn, bool]:
    """Triangle-propagation fixpoint of the network.

    Returns the refined network and a flag: True while no entry became
    empty, False once an inconsistency surfaced.  Refinement only removes
    relations that cannot take part in any solution.
    """
    m = _to_bits(n)
    ok = _pc_bits(m)
    return _from_bits(n.variables, m), ok


# ---------------------------------------------------------------------------
# Scenario search


def scenarios(n: Qcn) -> Iterator[Qcn]:
    """All realizable atomic scenarios of the network.

    Backtracking over basic-relation choices edge by edge, path consistency
    after every assignment, candidate scenarios re-verified by schedule
    construction before being yielded.  The empty network has exactly one
    (empty) scenario.
    """
    m = _to_bits(n)
    if not _pc_bits(m):
        return
    count = len(n.variables)

    def search(matrix: list[list[int]]) -> Iterator[list[list[int]]]:
        best = None
        best_size = 14
        for i in range(count):
            for j in range(i + 1, count):
                size = matrix[i][j].bit_count()
                if 1 < size < best_size:
                    best, best_size = (i, j), size
        if best is None:
            yield matrix
            return
        i, j = best
        for rel in RELATIONS:
            if not matrix[i][j] & rel.bit:
                continue
            trial = [row[:] for row in matrix]
            trial[i][j] = rel.bit
            trial[j][i] = rel.inverse.bit
            if _pc_bits(trial):
                yield from search(trial)

    for solved in search(m):
        scenario = _from_bits(n.variables, solved)
        try:
            realize_scenario(scenario)
        except UnrealizableScenarioError:  # pragma: no cover - PC is complete on atoms
            continue
        yield scenario


def is_consistent(n: Qcn) -> bool:
    """Does at least one realizable scenario exist?"""
    return next(scenarios(n), None) is not None


# ---------------------------------------------------------------------------
# Realization


# Endpoint facts implied by each basic relation between intervals i and j.
# Endpoints are (variable, 0) for the start and (variable, 1) for the end.
_RELATION_FACTS: dict[Relation, tuple[tuple[tuple[int, int], str, tuple[int, int]], ...]] = {
    Relation.BEFORE: (((0, 1), "<", (1, 0)),),
    Relation.MEETS: (((0, 1), "=", (1, 0)),),
    Relation.OVERLAPS: (((0, 0), "<", (1, 0)), ((1, 0), "<", (0, 1)), ((0, 1), "<", (1, 1))),
    Relation.STARTS: (((0, 0), "=", (1, 0)), ((0, 1), "<", (1, 1))),
    Relation.DURING: (((1, 0), "<", (0, 0)), ((0, 1), "<", (1, 1))),
    Relation.FINISHES: (((1, 0), "<", (0, 0)), ((0, 1), "=", (1, 1))),
    Relation.EQUALS: (((0, 0), "=", (1, 0)), ((0, 1), "=", (1, 1))),
}


def _endpoint_facts(rel: Relation):
    """(a_endpoint, op, b_endpoint) facts for i rel j, with 0 = i and 1 = j."""
    if rel in _RELATION_FACTS:
        return _RELATION_FACTS[rel]
    swapped = _RELATION_FACTS[rel.inverse]
    return tuple(
        ((1 - ia, pa), op, (1 - ib, pb)) for (ia, pa), op, ((ib, pb)) in swapped
    )


def realize_scenario(s: Qcn) -> Schedule:
    """A concrete rational schedule witnessing an atomic scenario.

    Builds the endpoint order graph implied by every singleton relation,
    layers it topologically, assigns consecutive integer rationals to the
    layers, and re-checks every constraint on the result.
    """
    if not s.is_scenario:
        raise ValueError("network is not an atomic scenario")
    count = len(s.variables)
    points = [(v, side) for v in range(count) for side in (0, 1)]
    parent = {p: p for p in points}

    def find(p):
        while parent[p] != p:
            parent[p] = parent[parent[p]]
            p = parent[p]
        return p

    def union(p, q):
        parent[find(p)] = find(q)

    strict: list[tuple[tuple[int, int], tuple[int, int]]] = [
        ((v, 0), (v, 1)) for v in range(count)
    ]
    for i in range(count):
        for j in range(i + 1, count):
            rel = s.constraints[i][j].single()
            for (va, pa), op, (vb, pb) in _endpoint_facts(rel):
                a = (i if va == 0 else j, pa)
                b = (i if vb == 0 else j, pb)
                if op == "=":
                    union(a, b)
                else:
                    strict.append((a, b))

    edges: dict[tuple[int, int], set[tuple[int, int]]] = {}
    indegree: dict[tuple[int, int], int] = {find(p): 0 for p in points}
    for a, b in strict:
        ra, rb = find(a), find(b)
        if ra == rb:
            raise UnrealizableScenarioError(f"endpoint cycle through {a} and {b}")
        if rb not in edges.setdefault(ra, set()):
            edges[ra].add(rb)
            indegree[rb] += 1

    layer = {node: 0 for node in indegree}
    ready = deque(node for node, deg in indegree.items() if deg == 0)
    seen = 0
    while ready:
        node = ready.popleft()
        seen += 1
        for succ in edges.get(node, ()):
            layer[succ] = max(layer[succ], layer[node] + 1)
            indegree[succ] -= 1
            if indegree[succ] == 0:
                ready.append(succ)
    if seen != len(indegree):
        raise UnrealizableScenarioError("cyclic endpoint ordering")

    schedule: Schedule = {}
    for v, name in enumerate(s.variables):
        lo = Fraction(layer[find((v, 0))])
        hi = Fraction(layer[find((v, 1))])
        schedule[name] = Interval(lo, hi)

    for i in range(count):
        for j in range(i + 1, count):
            want = s.constraints[i][j].single()
            got = relation_between(schedule[s.variables[i]], schedule[s.variables[j]])
            if got is not want:
                raise UnrealizableScenarioError(
                    f"{s.variables[i]} {got.token} {s.variables[j]}, scenario wants {want.token}"
                )
    return schedule


def check_schedule(n: Qcn, schedule: Mapping[str, Interval]) -> bool:
    """Does a schedule satisfy every constraint of the network?"""
    for vi, vj, rels in n.nontrivial_pairs():
        if relation_between(schedule[vi], schedule[vj]) not in rels:
            return False
    return True


# ---------------------------------------------------------------------------
# Entailment


def entails(n1: Qcn, n2: Qcn) -> bool:
    """Is every model of n1 a model of n2?

    Exact via exhaustive scenario enumeration of n1 (exponential; meant for
    desk-scale networks).  n2's variables must all occur in n1.
    """
    missing = set(n2.variables) - set(n1.variables)
    if missing:
        raise VariableSetError(f"variables not in the entailing network: {sorted(missing)}")
    wanted = list(n2.nontrivial_pairs())
    if not wanted:
        return True
    for scenario in scenarios(n1):
        for vi, vj, rels in wanted:
            if scenario.get(vi, vj).single() not in rels:
                return False
    return True
