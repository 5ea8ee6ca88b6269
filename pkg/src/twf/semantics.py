"""Brute-force model search for constrained workflows.

This module enumerates bounded executions directly from the model theory
and is deliberately naive: it serves as ground truth for the constraint
solver, the rewrite rules and the composition table, so it must not share
code paths with any of them.

An execution of a resolved (loop-free, choice-free) workflow assigns one
closed rational interval of positive length to every atom occurrence.  Only
the relative order of the endpoints matters for sequence conditions and
qualitative constraints, so the search enumerates weak orders of the
endpoints (orders with ties), maps order layers to the integer rationals
0, 1, 2, ... and checks the candidate:

  * every sequence node must finish its left part no later than the right
    part starts;
  * every network constraint whose two ends are executed must hold between
    the convex hulls of the ends' execution times; constraints touching an
    unexecuted branch of a choice are vacuously satisfied;
  * constraints between nodes inside a loop body are checked within each
    unrolled iteration independently, while the loop node itself spans all
    of its iterations.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence

from .allen import Interval, Relation, RelationSet, relation_between
from .qcn import Qcn
from .workflow import (
    Atomic,
    Path,
    Resolution,
    Seq,
    TracedAtom,
    Workflow,
    iter_nodes,
    resolutions,
    resolve_traced,
)

DEFAULT_ATOM_BUDGET = 7


class AtomBudgetError(RuntimeError):
    """The bounded search had to skip executions larger than the atom budget.

    Raised only when no model was found among the in-budget executions, so
    the caller cannot distinguish "unsatisfiable" from "too large".
    """


class NotExecutedError(ValueError):
    """The addressed subworkflow is not executed under the model's resolution."""


@dataclass(frozen=True)
class ResolvedInstance:
    """One execution shape of a workflow: a resolution plus its resolved tree."""

    source: Workflow
    resolution: Resolution
    workflow: Workflow
    atoms: tuple[TracedAtom, ...]


@dataclass(frozen=True)
class Model:
    """A witnessed execution: a resolved instance with concrete intervals."""

    instance: ResolvedInstance
    assignment: dict[int, Interval]

    @property
    def resolution(self) -> Resolution:
        return self.instance.resolution

    def atom_intervals(self) -> list[tuple[TracedAtom, Interval]]:
        return [(a, self.assignment[a.occ]) for a in self.instance.atoms]


def enumerate_instances(w: Workflow, unroll_bound: int) -> tuple[list[ResolvedInstance], bool]:
    """All resolved instances up to the loop bound, plus a boundedness flag."""
    enum = resolutions(w, unroll_bound)
    instances = []
    for resolution, _ in enum:
        tree, atoms = resolve_traced(w, resolution)
        instances.append(ResolvedInstance(w, resolution, tree, atoms))
    return instances, enum.bounded


# ---------------------------------------------------------------------------
# Execution times and hulls


def hull(intervals: Iterable[Interval]) -> Interval:
    """The smallest interval containing every interval of a non-empty union."""
    items = list(intervals)
    if not items:
        raise ValueError("hull of an empty union")
    return Interval(min(i.lo for i in items), max(i.hi for i in items))


def is_executed(instance: ResolvedInstance, node: Path) -> bool:
    """Does the resolution execute the source node at ``node``?"""
    choices = instance.resolution.choices
    for depth, step in enumerate(node):
        prefix = node[:depth]
        if prefix in choices and choices[prefix] != step:
            return False
    return True


def enclosing_loops(instance: ResolvedInstance, node: Path) -> tuple[Path, ...]:
    """Paths of the loop nodes whose bodies (strictly) contain ``node``."""
    unrolls = instance.resolution.unrolls
    return tuple(
        node[:depth]
        for depth, step in enumerate(node)
        if step == "B" and node[:depth] in unrolls
    )


def _atoms_under(
    instance: ResolvedInstance,
    node: Path,
    context: Mapping[Path, int],
) -> list[TracedAtom]:
    depth = len(node)
    out = []
    for a in instance.atoms:
        if a.source[:depth] != node:
            continue
        iters = dict(a.iterations)
        if all(iters.get(lp) == idx for lp, idx in context.items()):
            out.append(a)
    return out


def execution_times(
    model: Model,
    node: Path,
    context: Mapping[Path, int] | Sequence[tuple[Path, int]] = (),
) -> tuple[Interval, ...]:
    """The union of intervals during which the node executes.

    ``context`` may pin iteration indices of enclosing loops; without it,
    all iterations contribute.  Raises NotExecutedError when the node is
    not executed under the model's resolution.
    """
    ctx = dict(context)
    if not is_executed(model.instance, node):
        raise NotExecutedError(f"node at {node!r} is not executed")
    atoms = _atoms_under(model.instance, node, ctx)
    if not atoms:
        raise NotExecutedError(f"node at {node!r} has no execution in context {ctx!r}")
    return tuple(model.assignment[a.occ] for a in atoms)


# ---------------------------------------------------------------------------
# Model checking


def _subtree_occs(node: Workflow) -> list[int]:
    return [n.occ for _, n in iter_nodes(node) if isinstance(n, Atomic)]


def _sequence_conditions(resolved: Workflow) -> list[tuple[list[int], list[int]]]:
    """(left occs, right occs) for every sequence node of a resolved tree."""
    out = []
    for _, node in iter_nodes(resolved):
        if isinstance(node, Seq):
            out.append((_subtree_occs(node.left), _subtree_occs(node.right)))
    return out


def _iteration_contexts(
    instance: ResolvedInstance, loops: tuple[Path, ...]
) -> Iterator[dict[Path, int]]:
    if not loops:
        yield {}
        return
    unrolls = instance.resolution.unrolls
    counts = [unrolls[lp] for lp in loops]

    def rec(i: int, ctx: dict[Path, int]) -> Iterator[dict[Path, int]]:
        if i == len(loops):
            yield dict(ctx)
            return
        for idx in range(counts[i]):
            ctx[loops[i]] = idx
            yield from rec(i + 1, ctx)
        del ctx[loops[i]]

    yield from rec(0, {})


def _constraint_obligations(
    instance: ResolvedInstance,
    network: Qcn,
    var_paths: Mapping[str, Path],
) -> Optional[list[tuple[list[int], list[int], RelationSet]]]:
    """Hull obligations (left occs, right occs, allowed relations).

    Returns None when the network is already violated structurally (a
    degenerate diagonal on an executed node rules every model out).
    """
    obligations: list[tuple[list[int], list[int], RelationSet]] = []
    for name, rels in network.degenerate_diagonal():
        path = _require_path(var_paths, name)
        if is_executed(instance, path) and Relation.EQUALS not in rels:
            return None
    for vi, vj, rels in network.nontrivial_pairs():
        pi = _require_path(var_paths, vi)
        pj = _require_path(var_paths, vj)
        if not is_executed(instance, pi) or not is_executed(instance, pj):
            continue  # vacuous: an unchosen branch never runs
        loops_i = enclosing_loops(instance, pi)
        loops_j = enclosing_loops(instance, pj)
        if loops_i != loops_j:
            raise ValueError(
                f"constraint {vi}/{vj} crosses a loop boundary; validate the workflow first"
            )
        for ctx in _iteration_contexts(instance, loops_i):
            occs_i = [a.occ for a in _atoms_under(instance, pi, ctx)]
            occs_j = [a.occ for a in _atoms_under(instance, pj, ctx)]
            if not occs_i or not occs_j:
                continue
            obligations.append((occs_i, occs_j, rels))
    return obligations


def _require_path(var_paths: Mapping[str, Path], name: str) -> Path:
    try:
        return var_paths[name]
    except KeyError:
        raise ValueError(f"network variable {name!r} is not mapped to a subworkflow") from None


def check_model(
    instance: ResolvedInstance,
    assignment: Mapping[int, Interval],
    network: Qcn | None = None,
    var_paths: Mapping[str, Path] | None = None,
) -> bool:
    """Is the assignment a model of the resolved instance plus network?

    Checks every sequence condition of the resolved tree and every hull
    constraint obligation of the network (per iteration for in-loop
    constraints).  Missing assignment entries raise KeyError.
    """
    for a in instance.atoms:
        if a.occ not in assignment:
            raise KeyError(f"assignment misses atom occurrence {a.occ} ({a.name})")
    for left, right in _sequence_conditions(instance.workflow):
        left_end = max(assignment[occ].hi for occ in left)
        right_start = min(assignment[occ].lo for occ in right)
        if not left_end <= right_start:
            return False
    if network is None:
        return True
    obligations = _constraint_obligations(instance, network, var_paths or {})
    if obligations is None:
        return False
    for occs_i, occs_j, rels in obligations:
        hull_i = hull(assignment[o] for o in occs_i)
        hull_j = hull(assignment[o] for o in occs_j)
        if relation_between(hull_i, hull_j) not in rels:
            return False
    return True


# ---------------------------------------------------------------------------
# Weak-order enumeration

# A pruning check sees (layers, placed_mask, next_depth) after every layer
# and answers: -1 the branch is dead, 0 undecided, 1 satisfied for good.
Check = Callable[[list[int], int, int], int]


def weak_orders(
    atom_count: int,
    le_pairs: Sequence[tuple[int, int]] = (),
    checks: Sequence[Check] = (),
) -> Iterator[tuple[int, ...]]:
    """All weak orders of the 2m atom endpoints, as layer assignments.

    Endpoint 2a is the start of atom a and endpoint 2a+1 its end; a start
    always lies strictly before its end.  ``le_pairs`` (x, y) additionally
    force layer[x] <= layer[y].  ``checks`` prune branches early (see
    Check above); a complete assignment is only yielded once every check
    returned 1.  Enumeration order is deterministic.
    """
    n = 2 * atom_count
    if n == 0:
        if all(check([], 0, 0) == 1 for check in checks):
            yield ()
        return
    full = (1 << n) - 1
    preds = [0] * n
    for x, y in le_pairs:
        preds[y] |= 1 << x
    layers = [0] * n

    def rec(remaining: int, depth: int, pending: list[Check]) -> Iterator[tuple[int, ...]]:
        if remaining == 0:
            if not pending:
                yield tuple(layers)
            return
        allowed = 0
        rem = remaining
        while rem:
            bit = rem & -rem
            e = bit.bit_length() - 1
            if e % 2 == 0 or not (remaining >> (e - 1)) & 1:
                allowed |= bit
            rem ^= bit
        sub = allowed
        while sub:
            rest = remaining & ~sub
            chosen, valid = sub, True
            while chosen:
                bit = chosen & -chosen
                if preds[bit.bit_length() - 1] & rest:
                    valid = False
                    break
                chosen ^= bit
            if valid:
                chosen = sub
                while chosen:
                    bit = chosen & -chosen
                    layers[bit.bit_length() - 1] = depth
                    chosen ^= bit
                placed = full & ~rest
                still: list[Check] = []
                for check in pending:
                    verdict = check(layers, placed, depth + 1)
                    if verdict < 0:
                        valid = False
                        break
                    if verdict == 0:
                        still.append(check)
                if valid:
                    yield from rec(rest, depth + 1, still)
            sub = (sub - 1) & allowed

    yield from rec(full, 0, list(checks))


def _int_relation(lo1: int, hi1: int, lo2: int, hi2: int) -> Relation:
    # relation_between on raw layer indices, for use during the search
    if hi1 < lo2:
        return Relation.BEFORE
    if hi2 < lo1:
        return Relation.AFTER
    if hi1 == lo2:
        return Relation.MEETS
    if hi2 == lo1:
        return Relation.MET_BY
    if lo1 == lo2:
        if hi1 == hi2:
            return Relation.EQUALS
        return Relation.STARTS if hi1 < hi2 else Relation.STARTED_BY
    if lo1 < lo2:
        if hi1 == hi2:
            return Relation.FINISHED_BY
        return Relation.CONTAINS if hi1 > hi2 else Relation.OVERLAPS
    if hi1 == hi2:
        return Relation.FINISHES
    return Relation.DURING if hi1 < hi2 else Relation.OVERLAPPED_BY


def _relation_signs() -> dict[Relation, tuple[int, int, int, int]]:
    # Each relation corresponds to one sign pattern of the comparisons
    # (lo1?lo2, hi1?hi2, hi1?lo2, lo1?hi2); derive the mapping once.
    signs: dict[Relation, tuple[int, int, int, int]] = {}

    def cmp(a: int, b: int) -> int:
        return (a > b) - (a < b)

    for lo1 in range(4):
        for hi1 in range(lo1 + 1, 4):
            for lo2 in range(4):
                for hi2 in range(lo2 + 1, 4):
                    rel = _int_relation(lo1, hi1, lo2, hi2)
                    signs[rel] = (cmp(lo1, lo2), cmp(hi1, hi2), cmp(hi1, lo2), cmp(lo1, hi2))
    return signs


_SIGNS = _relation_signs()


def _comparison_possible(sign: int, a: tuple[int, bool], b: tuple[int, bool]) -> bool:
    """Can endpoints a and b still realize the required comparison sign?

    Each endpoint is (value, exact); inexact values are lower bounds that
    future layers can exceed arbitrarily.
    """
    va, ea = a
    vb, eb = b
    if ea and eb:
        return ((va > vb) - (va < vb)) == sign
    if sign == 0:
        if ea:
            return va >= vb
        if eb:
            return vb >= va
        return True
    if sign < 0:  # need a < b
        if eb and not ea:
            return va < vb
        return True
    if ea and not eb:  # need a > b
        return vb < va
    return True


# ---------------------------------------------------------------------------
# Model search


def _search_plan(
    instance: ResolvedInstance,
    network: Qcn | None,
    var_paths: Mapping[str, Path],
) -> Optional[tuple[list[tuple[int, int]], list[Check]]]:
    """Sequence orderings and constraint checks for one instance, or None
    when the instance cannot have any model."""
    occ_index = {a.occ: i for i, a in enumerate(instance.atoms)}
    le_pairs: list[tuple[int, int]] = []
    for left, right in _sequence_conditions(instance.workflow):
        for lo in left:
            for ro in right:
                le_pairs.append((2 * occ_index[lo] + 1, 2 * occ_index[ro]))
    checks: list[Check] = []
    if network is not None:
        obligations = _constraint_obligations(instance, network, var_paths)
        if obligations is None:
            return None
        for occs_i, occs_j, rels in obligations:
            ai = [occ_index[o] for o in occs_i]
            aj = [occ_index[o] for o in occs_j]
            checks.append(_hull_relation_check(ai, aj, rels))
    return le_pairs, checks


def _hull_relation_check(ai: list[int], aj: list[int], rels: RelationSet) -> Check:
    """A pruning check: the hulls over two atom sets must relate within rels.

    Hull starts become exact as soon as one start is placed (later layers
    are larger); hull ends stay lower-bounded until every end is placed.
    A branch dies once no allowed relation can still be realized.
    """
    los_i = [2 * a for a in ai]
    his_i = [2 * a + 1 for a in ai]
    los_j = [2 * a for a in aj]
    his_j = [2 * a + 1 for a in aj]
    allowed = [(_SIGNS[r], r) for r in rels]

    def endpoint_min(points: list[int], layers: list[int], placed: int, bound: int) -> tuple[int, bool]:
        values = [layers[e] for e in points if placed >> e & 1]
        if values:
            return min(values), True
        return bound, False

    def endpoint_max(points: list[int], layers: list[int], placed: int, bound: int) -> tuple[int, bool]:
        if all(placed >> e & 1 for e in points):
            return max(layers[e] for e in points), True
        return bound, False

    def check(layers: list[int], placed: int, bound: int) -> int:
        l1 = endpoint_min(los_i, layers, placed, bound)
        h1 = endpoint_max(his_i, layers, placed, bound)
        l2 = endpoint_min(los_j, layers, placed, bound)
        h2 = endpoint_max(his_j, layers, placed, bound)
        if l1[1] and h1[1] and l2[1] and h2[1]:
            rel = _int_relation(l1[0], h1[0], l2[0], h2[0])
            return 1 if any(rel is r for _, r in allowed) else -1
        for signs, _ in allowed:
            if (
                _comparison_possible(signs[0], l1, l2)
                and _comparison_possible(signs[1], h1, h2)
                and _comparison_possible(signs[2], h1, l2)
                and _comparison_possible(signs[3], l1, h2)
            ):
                return 0
        return -1

    return check


def find_model(
    w: Workflow,
    network: Qcn | None = None,
    var_paths: Mapping[str, Path] | None = None,
    *,
    unroll_bound: int = 3,
    atom_budget: int = DEFAULT_ATOM_BUDGET,
) -> Optional[Model]:
    """First bounded model of the constrained workflow, if any.

    Iterates resolutions up to the loop bound, enumerates endpoint weak
    orders for each, and returns the first candidate that passes
    check_model.  Executions with more atoms than ``atom_budget`` are
    skipped; if nothing was found and something was skipped, the verdict
    is indeterminate and AtomBudgetError is raised instead of None.
    """
    if unroll_bound < 1:
        raise ValueError(f"loop bound must be >= 1, got {unroll_bound}")
    var_paths = var_paths or {}
    instances, _ = enumerate_instances(w, unroll_bound)
    skipped = False
    for instance in instances:
        if len(instance.atoms) > atom_budget:
            skipped = True
            continue
        plan = _search_plan(instance, network, var_paths)
        if plan is None:
            continue
        le_pairs, checks = plan
        for layers in weak_orders(len(instance.atoms), le_pairs, checks):
            assignment = {
                a.occ: Interval(Fraction(layers[2 * i]), Fraction(layers[2 * i + 1]))
                for i, a in enumerate(instance.atoms)
            }
            if check_model(instance, assignment, network, var_paths):
                return Model(instance, assignment)
            raise RuntimeError("search produced a candidate that fails verification")
    if skipped:
        raise AtomBudgetError(
            f"no model within the atom budget ({atom_budget}); larger executions were skipped"
        )
    return None


# ---------------------------------------------------------------------------
# Network-level brute force (independent cross-check of the solver)


def _network_checks(n: Qcn) -> Optional[list[Check]]:
    for _, rels in n.degenerate_diagonal():
        if Relation.EQUALS not in rels:
            return None
    checks: list[Check] = []
    count = len(n.variables)
    for i in range(count):
        for j in range(i + 1, count):
            rels = n.constraints[i][j]
            if not rels.is_universal:
                checks.append(_hull_relation_check([i], [j], rels))
    return checks


def network_models_bruteforce(n: Qcn) -> Iterator[dict[str, Interval]]:
    """Solutions of a constraint network, straight from endpoint orders.

    Enumerates weak orders of the 2|V| interval endpoints and keeps those
    satisfying every constraint; never touches composition tables or path
    consistency, so it can arbitrate for the solver.
    """
    checks = _network_checks(n)
    if checks is None:
        return
    for layers in weak_orders(len(n.variables), (), checks):
        yield {
            name: Interval(Fraction(layers[2 * i]), Fraction(layers[2 * i + 1]))
            for i, name in enumerate(n.variables)
        }


def network_consistent_bruteforce(n: Qcn) -> bool:
    return next(network_models_bruteforce(n), None) is not None


def network_scenario_relations_bruteforce(n: Qcn) -> dict[tuple[str, str], RelationSet]:
    """Per-edge union of relations over every solution of the network."""
    count = len(n.variables)
    union = {(i, j): 0 for i in range(count) for j in range(i + 1, count)}
    checks = _network_checks(n)
    if checks is not None:
        for layers in weak_orders(count, (), checks):
            for (i, j) in union:
                rel = _int_relation(
                    layers[2 * i], layers[2 * i + 1], layers[2 * j], layers[2 * j + 1]
                )
                union[(i, j)] |= rel.bit
    return {
        (n.variables[i], n.variables[j]): RelationSet(bits)
        for (i, j), bits in union.items()
    }
