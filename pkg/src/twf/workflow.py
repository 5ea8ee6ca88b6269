"""Workflow syntax trees and the rewrite layer.

A workflow is a finite tree built from atomic activities with four control
constructors: sequence, conjunction (parallel split/join), disjunction
(exclusive choice) and loop.  Occurrence identifiers keep repeated activity
names apart; node paths address subtrees for substitution and constraint
attachment.  The module also provides canonical normal forms (flattening,
sorting, idempotence) and a sound-but-incomplete syntactic subsumption
check implemented as a bounded rewrite search.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterator, Mapping, Optional, Union


@dataclass(frozen=True)
class Atomic:
    name: str
    occ: int = 0
    label: Optional[str] = None


@dataclass(frozen=True)
class Seq:
    left: "Workflow"
    right: "Workflow"
    label: Optional[str] = None


@dataclass(frozen=True)
class Conj:
    left: "Workflow"
    right: "Workflow"
    label: Optional[str] = None


@dataclass(frozen=True)
class Disj:
    left: "Workflow"
    right: "Workflow"
    label: Optional[str] = None


@dataclass(frozen=True)
class Loop:
    body: "Workflow"
    label: Optional[str] = None


Workflow = Union[Atomic, Seq, Conj, Disj, Loop]

# A path addresses a node: "L"/"R" step into a binary node, "B" into a loop.
Path = tuple[str, ...]


class PathError(ValueError):
    """A node path does not address an existing node."""


_occ_counter = itertools.count(1)


def fresh_occ() -> int:
    return next(_occ_counter)


# ---------------------------------------------------------------------------
# Construction helpers


def atom(name: str, label: Optional[str] = None) -> Atomic:
    return Atomic(name, fresh_occ(), label)


def seq(*parts: Workflow) -> Workflow:
    """Left-nested sequence of two or more workflows."""
    if not parts:
        raise ValueError("seq needs at least one part")
    out = parts[0]
    for part in parts[1:]:
        out = Seq(out, part)
    return out


def conj(*parts: Workflow) -> Workflow:
    """Right-nested conjunction (matches n-ary desugaring)."""
    if not parts:
        raise ValueError("conj needs at least one part")
    out = parts[-1]
    for part in reversed(parts[:-1]):
        out = Conj(part, out)
    return out


def disj(*parts: Workflow) -> Workflow:
    """Right-nested disjunction (matches n-ary desugaring)."""
    if not parts:
        raise ValueError("disj needs at least one part")
    out = parts[-1]
    for part in reversed(parts[:-1]):
        out = Disj(part, out)
    return out


def loop(body: Workflow, label: Optional[str] = None) -> Loop:
    return Loop(body, label)


# ---------------------------------------------------------------------------
# Traversal


def children(node: Workflow) -> tuple[tuple[str, Workflow], ...]:
    match node:
        case Atomic():
            return ()
        case Seq(left, right) | Conj(left, right) | Disj(left, right):
            return (("L", left), ("R", right))
        case Loop(body):
            return (("B", body),)
    raise TypeError(f"not a workflow node: {node!r}")


def iter_nodes(w: Workflow, prefix: Path = ()) -> Iterator[tuple[Path, Workflow]]:
    """Preorder traversal yielding (path, node) pairs."""
    yield prefix, w
    for step, child in children(w):
        yield from iter_nodes(child, prefix + (step,))


def node_at(w: Workflow, path: Path) -> Workflow:
    node = w
    for step in path:
        for s, child in children(node):
            if s == step:
                node = child
                break
        else:
            raise PathError(f"no node at path {path!r}")
    return node


def atoms(w: Workflow) -> list[tuple[Path, Atomic]]:
    return [(p, n) for p, n in iter_nodes(w) if isinstance(n, Atomic)]


def labels(w: Workflow) -> dict[str, Path]:
    """All node labels mapped to their paths; raises on duplicates."""
    out: dict[str, Path] = {}
    for path, node in iter_nodes(w):
        if node.label is not None:
            if node.label in out:
                raise ValueError(f"duplicate label {node.label!r}")
            out[node.label] = path
    return out


# ---------------------------------------------------------------------------
# Occurrence renaming, subworkflows, unrolling


def rename_occurrences(w: Workflow) -> Workflow:
    """Structurally identical tree with fresh occurrence ids on every atom."""
    match w:
        case Atomic(name, _, label):
            return Atomic(name, fresh_occ(), label)
        case Seq(left, right, label):
            return Seq(rename_occurrences(left), rename_occurrences(right), label)
        case Conj(left, right, label):
            return Conj(rename_occurrences(left), rename_occurrences(right), label)
        case Disj(left, right, label):
            return Disj(rename_occurrences(left), rename_occurrences(right), label)
        case Loop(body, label):
            return Loop(rename_occurrences(body), label)
    raise TypeError(f"not a workflow node: {w!r}")


def subworkflows(w: Workflow) -> frozenset[Workflow]:
    """The set of subworkflows of w, including w itself."""
    return proper_subworkflows(w) | {w}


def proper_subworkflows(w: Workflow) -> frozenset[Workflow]:
    """The set of subworkflows strictly below w, computed structurally."""
    match w:
        case Atomic():
            return frozenset()
        case Seq(left, right) | Conj(left, right) | Disj(left, right):
            return subworkflows(left) | subworkflows(right)
        case Loop(body):
            return subworkflows(body)
    raise TypeError(f"not a workflow node: {w!r}")


def unroll(w: Workflow, n: int) -> Workflow:
    """Left-nested sequence of n freshly renamed copies of w."""
    if n < 1:
        raise ValueError(f"unroll count must be >= 1, got {n}")
    out = rename_occurrences(w)
    for _ in range(n - 1):
        out = Seq(out, rename_occurrences(w))
    return out


# ---------------------------------------------------------------------------
# Resolutions: picking disjunction branches and loop iteration counts


@dataclass(frozen=True)
class Resolution:
    """One way of executing a workflow's choice points.

    ``choices`` assigns "L" or "R" to every disjunction node (by path);
    ``unrolls`` assigns an iteration count n >= 1 to every loop node.
    Choice points nested inside loop bodies are resolved uniformly across
    iterations.
    """

    choices: Mapping[Path, str]
    unrolls: Mapping[Path, int]


@dataclass(frozen=True)
class TracedAtom:
    """An atom of a resolved workflow with its origin in the source tree.

    ``iterations`` records, for each enclosing loop of the source atom,
    which unrolled iteration this copy belongs to.
    """

    occ: int
    name: str
    source: Path
    iterations: tuple[tuple[Path, int], ...]


@dataclass(frozen=True)
class ResolutionEnumeration:
    """All resolutions of a workflow up to a loop bound.

    ``bounded`` is True when the workflow contains loops, i.e. when further
    resolutions exist beyond the bound and the enumeration is incomplete.
    """

    entries: tuple[tuple[Resolution, Workflow], ...]
    bounded: bool

    def __iter__(self) -> Iterator[tuple[Resolution, Workflow]]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


def resolve_traced(w: Workflow, resolution: Resolution) -> tuple[Workflow, tuple[TracedAtom, ...]]:
    """Resolve every choice point of w, tracing atoms back to the source.

    The result is loop-free and disjunction-free; every produced atom
    carries a fresh occurrence id.
    """
    traced: list[TracedAtom] = []

    def go(node: Workflow, path: Path, iters: tuple[tuple[Path, int], ...]) -> Workflow:
        match node:
            case Atomic(name, _, label):
                occ = fresh_occ()
                traced.append(TracedAtom(occ, name, path, iters))
                return Atomic(name, occ, label)
            case Seq(left, right, label):
                return Seq(go(left, path + ("L",), iters), go(right, path + ("R",), iters), label)
            case Conj(left, right, label):
                return Conj(go(left, path + ("L",), iters), go(right, path + ("R",), iters), label)
            case Disj(left, right, _):
                step = resolution.choices[path]
                chosen = left if step == "L" else right
                return go(chosen, path + (step,), iters)
            case Loop(body, _):
                count = resolution.unrolls[path]
                out = go(body, path + ("B",), iters + ((path, 0),))
                for i in range(1, count):
                    out = Seq(out, go(body, path + ("B",), iters + ((path, i),)))
                return out
        raise TypeError(f"not a workflow node: {node!r}")

    return go(w, (), ()), tuple(traced)


def resolve(w: Workflow, resolution: Resolution) -> Workflow:
    """The loop-free, disjunction-free workflow selected by a resolution."""
    tree, _ = resolve_traced(w, resolution)
    return tree


def resolutions(w: Workflow, bound: int) -> ResolutionEnumeration:
    """Enumerate every combination of branch choices and loop counts in 1..bound."""
    if bound < 1:
        raise ValueError(f"loop bound must be >= 1, got {bound}")
    disj_paths = [p for p, n in iter_nodes(w) if isinstance(n, Disj)]
    loop_paths = [p for p, n in iter_nodes(w) if isinstance(n, Loop)]
    entries = []
    options = [("L", "R")] * len(disj_paths) + [tuple(range(1, bound + 1))] * len(loop_paths)
    for combo in itertools.product(*options):
        choices = dict(zip(disj_paths, combo[: len(disj_paths)]))
        unrolls = dict(zip(loop_paths, combo[len(disj_paths):]))
        resolution = Resolution(choices, unrolls)
        entries.append((resolution, resolve(w, resolution)))
    return ResolutionEnumeration(tuple(entries), bounded=bool(loop_paths))


# ---------------------------------------------------------------------------
# Normal form


def fingerprint(node: Workflow):
    """Structural identity ignoring occurrence ids; doubles as sort key."""
    match node:
        case Atomic(name, _, label):
            return ("a", name, label or "")
        case Seq(left, right, label):
            return ("s", fingerprint(left), fingerprint(right), label or "")
        case Conj(left, right, label):
            return ("c", fingerprint(left), fingerprint(right), label or "")
        case Disj(left, right, label):
            return ("d", fingerprint(left), fingerprint(right), label or "")
        case Loop(body, label):
            return ("l", fingerprint(body), label or "")
    raise TypeError(f"not a workflow node: {node!r}")


def _seq_chain(node: Workflow) -> list[Workflow]:
    # Collect a ->-chain through unlabeled sequence nodes.
    if isinstance(node, Seq) and node.label is None:
        return _seq_chain(node.left) + _seq_chain(node.right)
    return [node]


def _assoc_elements(node: Workflow, kind: type) -> list[Workflow]:
    # Flatten through unlabeled nodes of the same associative constructor.
    if isinstance(node, kind) and node.label is None:
        return _assoc_elements(node.left, kind) + _assoc_elements(node.right, kind)
    return [node]


def _rebuild_right(parts: list[Workflow], kind: type, label: Optional[str]) -> Workflow:
    out = parts[-1]
    for part in reversed(parts[:-1]):
        out = kind(part, out)
    if label is not None:
        out = replace(out, label=label)
    return out


def _norm(node: Workflow) -> Workflow:
    match node:
        case Atomic():
            return node
        case Seq(left, right, label):
            parts = _seq_chain(Seq(_norm(left), _norm(right)))
            out = parts[0]
            for part in parts[1:]:
                out = Seq(out, part)
            return replace(out, label=label) if label is not None else out
        case Conj(left, right, label):
            parts = _assoc_elements(Conj(_norm(left), _norm(right)), Conj)
            parts.sort(key=fingerprint)
            return _rebuild_right(parts, Conj, label)
        case Disj(left, right, label):
            parts = _assoc_elements(Disj(_norm(left), _norm(right)), Disj)
            seen = set()
            unique = []
            for part in parts:
                key = fingerprint(part)
                if key not in seen:
                    seen.add(key)
                    unique.append(part)
            unique.sort(key=fingerprint)
            if len(unique) == 1:
                single = unique[0]
                if label is None:
                    return single
                if single.label is None:
                    return replace(single, label=label)
                return Disj(single, single, label)
            return _rebuild_right(unique, Disj, label)
        case Loop(body, label):
            inner = _norm(body)
            while isinstance(inner, Loop) and (inner.label is None or label is None):
                if inner.label is not None:
                    label = inner.label
                inner = inner.body
                inner = _norm(inner)
            return Loop(inner, label)
    raise TypeError(f"not a workflow node: {node!r}")


def _renumber(node: Workflow, counter: Iterator[int]) -> Workflow:
    match node:
        case Atomic(name, _, label):
            return Atomic(name, next(counter), label)
        case Seq(left, right, label):
            return Seq(_renumber(left, counter), _renumber(right, counter), label)
        case Conj(left, right, label):
            return Conj(_renumber(left, counter), _renumber(right, counter), label)
        case Disj(left, right, label):
            return Disj(_renumber(left, counter), _renumber(right, counter), label)
        case Loop(body, label):
            return Loop(_renumber(body, counter), label)
    raise TypeError(f"not a workflow node: {node!r}")


def normalize(w: Workflow) -> Workflow:
    """Canonical form under the workflow equivalences.

    Nested conjunctions flatten to a sorted multiset, nested disjunctions
    to a sorted duplicate-free set, nested loops collapse, and sequences
    re-associate to a left-nested chain.  Occurrence ids are renumbered in
    traversal order so that equal normal forms compare equal structurally.
    Labeled nodes are kept as units (they are referenced by constraints),
    so flattening never erases a labeled node.
    """
    return _renumber(_norm(w), itertools.count(1))


# ---------------------------------------------------------------------------
# Substitution


def substitute(w: Workflow, at: Path, replacement: Workflow) -> Workflow:
    """Replace the node addressed by ``at``; the replacement gets fresh occurrence ids."""
    fresh = rename_occurrences(replacement)

    def go(node: Workflow, path: Path) -> Workflow:
        if not path:
            return fresh
        step, rest = path[0], path[1:]
        match node, step:
            case (Seq(left, right, label), "L"):
                return Seq(go(left, rest), right, label)
            case (Seq(left, right, label), "R"):
                return Seq(left, go(right, rest), label)
            case (Conj(left, right, label), "L"):
                return Conj(go(left, rest), right, label)
            case (Conj(left, right, label), "R"):
                return Conj(left, go(right, rest), label)
            case (Disj(left, right, label), "L"):
                return Disj(go(left, rest), right, label)
            case (Disj(left, right, label), "R"):
                return Disj(left, go(right, rest), label)
            case (Loop(body, label), "B"):
                return Loop(go(body, rest), label)
        raise PathError(f"no node at path {at!r}")

    return go(w, at)


def relabel(w: Workflow, at: Path, label: Optional[str]) -> Workflow:
    """Replace the label of the node addressed by ``at`` (occurrences kept)."""
    target = node_at(w, at)
    relabeled = replace(target, label=label)

    def go(node: Workflow, path: Path) -> Workflow:
        if not path:
            return relabeled
        step, rest = path[0], path[1:]
        for s, child in children(node):
            if s == step:
                new_child = go(child, rest)
                match node, step:
                    case (Loop(_, lb), "B"):
                        return Loop(new_child, lb)
                    case (_, "L"):
                        return type(node)(new_child, node.right, node.label)
                    case (_, "R"):
                        return type(node)(node.left, new_child, node.label)
        raise PathError(f"no node at path {at!r}")

    return go(w, at)


# ---------------------------------------------------------------------------
# Syntactic subsumption


class SubsumptionVerdict(Enum):
    """Tri-state verdict of the sound-but-incomplete subsumption check.

    HOLDS is only produced by sound rewrite steps; the checker never
    claims non-subsumption, so the other value is UNKNOWN.
    """

    HOLDS = "holds"
    UNKNOWN = "unknown"


def _rebuild_chain(parts: list[Workflow]) -> Workflow:
    out = parts[0]
    for part in parts[1:]:
        out = Seq(out, part)
    return out


def _generalizations(w: Workflow) -> Iterator[Workflow]:
    """One-step rewrites of w that only generalize (or preserve) its executions.

    The rules are applied modulo the normalization equivalences, so they
    range over contiguous segments of sequence chains and over subsets of
    flattened conjunction/disjunction elements, not just over nodes of the
    canonical tree shape:

      * a sequence grouping may forget its ordering and become a conjunction;
      * a loop followed by one more copy of its body collapses into the loop;
      * any grouping may be wrapped in a loop.
    """

    def splice(parts, i, j, replacement, label):
        out = _rebuild_chain(parts[:i] + [replacement] + parts[j + 1 :])
        return replace(out, label=label) if label is not None else out

    def rewrites_at(node: Workflow) -> Iterator[Workflow]:
        yield Loop(node)
        match node:
            case Seq(_, _, label):
                parts = _seq_chain(replace(node, label=None))
                n = len(parts)
                for i in range(n):
                    for j in range(i + 1, n):
                        # one sequence grouping over parts[i..j] turns into
                        # a conjunction, split anywhere inside
                        for k in range(i, j):
                            grouped = Conj(
                                _rebuild_chain(parts[i : k + 1]),
                                _rebuild_chain(parts[k + 1 : j + 1]),
                            )
                            yield splice(parts, i, j, grouped, label)
                        # a loop absorbs a following copy of its body
                        head = parts[i]
                        if isinstance(head, Loop) and fingerprint(
                            normalize(_rebuild_chain(parts[i + 1 : j + 1]))
                        ) == fingerprint(normalize(head.body)):
                            yield splice(parts, i, j, head, label)
                        # any inner grouping may be wrapped in a loop
                        if (i, j) != (0, n - 1):
                            yield splice(
                                parts, i, j, Loop(_rebuild_chain(parts[i : j + 1])), label
                            )
            case Conj(_, _, label) | Disj(_, _, label):
                kind = type(node)
                parts = _assoc_elements(replace(node, label=None), kind)
                n = len(parts)
                if 2 < n <= 6:
                    for mask in range(1, 1 << n):
                        size = mask.bit_count()
                        if size < 2 or size >= n:
                            continue
                        inside = [parts[x] for x in range(n) if mask >> x & 1]
                        outside = [parts[x] for x in range(n) if not mask >> x & 1]
                        wrapped = Loop(_rebuild_right(inside, kind, None))
                        yield _rebuild_right(outside + [wrapped], kind, label)

    for path, node in iter_nodes(w):
        for rewritten in rewrites_at(node):
            if not path:
                yield rewritten
            else:
                yield substitute(w, path, rewritten)


def subsumes_syntactic(
    w1: Workflow,
    w2: Workflow,
    *,
    budget: int = 6,
    max_states: int = 4000,
) -> SubsumptionVerdict:
    """Is every execution of w1 an execution of w2, by rewrite search?

    Breadth-first search from normalize(w1) towards normalize(w2) using
    normalization equivalences plus the generalizing rewrites; congruence
    comes from applying rules at any position.  Exhausting the budget or
    the state cap yields UNKNOWN, never a negative claim.
    """
    goal = fingerprint(normalize(w2))
    start = normalize(w1)
    seen = {fingerprint(start)}
    frontier = [start]
    if fingerprint(start) == goal:
        return SubsumptionVerdict.HOLDS
    for _ in range(budget):
        next_frontier: list[Workflow] = []
        for state in frontier:
            for candidate in _generalizations(state):
                normal = normalize(candidate)
                key = fingerprint(normal)
                if key == goal:
                    return SubsumptionVerdict.HOLDS
                if key not in seen and len(seen) < max_states:
                    seen.add(key)
                    next_frontier.append(normal)
        if not next_frontier:
            break
        frontier = next_frontier
    return SubsumptionVerdict.UNKNOWN
