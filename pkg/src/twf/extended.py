"""Workflows paired with a qualitative constraint network.

An extended workflow ties interval variables of a network to subworkflow
nodes through an injective reference map.  Reference keys are node labels,
or atom names when those are unambiguous, so the map survives structural
rewrites such as normalization.  The module validates the pairing (notably
the rule that no constraint may cross a loop boundary), computes the
sequence-free form, and decides strong and bounded satisfiability plus a
sufficient subsumption condition.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .allen import Relation, RelationSet
from .qcn import Qcn, entails
from .semantics import Model, find_model
from .workflow import (
    Atomic,
    Conj,
    Disj,
    Loop,
    Path,
    Seq,
    SubsumptionVerdict,
    Workflow,
    iter_nodes,
    node_at,
    normalize,
    relabel,
    subsumes_syntactic,
)

SEQUENCE_RELATIONS = RelationSet.of(Relation.BEFORE, Relation.MEETS)


class KeyResolutionError(ValueError):
    """A reference key matches no node, or more than one."""


class InvalidExtendedWorkflowError(ValueError):
    """Operation requires a valid extended workflow."""

    def __init__(self, report: "ValidationReport"):
        super().__init__("; ".join(v.message for v in report.violations))
        self.report = report


class LabelMapError(ValueError):
    """Two extended workflows disagree on a shared reference key."""


@dataclass(frozen=True)
class ExtendedWorkflow:
    """A workflow, a constraint network, and the reference map between them.

    ``r_map`` sends reference keys (labels, or unambiguous atom names) to
    network variables; it must be injective and cover every constrained
    variable.
    """

    workflow: Workflow
    network: Qcn
    r_map: Mapping[str, str] = field(default_factory=dict)


def embed(w: Workflow) -> ExtendedWorkflow:
    """A plain workflow seen as an extended one with the empty network."""
    return ExtendedWorkflow(w, Qcn.universal(()), {})


def resolve_key(w: Workflow, key: str) -> Path:
    """The unique node a reference key denotes: a label or an atom name."""
    matches = []
    for path, node in iter_nodes(w):
        if node.label == key:
            matches.append(path)
        elif isinstance(node, Atomic) and node.label is None and node.name == key:
            matches.append(path)
    if not matches:
        raise KeyResolutionError(f"reference {key!r} matches no node")
    if len(matches) > 1:
        raise KeyResolutionError(f"reference {key!r} is ambiguous ({len(matches)} nodes)")
    return matches[0]


def variable_paths(ew: ExtendedWorkflow) -> dict[str, Path]:
    """Network variable -> node path, resolved against the current tree."""
    return {var: resolve_key(ew.workflow, key) for key, var in ew.r_map.items()}


def _loop_context(path: Path) -> tuple[Path, ...]:
    return tuple(path[:d] for d in range(len(path)) if path[d] == "B")


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    constraint: Optional[tuple[str, str]] = None
    paths: tuple[Path, ...] = ()


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(ew: ExtendedWorkflow) -> ValidationReport:
    """Check injectivity, variable coverage and the loop-boundary rule.

    Constraints may relate a loop node to anything alongside it, but never
    a node inside a loop body to one outside that body.
    """
    violations: list[Violation] = []
    seen_labels: dict[str, Path] = {}
    for path, node in iter_nodes(ew.workflow):
        if node.label is not None:
            if node.label in seen_labels:
                violations.append(
                    Violation(
                        "duplicate-label",
                        f"label {node.label!r} is used more than once",
                        paths=(seen_labels[node.label], path),
                    )
                )
            else:
                seen_labels[node.label] = path

    key_paths: dict[str, Path] = {}
    for key in ew.r_map:
        try:
            key_paths[key] = resolve_key(ew.workflow, key)
        except KeyResolutionError as exc:
            violations.append(Violation("unresolved-key", str(exc)))

    by_path: dict[Path, str] = {}
    for key, path in key_paths.items():
        if path in by_path:
            violations.append(
                Violation(
                    "non-injective",
                    f"keys {by_path[path]!r} and {key!r} denote the same node",
                    paths=(path,),
                )
            )
        by_path[path] = key
    variables: dict[str, str] = {}
    for key, var in ew.r_map.items():
        if var in variables:
            violations.append(
                Violation(
                    "non-injective",
                    f"keys {variables[var]!r} and {key!r} share the variable {var!r}",
                )
            )
        variables[var] = key

    var_paths = {ew.r_map[key]: path for key, path in key_paths.items()}
    constrained = [(vi, vj) for vi, vj, _ in ew.network.nontrivial_pairs()]
    constrained += [(name, name) for name, _ in ew.network.degenerate_diagonal()]
    for vi, vj in constrained:
        missing = [v for v in (vi, vj) if v not in var_paths]
        if missing:
            for v in dict.fromkeys(missing):
                violations.append(
                    Violation(
                        "unmapped-variable",
                        f"constrained variable {v!r} is not attached to any subworkflow",
                        constraint=(vi, vj),
                    )
                )
            continue
        pi, pj = var_paths[vi], var_paths[vj]
        if _loop_context(pi) != _loop_context(pj):
            violations.append(
                Violation(
                    "loop-boundary",
                    f"constraint between {vi!r} and {vj!r} crosses a loop boundary",
                    constraint=(vi, vj),
                    paths=(pi, pj),
                )
            )
    return ValidationReport(tuple(violations))


def _require_valid(ew: ExtendedWorkflow) -> None:
    report = validate(ew)
    if not report.ok:
        raise InvalidExtendedWorkflowError(report)


# ---------------------------------------------------------------------------
# Sequence-free form


def _uniquify(base: str, taken: set[str]) -> str:
    if base not in taken:
        return base
    for i in itertools.count(2):
        candidate = f"{base}{i}"
        if candidate not in taken:
            return candidate
    raise AssertionError


def sequence_free(ew: ExtendedWorkflow) -> ExtendedWorkflow:
    """The equivalent extended workflow without any sequence node.

    Every sequence becomes a conjunction plus one {before, meets}
    constraint between the end anchor of its left part and the start
    anchor of its right part.  Sequences delegate their anchors to their
    parts, so chains produce constraints between the chained elements;
    conjunctions, disjunctions and loops anchor at their own node and get
    a variable (and a minted label if they have none).  The result is
    normalized, which flattens the freshly created conjunctions.
    """
    _require_valid(ew)
    pairs: list[tuple[Path, Path]] = []

    def go(node: Workflow, path: Path) -> tuple[Workflow, Path, Path]:
        match node:
            case Atomic():
                return node, path, path
            case Seq(left, right, label):
                new_left, left_start, left_end = go(left, path + ("L",))
                new_right, right_start, right_end = go(right, path + ("R",))
                pairs.append((left_end, right_start))
                return Conj(new_left, new_right, label), left_start, right_end
            case Conj(left, right, label):
                new_left, _, _ = go(left, path + ("L",))
                new_right, _, _ = go(right, path + ("R",))
                return Conj(new_left, new_right, label), path, path
            case Disj(left, right, label):
                new_left, _, _ = go(left, path + ("L",))
                new_right, _, _ = go(right, path + ("R",))
                return Disj(new_left, new_right, label), path, path
            case Loop(body, label):
                new_body, _, _ = go(body, path + ("B",))
                return Loop(new_body, label), path, path
        raise TypeError(f"not a workflow node: {node!r}")

    tree, _, _ = go(ew.workflow, ())

    taken = set(ew.r_map) | set(ew.r_map.values())
    for _, node in iter_nodes(tree):
        if node.label is not None:
            taken.add(node.label)
        if isinstance(node, Atomic):
            taken.add(node.name)
    r_map = dict(ew.r_map)
    network = ew.network
    mint = itertools.count(1)

    def key_for(path: Path) -> str:
        nonlocal tree
        node = node_at(tree, path)
        if node.label is not None:
            return node.label
        if isinstance(node, Atomic):
            try:
                if resolve_key(tree, node.name) == path:
                    return node.name
            except KeyResolutionError:
                pass
        label = f"n{next(mint)}"
        while label in taken:
            label = f"n{next(mint)}"
        taken.add(label)
        tree = relabel(tree, path, label)
        return label

    for path_a, path_b in pairs:
        key_a = key_for(path_a)
        key_b = key_for(path_b)
        for key in (key_a, key_b):
            if key not in r_map:
                var = _uniquify(key, set(r_map.values()) - {key})
                r_map[key] = var
        network = network.with_variable(r_map[key_a]).with_variable(r_map[key_b])
        network = network.set_constraint(r_map[key_a], r_map[key_b], SEQUENCE_RELATIONS)

    return ExtendedWorkflow(normalize(tree), network, r_map)


# ---------------------------------------------------------------------------
# Satisfiability


def check_strong_satisfiable(ew: ExtendedWorkflow) -> bool:
    """Is the network of the sequence-free form consistent?

    Strong satisfiability implies (bounded) satisfiability but not the
    other way round; deciding it is a network consistency test, hence
    NP-complete in the number of constrained variables.
    """
    from .qcn import is_consistent

    return is_consistent(sequence_free(ew).network)


def find_witness(
    ew: ExtendedWorkflow, *, unroll_bound: int = 3, atom_budget: int = 7
) -> Optional[Model]:
    """A bounded model of the extended workflow, if one exists."""
    _require_valid(ew)
    return find_model(
        ew.workflow,
        ew.network,
        variable_paths(ew),
        unroll_bound=unroll_bound,
        atom_budget=atom_budget,
    )


def check_satisfiable(
    ew: ExtendedWorkflow, *, unroll_bound: int = 3, atom_budget: int = 7
) -> bool:
    """Bounded satisfiability via the brute-force model search.

    Sound and complete only up to the loop bound and the atom budget;
    exceeding the budget raises instead of answering.
    """
    return find_witness(ew, unroll_bound=unroll_bound, atom_budget=atom_budget) is not None


# ---------------------------------------------------------------------------
# Subsumption


def subsumes_sufficient(ew1: ExtendedWorkflow, ew2: ExtendedWorkflow) -> SubsumptionVerdict:
    """Sufficient subsumption test: workflow rewrite plus network entailment.

    HOLDS when the first workflow is syntactically subsumed by the second
    and the first network entails the second; UNKNOWN otherwise.  Shared
    reference keys must agree on their variable.
    """
    for key in set(ew1.r_map) & set(ew2.r_map):
        if ew1.r_map[key] != ew2.r_map[key]:
            raise LabelMapError(
                f"key {key!r} maps to {ew1.r_map[key]!r} and {ew2.r_map[key]!r}"
            )
    if subsumes_syntactic(ew1.workflow, ew2.workflow) is not SubsumptionVerdict.HOLDS:
        return SubsumptionVerdict.UNKNOWN
    base = ew1.network
    for var in ew2.network.variables:
        base = base.with_variable(var)
    if entails(base, ew2.network):
        return SubsumptionVerdict.HOLDS
    return SubsumptionVerdict.UNKNOWN
