"""Command-line front end.

Exit codes: 0 for a positive verdict or plain success, 1 for a negative
verdict (unsatisfiable, inconsistent, unknown subsumption, failed
verification), 2 for usage, parse or budget errors.  Output is
deterministic for fixed inputs, flags and seeds.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from typing import Optional

from . import __version__
from .allen import RELATIONS, Relation, RelationSet, UNIVERSAL, generate_composition_table, compose
from .dsl import ParseError, export_dot, format_document, parse
from .extended import (
    ExtendedWorkflow,
    InvalidExtendedWorkflowError,
    sequence_free,
    variable_paths,
)
from .qcn import Qcn, check_schedule, is_consistent, path_consistency, realize_scenario, scenarios
from .semantics import (
    AtomBudgetError,
    Model,
    check_model,
    find_model,
    network_consistent_bruteforce,
    network_scenario_relations_bruteforce,
)
from .workflow import Loop, iter_nodes

SCHEMA_VERSION = 1


def _load(path: str):
    try:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(2)
    try:
        return parse(text)
    except ParseError as exc:
        for diagnostic in exc.diagnostics:
            print(f"{path}:{diagnostic}", file=sys.stderr)
        raise SystemExit(2)


def _has_loops(ew: ExtendedWorkflow) -> bool:
    return any(isinstance(n, Loop) for _, n in iter_nodes(ew.workflow))


def _witness_rows(model: Model) -> list[dict[str, str]]:
    names: dict[str, int] = {}
    for atom in model.instance.atoms:
        names[atom.name] = names.get(atom.name, 0) + 1
    counters: dict[str, int] = {}
    rows = []
    for atom in model.instance.atoms:
        counters[atom.name] = counters.get(atom.name, 0) + 1
        shown = atom.name if names[atom.name] == 1 else f"{atom.name}#{counters[atom.name]}"
        iv = model.assignment[atom.occ]
        rows.append({"activity": shown, "start": str(iv.lo), "end": str(iv.hi)})
    return rows


def _emit_verdict(
    args,
    command: str,
    verdict: bool,
    witness: Optional[list[dict[str, str]]],
    bounded: bool,
    unroll_bound: Optional[int],
) -> int:
    if getattr(args, "json", False):
        payload = {
            "schema_version": SCHEMA_VERSION,
            "tool": "twf",
            "tool_version": __version__,
            "command": command,
            "file": args.file,
            "verdict": verdict,
            "bounded": bounded,
            "unroll_bound": unroll_bound,
            "witness": witness,
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        qualifier = f" (bounded search, loop bound {unroll_bound})" if bounded else ""
        print(f"{command}{qualifier}: {'yes' if verdict else 'no'}")
        if witness:
            print("witness schedule:")
            for row in witness:
                print(f"    {row['activity']} [{row['start']}, {row['end']}]")
    return 0 if verdict else 1


def _cmd_check(args) -> int:
    doc = _load(args.file)
    ew = doc.extended
    try:
        model = find_model(
            ew.workflow,
            ew.network,
            variable_paths(ew),
            unroll_bound=args.unroll_bound,
        )
    except AtomBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    witness = None
    if model is not None:
        if not check_model(model.instance, model.assignment, ew.network, variable_paths(ew)):
            print("error: witness failed re-verification", file=sys.stderr)
            return 2
        witness = _witness_rows(model)
    return _emit_verdict(
        args, "satisfiable", model is not None, witness, _has_loops(ew), args.unroll_bound
    )


def _cmd_strong_check(args) -> int:
    doc = _load(args.file)
    try:
        free = sequence_free(doc.extended)
    except InvalidExtendedWorkflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    verdict = is_consistent(free.network)
    return _emit_verdict(args, "strongly-satisfiable", verdict, None, False, None)


def _cmd_scenario(args) -> int:
    doc = _load(args.file)
    free = sequence_free(doc.extended)
    scenario = next(scenarios(free.network), None)
    if scenario is None:
        print("no realizable scenario: the network is inconsistent")
        return 1
    schedule = realize_scenario(scenario)
    if not check_schedule(free.network, schedule):
        print("error: schedule failed re-verification", file=sys.stderr)
        return 2
    print("scenario:")
    count = len(scenario.variables)
    for i in range(count):
        for j in range(i + 1, count):
            rel = scenario.constraints[i][j].single()
            print(f"    {scenario.variables[i]} {{{rel.token}}} {scenario.variables[j]}")
    print("schedule:")
    for name in scenario.variables:
        iv = schedule[name]
        print(f"    {name} [{iv.lo}, {iv.hi}]")
    return 0


def _cmd_normalize(args) -> int:
    doc = _load(args.file)
    sys.stdout.write(format_document(doc.extended, doc.name))
    return 0


def _cmd_seqfree(args) -> int:
    doc = _load(args.file)
    sys.stdout.write(format_document(sequence_free(doc.extended), doc.name))
    return 0


def _cmd_subsumes(args) -> int:
    from .extended import subsumes_sufficient
    from .workflow import SubsumptionVerdict

    first = _load(args.file)
    second = _load(args.file2)
    verdict = subsumes_sufficient(first.extended, second.extended)
    print(verdict.value)
    return 0 if verdict is SubsumptionVerdict.HOLDS else 1


def _cmd_dot(args) -> int:
    doc = _load(args.file)
    text = export_dot(doc.extended, doc.name)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_table(args) -> int:
    if args.verify:
        generated = generate_composition_table()
        mismatches = [
            (r, s)
            for r in RELATIONS
            for s in RELATIONS
            if generated[(r, s)] != compose(r, s)
        ]
        matching = 169 - len(mismatches)
        print(f"{matching}/169 entries match")
        for r, s in mismatches:
            print(f"    mismatch at ({r.token}, {s.token})")
        return 0 if not mismatches else 1
    tokens = [r.token for r in RELATIONS]
    cells = {
        (r, s): ("*" if compose(r, s) == UNIVERSAL else ",".join(x.token for x in compose(r, s)))
        for r in RELATIONS
        for s in RELATIONS
    }
    width = max(len(text) for text in cells.values())
    width = max(width, max(len(t) for t in tokens))
    header = "     | " + " | ".join(t.rjust(width) for t in tokens)
    print("composition table: row . column ('*' = all 13 relations)")
    print(header)
    print("-" * len(header))
    for r in RELATIONS:
        row = " | ".join(cells[(r, s)].rjust(width) for s in RELATIONS)
        print(f"{r.token.rjust(4)} | {row}")
    return 0


def _random_network(rng: random.Random, size: int, tightness: float = 0.6) -> Qcn:
    names = tuple(f"v{i}" for i in range(size))
    network = Qcn.universal(names)
    for i in range(size):
        for j in range(i + 1, size):
            if rng.random() < tightness:
                count = rng.randint(1, 4)
                rels = RelationSet.of(*rng.sample(RELATIONS, count))
                network = network.set_constraint(names[i], names[j], rels)
    return network


def _cmd_oracle_verify(args) -> int:
    rng = random.Random(args.seed)
    failures = 0

    generated = generate_composition_table()
    table_bad = sum(
        1 for r in RELATIONS for s in RELATIONS if generated[(r, s)] != compose(r, s)
    )
    print(f"composition table: {169 - table_bad}/169 entries match")
    failures += table_bad

    disagreements = 0
    for _ in range(args.instances):
        network = _random_network(rng, rng.randint(2, 4))
        if is_consistent(network) != network_consistent_bruteforce(network):
            disagreements += 1
    print(
        f"consistency: {args.instances} networks (<=4 variables), "
        f"{disagreements} disagreements with brute force"
    )
    failures += disagreements

    pc_violations = 0
    pc_instances = max(20, args.instances // 10)
    for _ in range(pc_instances):
        network = _random_network(rng, rng.randint(3, 5), tightness=0.9)
        refined, ok = path_consistency(network)
        realizable = network_scenario_relations_bruteforce(network)
        for (vi, vj), rels in realizable.items():
            kept = refined.get(vi, vj) if ok else RelationSet(0)
            if rels.bits & ~kept.bits:
                pc_violations += 1
                break
    print(
        f"path consistency: {pc_instances} networks (<=5 variables), "
        f"{pc_violations} removed a realizable relation"
    )
    failures += pc_violations

    print("result:", "ok" if failures == 0 else f"{failures} failures")
    return 0 if failures == 0 else 1


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="twf",
        description="Reason about workflows with qualitative interval constraints.",
    )
    parser.add_argument("--version", action="version", version=f"twf {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("check", help="bounded satisfiability with a witness schedule")
    p.add_argument("file")
    p.add_argument("--unroll-bound", type=int, default=3, metavar="K")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=_cmd_check)

    p = commands.add_parser("strong-check", help="consistency of the sequence-free network")
    p.add_argument("file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=_cmd_strong_check)

    p = commands.add_parser("scenario", help="one realizable scenario plus a rational schedule")
    p.add_argument("file")
    p.set_defaults(fn=_cmd_scenario)

    p = commands.add_parser("normalize", help="canonical form of a document")
    p.add_argument("file")
    p.set_defaults(fn=_cmd_normalize)

    p = commands.add_parser("seqfree", help="sequence-free form of a document")
    p.add_argument("file")
    p.set_defaults(fn=_cmd_seqfree)

    p = commands.add_parser("subsumes", help="is the first workflow subsumed by the second?")
    p.add_argument("file")
    p.add_argument("file2")
    p.set_defaults(fn=_cmd_subsumes)

    p = commands.add_parser("dot", help="activity-diagram DOT export")
    p.add_argument("file")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(fn=_cmd_dot)

    p = commands.add_parser("table", help="print or re-derive the composition table")
    p.add_argument("--verify", action="store_true")
    p.set_defaults(fn=_cmd_table)

    p = commands.add_parser("oracle-verify", help="randomized solver-vs-oracle cross-check")
    p.add_argument("--instances", type=int, default=500, metavar="N")
    p.add_argument("--seed", type=int, default=0, metavar="S")
    p.set_defaults(fn=_cmd_oracle_verify)

    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 2
    except BrokenPipeError:
        return 0


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
