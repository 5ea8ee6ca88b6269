"""Textual syntax for constrained workflows.

Grammar (terms may carry a reference label; ``#`` starts a line comment):

    doc        := "workflow" name "=" expr ("constraints" "{" constraint* "}")?
    expr       := term ("->" term)*                      left-associative
    term       := [label ":"] atom
                | [label ":"] "and{" expr (";" expr)+ "}"
                | [label ":"] "or{"  expr ("|" expr)+ "}"
                | [label ":"] "loop{" expr "}"
                | [label ":"] "(" expr ")"
    atom       := identifier | quoted-string
    constraint := ref relset ref ";"
    relset     := "{" rel ("," rel)* "}"
    ref        := atom-name | label

N-ary groups desugar to right-nested binary nodes; ``->`` chains to
left-nested ones.  Atom names may be single- or double-quoted strings
(backslash escapes), so activities can be whole phrases.  Constraint
references resolve to interval variables of the attached network.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .allen import Relation, RelationSet
from .extended import (
    ExtendedWorkflow,
    KeyResolutionError,
    resolve_key,
    validate,
)
from .qcn import Qcn
from .workflow import (
    Atomic,
    Conj,
    Disj,
    Loop,
    Path,
    Seq,
    Workflow,
    iter_nodes,
    normalize,
    rename_occurrences,
)

RESERVED = {"workflow", "constraints", "and", "or", "loop"}

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class Diagnostic:
    line: int
    column: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.message}"


class ParseError(Exception):
    """Parsing or validation failed; carries located diagnostics."""

    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, STRING, ARROW, one-char punctuation, EOF
    value: str
    line: int
    col: int


def _tokenize(text: str) -> Iterator[Token]:
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if text.startswith("->", i):
            yield Token("ARROW", "->", line, col)
            i += 2
            col += 2
            continue
        if ch in "{}():;|,=":
            yield Token(ch, ch, line, col)
            i += 1
            col += 1
            continue
        if ch in "'\"":
            quote = ch
            start_line, start_col = line, col
            i += 1
            col += 1
            parts = []
            while i < n and text[i] != quote:
                if text[i] == "\\" and i + 1 < n:
                    parts.append(text[i + 1])
                    i += 2
                    col += 2
                elif text[i] == "\n":
                    break
                else:
                    parts.append(text[i])
                    i += 1
                    col += 1
            if i >= n or text[i] != quote:
                raise ParseError([Diagnostic(start_line, start_col, "unterminated string")])
            i += 1
            col += 1
            yield Token("STRING", "".join(parts), start_line, start_col)
            continue
        match = _IDENT_RE.match(text, i)
        if match:
            yield Token("IDENT", match.group(), line, col)
            col += len(match.group())
            i = match.end()
            continue
        raise ParseError([Diagnostic(line, col, f"unexpected character {ch!r}")])
    yield Token("EOF", "", line, col)


@dataclass
class ParsedDocument:
    """A parsed source file: text, workflow name, the extended workflow,
    and source locations of nodes (by path) and constraints (in order)."""

    text: str
    name: str
    extended: ExtendedWorkflow
    node_spans: dict[Path, tuple[int, int]] = field(default_factory=dict)
    constraint_spans: list[tuple[int, int]] = field(default_factory=list)


class _Parser:
    def __init__(self, text: str):
        self.tokens = list(_tokenize(text))
        self.pos = 0
        self.spans: dict[int, tuple[int, int]] = {}

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.current
        self.pos += 1
        return token

    def fail(self, message: str, token: Optional[Token] = None) -> "ParseError":
        token = token or self.current
        return ParseError([Diagnostic(token.line, token.col, message)])

    def expect(self, kind: str, what: str) -> Token:
        if self.current.kind != kind:
            raise self.fail(f"expected {what}")
        return self.advance()

    def keyword(self, word: str) -> Token:
        if self.current.kind != "IDENT" or self.current.value != word:
            raise self.fail(f"expected keyword {word!r}")
        return self.advance()

    # --- grammar

    def document(self) -> tuple[str, Workflow, list[tuple[str, RelationSet, str, Token]]]:
        self.keyword("workflow")
        name = self.expect("IDENT", "a workflow name")
        self.expect("=", "'='")
        tree = self.expr()
        constraints: list[tuple[str, RelationSet, str, Token]] = []
        if self.current.kind == "IDENT" and self.current.value == "constraints":
            self.advance()
            self.expect("{", "'{'")
            while self.current.kind != "}":
                constraints.append(self.constraint())
            self.expect("}", "'}'")
        if self.current.kind != "EOF":
            raise self.fail("unexpected trailing input")
        return name.value, tree, constraints

    def expr(self) -> Workflow:
        node = self.term()
        while self.current.kind == "ARROW":
            self.advance()
            right = self.term()
            node = self._note(Seq(node, right), self.spans[id(node)])
        return node

    def term(self) -> Workflow:
        label: Optional[str] = None
        start = self.current
        if (
            self.current.kind == "IDENT"
            and self.current.value not in RESERVED
            and self.tokens[self.pos + 1].kind == ":"
        ):
            label = self.advance().value
            self.advance()
        token = self.current
        if token.kind == "IDENT" and token.value in ("and", "or"):
            self.advance()
            self.expect("{", "'{'")
            sep = ";" if token.value == "and" else "|"
            parts = [self.expr()]
            while self.current.kind == sep:
                self.advance()
                parts.append(self.expr())
            if len(parts) < 2:
                raise self.fail(f"'{token.value}' group needs at least two alternatives")
            self.expect("}", "'}'")
            kind = Conj if token.value == "and" else Disj
            out = parts[-1]
            for part in reversed(parts[:-1]):
                out = self._note(kind(part, out), (start.line, start.col))
            return self._label(out, label, start)
        if token.kind == "IDENT" and token.value == "loop":
            self.advance()
            self.expect("{", "'{'")
            body = self.expr()
            self.expect("}", "'}'")
            return self._label(self._note(Loop(body), (start.line, start.col)), label, start)
        if token.kind == "(":
            self.advance()
            inner = self.expr()
            self.expect(")", "')'")
            return self._label(inner, label, start)
        if token.kind == "STRING" or (token.kind == "IDENT" and token.value not in RESERVED):
            self.advance()
            return self._label(
                self._note(Atomic(token.value), (token.line, token.col)), label, start
            )
        raise self.fail("expected an activity, group, or '('")

    def constraint(self) -> tuple[str, RelationSet, str, Token]:
        first = self.current
        left = self.ref()
        rels = self.relset()
        right = self.ref()
        self.expect(";", "';'")
        return left, rels, right, first

    def ref(self) -> str:
        token = self.current
        if token.kind == "STRING" or (token.kind == "IDENT" and token.value not in RESERVED):
            self.advance()
            return token.value
        raise self.fail("expected an activity name or label")

    def relset(self) -> RelationSet:
        self.expect("{", "a relation set")
        rels = RelationSet(0)
        while True:
            token = self.expect("IDENT", "a relation token")
            try:
                rels = rels | RelationSet.of(Relation.from_token(token.value))
            except ValueError:
                raise self.fail(f"unknown relation {token.value!r}", token) from None
            if self.current.kind == ",":
                self.advance()
                continue
            break
        self.expect("}", "'}'")
        return rels

    # --- bookkeeping

    def _note(self, node: Workflow, span: tuple[int, int]) -> Workflow:
        self.spans[id(node)] = span
        return node

    def _label(self, node: Workflow, label: Optional[str], start: Token) -> Workflow:
        if label is None:
            return node
        if node.label is not None:
            raise self.fail(f"node already carries label {node.label!r}", start)
        from dataclasses import replace

        relabeled = replace(node, label=label)
        self.spans[id(relabeled)] = self.spans.get(id(node), (start.line, start.col))
        return relabeled


def parse(text: str) -> ParsedDocument:
    """Parse a source document into a validated extended workflow.

    Raises ParseError with located diagnostics on lexical or syntactic
    errors, on unknown or ambiguous constraint references, and on
    validation violations (duplicate labels, loop-boundary constraints).
    """
    parser = _Parser(text)
    name, tree, raw_constraints = parser.document()
    node_spans = {path: parser.spans.get(id(node), (1, 1)) for path, node in iter_nodes(tree)}
    tree = rename_occurrences(tree)

    diagnostics: list[Diagnostic] = []
    variables: list[str] = []
    for left, _, right, token in raw_constraints:
        for key in (left, right):
            if key in variables:
                continue
            try:
                resolve_key(tree, key)
                variables.append(key)
            except KeyResolutionError as exc:
                diagnostics.append(Diagnostic(token.line, token.col, str(exc)))
    if diagnostics:
        raise ParseError(diagnostics)

    network = Qcn.universal(tuple(variables))
    for left, rels, right, _ in raw_constraints:
        network = network.set_constraint(left, right, rels)
    extended = ExtendedWorkflow(tree, network, {key: key for key in variables})

    report = validate(extended)
    if not report.ok:
        span_of = {}
        for left, _, right, token in raw_constraints:
            span_of.setdefault(frozenset((left, right)), (token.line, token.col))
        for violation in report.violations:
            line, col = (1, 1)
            if violation.constraint is not None:
                line, col = span_of.get(frozenset(violation.constraint), (1, 1))
            diagnostics.append(Diagnostic(line, col, violation.message))
        raise ParseError(diagnostics)

    return ParsedDocument(
        text,
        name,
        extended,
        node_spans,
        [(t.line, t.col) for *_, t in raw_constraints],
    )


def parse_extended(text: str) -> ExtendedWorkflow:
    return parse(text).extended


# ---------------------------------------------------------------------------
# Canonical printing


def _quote(name: str) -> str:
    if _IDENT_RE.fullmatch(name) and name not in RESERVED:
        return name
    escaped = name.replace("\\", "\\\\").replace("'", "\\'")
    return f"'{escaped}'"


def _format_term(node: Workflow) -> str:
    prefix = f"{node.label}: " if node.label is not None else ""
    match node:
        case Atomic(name, _, _):
            return f"{prefix}{_quote(name)}"
        case Seq():
            return f"{prefix}( {_format_expr(node, chain_label_ok=True)} )"
        case Conj():
            parts = _conj_parts(node)
            return f"{prefix}and{{ {' ; '.join(_format_expr(p) for p in parts)} }}"
        case Disj():
            parts = _disj_parts(node)
            return f"{prefix}or{{ {' | '.join(_format_expr(p) for p in parts)} }}"
        case Loop(body, _):
            return f"{prefix}loop{{ {_format_expr(body)} }}"
    raise TypeError(f"not a workflow node: {node!r}")


def _conj_parts(node: Workflow) -> list[Workflow]:
    if isinstance(node, Conj):
        head = [node.left] if node.left.label is not None or not isinstance(node.left, Conj) else _conj_parts(node.left)
        tail = [node.right] if node.right.label is not None or not isinstance(node.right, Conj) else _conj_parts(node.right)
        return head + tail
    return [node]


def _disj_parts(node: Workflow) -> list[Workflow]:
    if isinstance(node, Disj):
        head = [node.left] if node.left.label is not None or not isinstance(node.left, Disj) else _disj_parts(node.left)
        tail = [node.right] if node.right.label is not None or not isinstance(node.right, Disj) else _disj_parts(node.right)
        return head + tail
    return [node]


def _format_expr(node: Workflow, chain_label_ok: bool = False) -> str:
    if isinstance(node, Seq) and (node.label is None or chain_label_ok):
        parts: list[Workflow] = []

        def chain(n: Workflow) -> None:
            if isinstance(n, Seq) and n.label is None:
                chain(n.left)
                chain(n.right)
            else:
                parts.append(n)

        chain(node.left)
        chain(node.right)
        return " -> ".join(_format_term(p) for p in parts)
    return _format_term(node)


def format_document(ew: ExtendedWorkflow, name: str = "main") -> str:
    """Canonical source text: normalized workflow, sorted constraints.

    Parsing the output yields the same extended workflow back (up to
    normalization), which the round-trip tests rely on.
    """
    tree = normalize(ew.workflow)
    lines = [f"workflow {name} = {_format_expr(tree)}"]
    key_of = {var: key for key, var in ew.r_map.items()}
    entries = []
    for vi, vj, rels in ew.network.nontrivial_pairs():
        entries.append((key_of[vi], rels, key_of[vj]))
    for name_, _ in ew.network.degenerate_diagonal():
        # a constrained diagonal is always empty; any eq-free set restates it
        entries.append((key_of[name_], RelationSet.of(Relation.BEFORE), key_of[name_]))
    if entries:
        lines.append("constraints {")
        for left, rels, right in entries:
            tokens = ", ".join(r.token for r in rels)
            lines.append(f"    {_quote(left)} {{{tokens}}} {_quote(right)};")
        lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# DOT export


def export_dot(ew: ExtendedWorkflow, name: str = "workflow") -> str:
    """Activity-diagram style DOT text.

    Atoms become rounded boxes, conjunctions a fork/join bar pair,
    disjunctions a choice/merge diamond pair and loops an entry/exit
    diamond pair with a back edge.  Network constraints are rendered as
    dashed labeled edges between the nodes standing for their ends.
    """
    counter = iter(range(10 ** 9))
    nodes: list[str] = []
    edges: list[str] = []
    anchor: dict[Path, str] = {}

    def esc(text: str) -> str:
        return text.replace("\\", "\\\\").replace('"', '\\"')

    def walk(node: Workflow, path: Path) -> tuple[str, str]:
        idx = next(counter)
        match node:
            case Atomic(atom_name, _, _):
                nid = f"a{idx}"
                nodes.append(f'{nid} [label="{esc(atom_name)}", shape=box, style=rounded];')
                anchor[path] = nid
                return nid, nid
            case Seq(left, right, _):
                l_in, l_out = walk(left, path + ("L",))
                r_in, r_out = walk(right, path + ("R",))
                edges.append(f"{l_out} -> {r_in};")
                anchor[path] = l_in
                return l_in, r_out
            case Conj(left, right, _):
                fork = f"fork{idx}"
                join = f"join{idx}"
                nodes.append(f'{fork} [shape=box, style=filled, fillcolor=black, label="", height=0.08];')
                nodes.append(f'{join} [shape=box, style=filled, fillcolor=black, label="", height=0.08];')
                l_in, l_out = walk(left, path + ("L",))
                r_in, r_out = walk(right, path + ("R",))
                edges.append(f"{fork} -> {l_in};")
                edges.append(f"{fork} -> {r_in};")
                edges.append(f"{l_out} -> {join};")
                edges.append(f"{r_out} -> {join};")
                anchor[path] = fork
                return fork, join
            case Disj(left, right, _):
                choice = f"choice{idx}"
                merge = f"merge{idx}"
                nodes.append(f'{choice} [shape=diamond, label=""];')
                nodes.append(f'{merge} [shape=diamond, label=""];')
                l_in, l_out = walk(left, path + ("L",))
                r_in, r_out = walk(right, path + ("R",))
                edges.append(f"{choice} -> {l_in};")
                edges.append(f"{choice} -> {r_in};")
                edges.append(f"{l_out} -> {merge};")
                edges.append(f"{r_out} -> {merge};")
                anchor[path] = choice
                return choice, merge
            case Loop(body, _):
                loop_in = f"loopin{idx}"
                loop_out = f"loopout{idx}"
                nodes.append(f'{loop_in} [shape=diamond, label=""];')
                nodes.append(f'{loop_out} [shape=diamond, label=""];')
                b_in, b_out = walk(body, path + ("B",))
                edges.append(f"{loop_in} -> {b_in};")
                edges.append(f"{b_out} -> {loop_out};")
                edges.append(f"{loop_out} -> {loop_in};")
                anchor[path] = loop_in
                return loop_in, loop_out
        raise TypeError(f"not a workflow node: {node!r}")

    entry, exit_ = walk(ew.workflow, ())
    nodes.append('start [shape=circle, style=filled, fillcolor=black, label=""];')
    nodes.append('end [shape=doublecircle, label=""];')
    edges.append(f"start -> {entry};")
    edges.append(f"{exit_} -> end;")

    key_paths = {var: resolve_key(ew.workflow, key) for key, var in ew.r_map.items()}
    for vi, vj, rels in ew.network.nontrivial_pairs():
        a = anchor[key_paths[vi]]
        b = anchor[key_paths[vj]]
        tokens = ", ".join(r.token for r in rels)
        edges.append(f'{a} -> {b} [style=dashed, label="{esc("{" + tokens + "}")}", constraint=false];')

    body = "\n".join(f"    {line}" for line in nodes + edges)
    return f'digraph "{esc(name)}" {{\n    rankdir=LR;\n{body}\n}}\n'
