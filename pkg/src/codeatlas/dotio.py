"""Parse and serialize the supported DOT subset.

The subset covers what the generation prompts ask for: a ``digraph`` with
node statements carrying attribute lists, labeled edge statements, and
``subgraph cluster_*`` blocks that become module groups. Ports, HTML
labels, undirected graphs, and default-attribute statements are rejected.
The full grammar and the serializer's ordering guarantees are documented
in ``docs/dot-subset.md``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from . import model
from .errors import DotSyntaxError, GraphValidationError
from .model import MapEdge, MapGraph, MapNode, Relation

# ---------------------------------------------------------------------------
# tokenizer

_SYMBOLS = ("->", "{", "}", "[", "]", "=", ";", ",")
_ID_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*|-?\d+(?:\.\d+)?")


@dataclass(frozen=True)
class _Token:
    kind: str  # "id" | "string" | one of _SYMBOLS | "eof"
    value: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def err(msg):
        raise DotSyntaxError(msg, line, col)

    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i) or ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end < 0:
                err("unterminated block comment")
            skipped = text[i : end + 2]
            line += skipped.count("\n")
            col = 1 if "\n" in skipped else col + len(skipped)
            i = end + 2
            continue
        if ch == '"':
            start_line, start_col = line, col
            i += 1
            col += 1
            out = []
            while True:
                if i >= n:
                    raise DotSyntaxError("unterminated string", start_line, start_col)
                c = text[i]
                if c == "\\" and i + 1 < n:
                    nxt = text[i + 1]
                    out.append({"n": "\n", '"': '"', "\\": "\\"}.get(nxt, "\\" + nxt))
                    i += 2
                    col += 2
                    continue
                if c == '"':
                    i += 1
                    col += 1
                    break
                if c == "\n":
                    line += 1
                    col = 1
                else:
                    col += 1
                out.append(c)
                i += 1
            tokens.append(_Token("string", "".join(out), start_line, start_col))
            continue
        if ch == "<":
            err("HTML labels are outside the supported subset")
        if ch == ":":
            err("ports are outside the supported subset")
        matched = False
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(_Token(sym, sym, line, col))
                i += len(sym)
                col += len(sym)
                matched = True
                break
        if matched:
            continue
        m = _ID_RE.match(text, i)
        if m:
            tokens.append(_Token("id", m.group(0), line, col))
            col += len(m.group(0))
            i = m.end()
            continue
        err(f"unexpected character {ch!r}")
    tokens.append(_Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# parser

_LIST_SPLIT = ";"

_REJECTED_KEYWORDS = {"graph", "node", "edge", "strict"}


class _Parser:
    def __init__(self, text: str, kind: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.kind = kind
        # node id -> attrs; insertion order kept for error reporting
        self.node_attrs: dict[str, dict[str, str]] = {}
        self.declared: set[str] = set()
        self.edges: list[tuple[str, str, dict[str, str], _Token]] = []
        self.groups: dict[str, set[str]] = {}
        self.cluster_counter = 0

    # token helpers ---------------------------------------------------------
    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.next()
        if tok.kind != kind:
            raise DotSyntaxError(
                f"expected {kind!r}, found {tok.value!r}", tok.line, tok.column
            )
        return tok

    def fail(self, msg: str, tok: _Token):
        raise DotSyntaxError(msg, tok.line, tok.column)

    # grammar ---------------------------------------------------------------
    def parse(self) -> MapGraph:
        head = self.next()
        if head.kind != "id" or head.value != "digraph":
            if head.kind == "id" and head.value in _REJECTED_KEYWORDS:
                self.fail(f"{head.value!r} graphs are outside the supported subset", head)
            self.fail("input must start with 'digraph'", head)
        if self.peek().kind in ("id", "string"):
            self.next()  # optional graph name
        self.expect("{")
        self.stmt_list(in_cluster=None)
        self.expect("}")
        tail = self.next()
        if tail.kind != "eof":
            self.fail("trailing content after closing brace", tail)
        return self.build()

    def stmt_list(self, in_cluster: Optional[str]):
        while True:
            tok = self.peek()
            if tok.kind == "}":
                return
            if tok.kind == ";":
                self.next()
                continue
            if tok.kind == "eof":
                self.fail("unexpected end of input", tok)
            if tok.kind == "id" and tok.value == "subgraph":
                if in_cluster is not None:
                    self.fail("nested subgraphs are outside the supported subset", tok)
                self.subgraph()
                continue
            if tok.kind in ("id", "string"):
                if tok.value in _REJECTED_KEYWORDS:
                    self.fail(
                        f"{tok.value!r} statements are outside the supported subset", tok
                    )
                self.node_or_edge(in_cluster)
                continue
            self.fail(f"unexpected token {tok.value!r}", tok)

    def subgraph(self):
        self.expect("id")  # 'subgraph'
        name_tok = self.peek()
        cluster_id = ""
        if name_tok.kind in ("id", "string"):
            cluster_id = self.next().value
        if not cluster_id.startswith("cluster"):
            self.fail("only 'subgraph cluster_*' blocks are supported", name_tok)
        self.expect("{")
        default = cluster_id[len("cluster") :].lstrip("_") or cluster_id
        group_name = default
        members: set[str] = set()
        while True:
            tok = self.peek()
            if tok.kind == "}":
                self.next()
                break
            if tok.kind == ";":
                self.next()
                continue
            if tok.kind in ("id", "string"):
                if tok.value == "label" and self.tokens[self.pos + 1].kind == "=":
                    self.next()
                    self.next()
                    val = self.next()
                    if val.kind not in ("id", "string"):
                        self.fail("label needs a value", val)
                    group_name = val.value
                    continue
                if tok.value in _REJECTED_KEYWORDS:
                    self.fail(
                        f"{tok.value!r} statements are outside the supported subset", tok
                    )
                members |= self.node_or_edge(in_cluster=cluster_id)
                continue
            self.fail(f"unexpected token {tok.value!r} in subgraph", tok)
        existing = self.groups.setdefault(group_name, set())
        existing |= members

    def node_or_edge(self, in_cluster: Optional[str]) -> set[str]:
        """Parse one node or edge statement; returns the node ids it touches."""
        first = self.next()
        touched = {first.value}
        self.touch(first.value)
        if self.peek().kind == "->":
            self.next()
            dst = self.next()
            if dst.kind not in ("id", "string"):
                self.fail("edge target must be a node id", dst)
            self.touch(dst.value)
            touched.add(dst.value)
            attrs = self.attr_list_opt()
            self.edges.append((first.value, dst.value, attrs, first))
            return touched
        attrs = self.attr_list_opt()
        if attrs:
            if first.value in self.declared:
                raise GraphValidationError(
                    f"duplicate declaration of node {first.value!r}"
                )
            self.declared.add(first.value)
            self.node_attrs[first.value].update(attrs)
        return touched

    def attr_list_opt(self) -> dict[str, str]:
        if self.peek().kind != "[":
            return {}
        self.next()
        attrs: dict[str, str] = {}
        while True:
            tok = self.peek()
            if tok.kind == "]":
                self.next()
                return attrs
            if tok.kind in (",", ";"):
                self.next()
                continue
            key = self.next()
            if key.kind not in ("id", "string"):
                self.fail("attribute name expected", key)
            self.expect("=")
            val = self.next()
            if val.kind not in ("id", "string"):
                self.fail("attribute value expected", val)
            attrs[key.value] = val.value

    def touch(self, node_id: str):
        self.node_attrs.setdefault(node_id, {})

    # model construction ----------------------------------------------------
    def build(self) -> MapGraph:
        nodes = tuple(
            _node_from_attrs(node_id, attrs, self.kind)
            for node_id, attrs in self.node_attrs.items()
        )
        edges = tuple(
            _edge_from_attrs(src, dst, attrs, self.kind) for src, dst, attrs, _ in self.edges
        )
        groups = tuple(
            (name, tuple(sorted(members))) for name, members in self.groups.items()
        )
        return MapGraph(kind=self.kind, nodes=nodes, edges=edges, module_groups=groups)


_LABEL_CONVENTION = re.compile(r"^\s*(?P<name>[^:]+?)\s*:\s*\((?P<desc>.*)\)\s*$", re.S)


def _split_list(value: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in value.split(_LIST_SPLIT) if part.strip())


def _node_from_attrs(node_id: str, attrs: dict[str, str], kind: str) -> MapNode:
    label = attrs.get("label", "")
    name = attrs.get("name", "")
    description = attrs.get("description", "")
    if not name and label:
        # Lenient fallback: the "Name: (description)" label convention.
        m = _LABEL_CONVENTION.match(label)
        if m:
            name = m.group("name").strip()
            if not description:
                description = m.group("desc").strip()
    member_kind = None
    if kind == model.LOCAL:
        raw_kind = attrs.get("memberKind", "")
        if raw_kind:
            canonical = raw_kind.strip().capitalize()
            if canonical not in model.MEMBER_KINDS:
                raise GraphValidationError(
                    f"node {node_id!r}: unknown member kind {raw_kind!r} "
                    f"(expected one of {model.MEMBER_KINDS})"
                )
            member_kind = canonical
        if not name:
            name = label or node_id
    return MapNode(
        node_id=node_id,
        label=label,
        name=name,
        description=description,
        key_functions=_split_list(attrs.get("keyFunctions", "")),
        key_variables=_split_list(attrs.get("keyVariables", "")),
        key_files=_split_list(attrs.get("keyFiles", "")),
        member_kind=member_kind,
    )


# Inference order matters: first match wins, so parsing stays reproducible.
_KEYWORD_RELATIONS = (
    ("inherit", model.INHERITANCE),
    ("implement", model.IMPLEMENTS),
    ("define", model.DEFINES),
    ("used by", model.USED_BY),
    ("used-by", model.USED_BY),
    ("contain", model.CONTAINS),
    ("call", model.CALL_RELATION),
)


def _infer_relation(label: str, kind: str) -> Relation:
    lowered = label.lower()
    if kind == model.BUSINESS_COMPONENT:
        return Relation(model.BUSINESS_PURPOSE, text=label)
    matched = None
    for keyword, relation_kind in _KEYWORD_RELATIONS:
        if keyword in lowered:
            matched = relation_kind
            break
    if matched is not None:
        if matched not in model.legal_relations(kind):
            raise GraphValidationError(
                f"edge label {label!r} implies relation {matched!r}, "
                f"which is illegal for {kind} graphs"
            )
        return Relation(matched)
    if kind == model.FUNCTION_CALL:
        return Relation(model.PURPOSE, text=label)
    raise GraphValidationError(
        f"edge label {label!r} does not name a legal {kind} relation "
        f"(allowed: {sorted(model.legal_relations(kind))})"
    )


def _edge_from_attrs(src: str, dst: str, attrs: dict[str, str], kind: str) -> MapEdge:
    label = attrs.get("label", "")
    explicit = attrs.get("relation")
    if explicit is not None:
        if explicit not in model.legal_relations(kind):
            raise GraphValidationError(
                f"relation {explicit!r} is illegal for {kind} graphs "
                f"(allowed: {sorted(model.legal_relations(kind))})"
            )
        text = attrs.get("text", label if explicit in model.TEXT_RELATIONS else "")
        relation = Relation(explicit, text=text)
    elif label:
        relation = _infer_relation(label, kind)
    else:
        if kind == model.BUSINESS_COMPONENT:
            relation = Relation(model.BUSINESS_PURPOSE, text="")
        elif kind == model.FUNCTION_CALL:
            relation = Relation(model.PURPOSE, text="")
        else:
            raise GraphValidationError(
                f"edge {src!r} -> {dst!r} in a local graph needs a relation label"
            )
    return MapEdge(src=src, dst=dst, relation=relation, annotation=label)


def parse_dot(text: str, kind: str) -> MapGraph:
    """Parse DOT source into a validated :class:`MapGraph` of ``kind``."""
    if kind not in model.MAP_KINDS:
        raise GraphValidationError(f"unknown map kind: {kind!r}")
    return _Parser(text, kind).parse()


# ---------------------------------------------------------------------------
# serializer

def _quote(value: str) -> str:
    escaped = value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
    return f'"{escaped}"'


def _node_attrs_out(node: MapNode) -> list[str]:
    attrs = []
    if node.label:
        attrs.append(f"label={_quote(node.label)}")
    if node.name:
        attrs.append(f"name={_quote(node.name)}")
    if node.description:
        attrs.append(f"description={_quote(node.description)}")
    if node.key_functions:
        attrs.append(f"keyFunctions={_quote(_LIST_SPLIT.join(node.key_functions))}")
    if node.key_variables:
        attrs.append(f"keyVariables={_quote(_LIST_SPLIT.join(node.key_variables))}")
    if node.key_files:
        attrs.append(f"keyFiles={_quote(_LIST_SPLIT.join(node.key_files))}")
    if node.member_kind:
        attrs.append(f"memberKind={_quote(node.member_kind)}")
    return attrs


def serialize_dot(graph: MapGraph) -> str:
    """Deterministic DOT output: clusters by group name, nodes by id,
    edges by (src, dst, relation). ``parse_dot(serialize_dot(g), g.kind)``
    reconstructs ``g`` exactly."""
    lines = ["digraph G {"]
    for index, (name, members) in enumerate(graph.module_groups):
        lines.append(f"  subgraph cluster_{index} {{")
        lines.append(f"    label={_quote(name)};")
        for member in members:
            lines.append(f"    {_quote(member)};")
        lines.append("  }")
    for node in graph.nodes:
        attrs = _node_attrs_out(node)
        if attrs:
            lines.append(f"  {_quote(node.node_id)} [{', '.join(attrs)}];")
        else:
            lines.append(f"  {_quote(node.node_id)};")
    for edge in graph.edges:
        attrs = [f"relation={_quote(edge.relation.kind)}"]
        if edge.annotation:
            attrs.append(f"label={_quote(edge.annotation)}")
        if (
            edge.relation.kind in model.TEXT_RELATIONS
            and edge.relation.text != edge.annotation
        ):
            attrs.append(f"text={_quote(edge.relation.text)}")
        lines.append(
            f"  {_quote(edge.src)} -> {_quote(edge.dst)} [{', '.join(attrs)}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# completion helpers

_DIGRAPH_RE = re.compile(r"\bdigraph\b")


def extract_dot_block(text: str) -> str:
    """Pull the first ``digraph { ... }`` block out of surrounding prose.

    Model completions wrap DOT in code fences or explanation; brace
    matching from the ``digraph`` keyword is enough to recover it.
    """
    m = _DIGRAPH_RE.search(text)
    if not m:
        raise DotSyntaxError("no 'digraph' block found in completion")
    start = m.start()
    open_brace = text.find("{", start)
    if open_brace < 0:
        raise DotSyntaxError("'digraph' without a body")
    depth = 0
    in_string = False
    i = open_brace
    while i < len(text):
        c = text[i]
        if in_string:
            if c == "\\":
                i += 2
                continue
            if c == '"':
                in_string = False
        elif c == '"':
            in_string = True
        elif c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
        i += 1
    raise DotSyntaxError("unbalanced braces in 'digraph' block")
