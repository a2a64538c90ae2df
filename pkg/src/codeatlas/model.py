"""Typed map model: the three map kinds, their nodes, edges, and the
structured overview that accompanies a global map."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .errors import GraphValidationError, IngestError, OverviewValidationError
from .paths import normalize_path

# Map kinds
BUSINESS_COMPONENT = "business-component"
FUNCTION_CALL = "function-call"
LOCAL = "local"
MAP_KINDS = (BUSINESS_COMPONENT, FUNCTION_CALL, LOCAL)
GLOBAL_KINDS = (BUSINESS_COMPONENT, FUNCTION_CALL)

# Relation kinds
BUSINESS_PURPOSE = "business-purpose"
INHERITANCE = "inheritance"
CALL_RELATION = "call-relation"
PURPOSE = "purpose"
IMPLEMENTS = "implements"
DEFINES = "defines"
USED_BY = "used-by"
CONTAINS = "contains"

#: Which relation kinds an edge may carry, by map kind.
LEGAL_RELATIONS: Mapping[str, frozenset[str]] = {
    BUSINESS_COMPONENT: frozenset({BUSINESS_PURPOSE}),
    FUNCTION_CALL: frozenset({INHERITANCE, CALL_RELATION, PURPOSE}),
    LOCAL: frozenset({INHERITANCE, IMPLEMENTS, DEFINES, USED_BY, CONTAINS}),
}

#: Relation kinds whose meaning is the free text they carry.
TEXT_RELATIONS = frozenset({BUSINESS_PURPOSE, PURPOSE})

MEMBER_KINDS = ("Interface", "Class", "Method", "Variable")


def legal_relations(kind: str) -> frozenset[str]:
    try:
        return LEGAL_RELATIONS[kind]
    except KeyError:
        raise GraphValidationError(f"unknown map kind: {kind!r}") from None


@dataclass(frozen=True)
class Relation:
    kind: str
    text: str = ""

    def __post_init__(self):
        if self.kind not in TEXT_RELATIONS and self.text:
            raise GraphValidationError(
                f"relation {self.kind!r} does not carry text"
            )


@dataclass(frozen=True)
class MapNode:
    """One graph node. Business/function-call nodes fill the name,
    description and key_* fields; local-map nodes fill member_kind."""

    node_id: str
    label: str = ""
    name: str = ""
    description: str = ""
    key_functions: tuple[str, ...] = ()
    key_variables: tuple[str, ...] = ()
    key_files: tuple[str, ...] = ()
    member_kind: Optional[str] = None

    def __post_init__(self):
        if not self.node_id:
            raise GraphValidationError("node_id must be non-empty")
        if self.member_kind is not None and self.member_kind not in MEMBER_KINDS:
            raise GraphValidationError(
                f"member_kind must be one of {MEMBER_KINDS}, got {self.member_kind!r}"
            )


@dataclass(frozen=True)
class MapEdge:
    src: str
    dst: str
    relation: Relation
    annotation: str = ""

    def sort_key(self):
        return (self.src, self.dst, self.relation.kind, self.relation.text, self.annotation)


@dataclass(frozen=True)
class MapGraph:
    kind: str
    nodes: tuple[MapNode, ...]
    edges: tuple[MapEdge, ...] = ()
    module_groups: tuple[tuple[str, tuple[str, ...]], ...] = ()

    def __post_init__(self):
        if self.kind not in MAP_KINDS:
            raise GraphValidationError(f"unknown map kind: {self.kind!r}")
        # Canonical order makes dataclass equality structural.
        object.__setattr__(
            self, "nodes", tuple(sorted(self.nodes, key=lambda n: n.node_id))
        )
        object.__setattr__(
            self, "edges", tuple(sorted(self.edges, key=MapEdge.sort_key))
        )
        groups = tuple(
            (name, tuple(sorted(set(members))))
            for name, members in sorted(self.module_groups)
        )
        object.__setattr__(self, "module_groups", groups)
        self._validate()

    def _validate(self):
        ids = [n.node_id for n in self.nodes]
        seen = set()
        for node_id in ids:
            if node_id in seen:
                raise GraphValidationError(f"duplicate node id: {node_id!r}")
            seen.add(node_id)
        allowed = legal_relations(self.kind)
        for edge in self.edges:
            if edge.src == edge.dst:
                raise GraphValidationError(f"self-loop on node {edge.src!r}")
            for endpoint in (edge.src, edge.dst):
                if endpoint not in seen:
                    raise GraphValidationError(
                        f"edge references undeclared node {endpoint!r}"
                    )
            if edge.relation.kind not in allowed:
                raise GraphValidationError(
                    f"relation {edge.relation.kind!r} is illegal for "
                    f"{self.kind} graphs (allowed: {sorted(allowed)})"
                )
        for name, members in self.module_groups:
            for member in members:
                if member not in seen:
                    raise GraphValidationError(
                        f"module group {name!r} references unknown node {member!r}"
                    )

    def node(self, node_id: str) -> MapNode:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise GraphValidationError(f"no node {node_id!r} in graph")

    def node_ids(self) -> frozenset[str]:
        return frozenset(n.node_id for n in self.nodes)

    def groups_as_dict(self) -> dict[str, frozenset[str]]:
        return {name: frozenset(members) for name, members in self.module_groups}


def files_in_graph(graph: MapGraph) -> frozenset[str]:
    """Union of all key_files across nodes, normalized like the scanner.

    Entries the normalizer rejects (absolute paths, ".." segments) are kept
    verbatim: they still count as graph-claimed files and will surface as
    false positives against any snapshot.
    """
    found: set[str] = set()
    for node in graph.nodes:
        for raw in node.key_files:
            try:
                found.add(normalize_path(raw))
            except IngestError:
                if raw.strip():
                    found.add(raw.strip())
    return frozenset(found)


@dataclass(frozen=True)
class ModuleSummary:
    name: str
    description: str = ""
    component_names: tuple[str, ...] = ()


@dataclass(frozen=True)
class GuideStep:
    step_number: int
    text: str
    module_name: str = ""
    file_name: Optional[str] = None

    def __post_init__(self):
        if self.file_name and not self.module_name:
            raise OverviewValidationError(
                f"guide step {self.step_number} names file {self.file_name!r} "
                "but no module; file references must link to a module"
            )


@dataclass(frozen=True)
class GlobalOverview:
    summary: str
    entry_point: str
    how_to_run: str
    modules: tuple[ModuleSummary, ...]
    architecture_guide: tuple[GuideStep, ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        steps = sorted(s.step_number for s in self.architecture_guide)
        if steps != list(range(1, len(steps) + 1)):
            raise OverviewValidationError(
                f"guide step numbers must be contiguous 1..n, got {steps}"
            )
        ordered = tuple(
            sorted(self.architecture_guide, key=lambda s: s.step_number)
        )
        object.__setattr__(self, "architecture_guide", ordered)

    def to_dict(self) -> dict:
        return {
            "summary": self.summary,
            "entryPoint": self.entry_point,
            "howToRun": self.how_to_run,
            "modules": [
                {
                    "name": m.name,
                    "description": m.description,
                    "components": list(m.component_names),
                }
                for m in self.modules
            ],
            "architectureGuide": [
                {
                    "stepNumber": s.step_number,
                    "text": s.text,
                    "moduleName": s.module_name,
                    **({"fileName": s.file_name} if s.file_name else {}),
                }
                for s in self.architecture_guide
            ],
        }
