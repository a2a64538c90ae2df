"""Prompt templates and the assembler that turns session state into
concrete prompts.

Templates are plain-text files in ``codeatlas/templates/`` with
``[[section: Name]]`` markers and ``{{slot}}`` placeholders. They are
project-agnostic: the only values spliced in are session-derived (prior
outputs, node payloads, file excerpts, questions) plus the generic
few-shot fixtures that ship with the package.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Optional, Sequence

from . import model
from .dotio import parse_dot
from .errors import PromptError
from .model import MapNode

SECTION_NAMES = (
    "TaskDescription",
    "Requirements",
    "FewShotExample",
    "PriorOutput",
    "NodeContext",
    "UserQuestion",
)

GLOBAL_TEMPLATE_FILES = {
    model.BUSINESS_COMPONENT: "global-business.txt",
    model.FUNCTION_CALL: "global-function-call.txt",
}

FEW_SHOT_FILES = {
    "overview": "few-shot-overview.json",
    model.BUSINESS_COMPONENT: "few-shot-map-business.dot",
    model.FUNCTION_CALL: "few-shot-map-function-call.dot",
}

_SECTION_RE = re.compile(r"^\[\[section:\s*(\w+)\]\]\s*$", re.M)
_VERSION_RE = re.compile(r"^\[\[version:\s*(\S+)\]\]\s*$", re.M)
_SLOT_RE = re.compile(r"\{\{(\w+)\}\}")


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    version: str
    sections: tuple[tuple[str, str], ...]  # (section name, body with slots)

    def section(self, name: str) -> str:
        for section_name, body in self.sections:
            if section_name == name:
                return body
        raise PromptError(f"template {self.template_id} has no section {name!r}")

    def section_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.sections)

    def slots(self) -> frozenset[str]:
        return frozenset(
            slot for _, body in self.sections for slot in _SLOT_RE.findall(body)
        )


@dataclass(frozen=True)
class AssembledPrompt:
    template_id: str
    template_version: str
    rendered_text: str
    slot_bindings: tuple[tuple[str, str], ...]

    def binding(self, slot: str) -> str:
        for name, value in self.slot_bindings:
            if name == slot:
                return value
        raise KeyError(slot)


def _read_template_file(filename: str) -> str:
    return resources.files("codeatlas.templates").joinpath(filename).read_text(
        encoding="utf-8"
    )


def load_template(template_id: str, filename: str) -> PromptTemplate:
    text = _read_template_file(filename)
    version_match = _VERSION_RE.search(text)
    version = version_match.group(1) if version_match else "1"
    matches = list(_SECTION_RE.finditer(text))
    if not matches:
        raise PromptError(f"template file {filename} has no sections")
    sections = []
    for i, m in enumerate(matches):
        name = m.group(1)
        if name not in SECTION_NAMES:
            raise PromptError(f"unknown section {name!r} in {filename}")
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        sections.append((name, text[m.end() : end].strip("\n")))
    return PromptTemplate(template_id=template_id, version=version, sections=tuple(sections))


def few_shot_fixture(name: str) -> str:
    """Raw text of a shipped few-shot fixture; they double as parser goldens."""
    return _read_template_file(FEW_SHOT_FILES[name]).strip()


def _render(
    template: PromptTemplate,
    bindings: Mapping[str, str],
    extra_sections: Sequence[tuple[str, str]] = (),
) -> AssembledPrompt:
    parts = []
    for _, body in tuple(template.sections) + tuple(extra_sections):
        rendered = _SLOT_RE.sub(
            lambda m: _lookup(bindings, m.group(1), template.template_id), body
        )
        if rendered.strip():
            parts.append(rendered.strip("\n"))
    text = "\n\n".join(parts) + "\n"
    leftovers = _SLOT_RE.findall(text)
    if leftovers:
        raise PromptError(
            f"unresolved slots in {template.template_id}: {sorted(set(leftovers))}"
        )
    return AssembledPrompt(
        template_id=template.template_id,
        template_version=template.version,
        rendered_text=text,
        slot_bindings=tuple(sorted(bindings.items())),
    )


def _lookup(bindings: Mapping[str, str], slot: str, template_id: str) -> str:
    try:
        return bindings[slot]
    except KeyError:
        raise PromptError(f"no binding for slot {slot!r} in {template_id}") from None


def global_template(kind: str) -> PromptTemplate:
    if kind not in GLOBAL_TEMPLATE_FILES:
        raise PromptError(f"{kind!r} is not a global map kind")
    template_id = "GlobalBusiness" if kind == model.BUSINESS_COMPONENT else "GlobalFunctionCall"
    return load_template(template_id, GLOBAL_TEMPLATE_FILES[kind])


def _few_shot_bindings(kind: str) -> dict[str, str]:
    return {
        "few_shot_overview": few_shot_fixture("overview"),
        "few_shot_map": few_shot_fixture(kind),
    }


def assemble_global(kind: str) -> AssembledPrompt:
    """Initial global-understanding prompt for a business-component or
    function-call map."""
    return _render(global_template(kind), _few_shot_bindings(kind))


def assemble_refinement(
    kind: str,
    prior_graph_dot: str,
    prior_overview_json: str,
    missing_files: Sequence[str] = (),
) -> AssembledPrompt:
    """Refinement prompt: the global prompt plus the prior iteration's
    outputs and an explicit list of files the graph does not cover yet.

    The missing-file list goes beyond merely replaying the prior output; it
    turns "include all files" into a checkable delta for the model.
    """
    parse_dot(prior_graph_dot, kind)  # unparseable prior output is a caller bug
    base = global_template(kind)
    prior = load_template("Refine", "refine-prior-output.txt")
    if missing_files:
        listing = "\n".join(f"- {path}" for path in missing_files)
        clause = (
            "\nThe previous output does not cover the following files from the"
            f" vector store. Add them to the graph and the overview:\n\n{listing}"
        )
    else:
        clause = ""
    bindings = _few_shot_bindings(kind)
    bindings.update(
        prior_dot=prior_graph_dot.strip(),
        prior_overview=prior_overview_json.strip() or "(no overview was produced)",
        missing_files_clause=clause,
    )
    return _render(
        PromptTemplate("Refine", prior.version, base.sections),
        bindings,
        extra_sections=prior.sections,
    )


def _node_context_text(node: MapNode) -> str:
    lines = [f"Name: {node.name or node.node_id}"]
    if node.description:
        lines.append(f"Description: {node.description}")
    if node.key_functions:
        lines.append(f"Key functions: {', '.join(node.key_functions)}")
    if node.key_variables:
        lines.append(f"Key variables: {', '.join(node.key_variables)}")
    if node.key_files:
        lines.append(f"Key files: {', '.join(node.key_files)}")
    return "\n".join(lines)


def assemble_local(
    node: MapNode, excerpts: Sequence[tuple[str, str]] = ()
) -> AssembledPrompt:
    """Local-map prompt for one selected node, with file excerpts inlined."""
    if not node.key_files and not node.key_functions and not excerpts:
        raise PromptError(
            f"node {node.node_id!r} has no key files, no key functions, and no "
            "excerpts; nothing to build a local map from"
        )
    if excerpts:
        excerpt_text = "\n\n".join(
            f"--- {path} ---\n{snippet}" for path, snippet in excerpts
        )
    else:
        excerpt_text = "(no excerpts available; rely on the vector store)"
    template = load_template("LocalMap", "local-map.txt")
    return _render(
        template,
        {"node_context": _node_context_text(node), "excerpts": excerpt_text},
    )


def assemble_query(question: str, selected_node: Optional[MapNode] = None) -> AssembledPrompt:
    """Node-scoped or project-scoped question prompt."""
    if not question or not question.strip():
        raise PromptError("question must be non-empty")
    if selected_node is not None:
        node_section = (
            "\n\nThe user has selected this node; scope the answer to it:\n\n"
            + _node_context_text(selected_node)
        )
    else:
        node_section = ""
    template = load_template("NodeQuery", "node-query.txt")
    return _render(
        template,
        {"question": question.strip(), "node_context_section": node_section},
    )
