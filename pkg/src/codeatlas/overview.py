"""Validate the structured overview JSON a completion carries."""

from __future__ import annotations

import json
import re
from typing import Optional

from .errors import OverviewValidationError
from .model import GlobalOverview, GuideStep, ModuleSummary

REQUIRED_FIELDS = ("summary", "entryPoint", "howToRun", "modules", "architectureGuide")

# Accepted spellings for each canonical field; completions drift.
_ALIASES = {
    "architectureGuide": ("architectureGuide", "projectArchitectureGuide"),
    "summary": ("summary",),
    "entryPoint": ("entryPoint",),
    "howToRun": ("howToRun",),
    "modules": ("modules",),
}

_COMPONENT_KEYS = ("components", "componentNames")


def _pick(data: dict, field: str):
    for alias in _ALIASES[field]:
        if alias in data:
            return data[alias], alias
    return None, None


def parse_overview(json_text: str) -> GlobalOverview:
    """Parse and validate overview JSON.

    Unknown top-level fields are kept as warnings on the returned object;
    missing required fields are reported together in one error.
    """
    try:
        data = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise OverviewValidationError(f"malformed overview JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise OverviewValidationError("overview JSON must be an object")

    consumed: set[str] = set()
    values: dict[str, object] = {}
    missing: list[str] = []
    for field in REQUIRED_FIELDS:
        value, alias = _pick(data, field)
        if alias is None:
            missing.append(field)
        else:
            values[field] = value
            consumed.add(alias)
    if missing:
        raise OverviewValidationError(
            f"overview is missing required fields: {', '.join(missing)}",
            missing_fields=missing,
        )

    warnings = tuple(
        f"ignored unknown field {key!r}" for key in data if key not in consumed
    )

    modules = []
    raw_modules = values["modules"]
    if not isinstance(raw_modules, list):
        raise OverviewValidationError("'modules' must be a list")
    for entry in raw_modules:
        if not isinstance(entry, dict) or "name" not in entry:
            raise OverviewValidationError(f"module entry needs a name: {entry!r}")
        component_names = ()
        for key in _COMPONENT_KEYS:
            if key in entry:
                component_names = tuple(str(c) for c in entry[key])
                break
        modules.append(
            ModuleSummary(
                name=str(entry["name"]),
                description=str(entry.get("description", "")),
                component_names=component_names,
            )
        )

    steps = []
    raw_guide = values["architectureGuide"]
    if not isinstance(raw_guide, list):
        raise OverviewValidationError("'architectureGuide' must be a list")
    for entry in raw_guide:
        if not isinstance(entry, dict):
            raise OverviewValidationError(f"guide step must be an object: {entry!r}")
        try:
            number = int(entry["stepNumber"])
        except (KeyError, TypeError, ValueError):
            raise OverviewValidationError(
                f"guide step needs an integer stepNumber: {entry!r}"
            ) from None
        file_name = entry.get("fileName") or None
        steps.append(
            GuideStep(
                step_number=number,
                text=str(entry.get("text", "")),
                module_name=str(entry.get("moduleName", "") or ""),
                file_name=file_name,
            )
        )

    return GlobalOverview(
        summary=str(values["summary"]),
        entry_point=str(values["entryPoint"]),
        how_to_run=str(values["howToRun"]),
        modules=tuple(modules),
        architecture_guide=tuple(steps),
        warnings=warnings,
    )


_JSON_FENCE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.S)


def extract_overview_json(text: str) -> Optional[str]:
    """Find the overview JSON object inside a prose completion.

    Prefers fenced blocks; falls back to brace matching on the first
    ``{`` that yields a parseable object containing a known field.
    Returns None when nothing plausible is present.
    """
    for m in _JSON_FENCE.finditer(text):
        candidate = m.group(1).strip()
        if _plausible(candidate):
            return candidate
    for start in range(len(text)):
        if text[start] != "{":
            continue
        candidate = _balanced_from(text, start)
        if candidate and _plausible(candidate):
            return candidate
    return None


def _plausible(candidate: str) -> bool:
    try:
        data = json.loads(candidate)
    except json.JSONDecodeError:
        return False
    if not isinstance(data, dict):
        return False
    return any(
        alias in data for aliases in _ALIASES.values() for alias in aliases
    )


def _balanced_from(text: str, start: int) -> Optional[str]:
    depth = 0
    in_string = False
    i = start
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
    return None
