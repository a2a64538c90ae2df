"""Repository-relative path normalization.

One normalizer is shared by the scanner, the graph model, and the coverage
metric so that "did the graph mention this file" is always decided on the
same string form: forward slashes, no leading "./", no "."/".." segments,
case preserved.
"""

from __future__ import annotations

from .errors import IngestError


def normalize_path(raw: str) -> str:
    """Normalize a repository-relative path string.

    Backslashes become forward slashes, empty and "." segments are dropped.
    Raises :class:`IngestError` for absolute paths or ".." segments: those
    can escape the repository root and are never valid snapshot members.
    """
    if not isinstance(raw, str) or not raw.strip():
        raise IngestError(f"not a usable path: {raw!r}")
    text = raw.strip().replace("\\", "/")
    if text.startswith("/"):
        raise IngestError(f"absolute path not allowed: {raw!r}")
    segments = [seg for seg in text.split("/") if seg not in ("", ".")]
    if not segments:
        raise IngestError(f"path has no segments: {raw!r}")
    if ".." in segments:
        raise IngestError(f"parent-directory segment not allowed: {raw!r}")
    return "/".join(segments)
