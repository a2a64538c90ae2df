"""Scan a source tree into a normalized file inventory.

The snapshot produced here is the ground truth for the coverage metric:
downstream accuracy is always measured against the *full* snapshot path
set, never against the capped upload selection.
"""

from __future__ import annotations

import fnmatch
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .errors import NoFilesMatchedError, RootNotFoundError, SelectionError
from .paths import normalize_path

logger = logging.getLogger(__name__)

#: Files larger than this are skipped: they cannot be embedded as LLM context.
MAX_FILE_BYTES = 1 * 1024 * 1024

#: Extension (lowercase, no dot) to language label. Anything else maps to
#: ``Other(<ext>)``.
EXTENSION_LANGUAGES: Mapping[str, str] = {
    "py": "Python",
    "java": "Java",
    "sol": "Solidity",
    "js": "JavaScript",
    "jsx": "JavaScript",
    "ts": "JavaScript",
    "tsx": "JavaScript",
}

ALL = "all"
LARGEST_FIRST = "largest-first"
MANIFEST = "manifest"

UPLOAD_CAP = 100


def language_for_extension(ext: str) -> str:
    ext = ext.lower().lstrip(".")
    return EXTENSION_LANGUAGES.get(ext, f"Other({ext})" if ext else "Other()")


@dataclass(frozen=True)
class SourceFile:
    path: str
    language: str
    loc: int
    content_digest: str

    def __post_init__(self):
        if self.loc < 0:
            raise ValueError(f"negative loc for {self.path}")


@dataclass(frozen=True)
class CodebaseSnapshot:
    snapshot_id: str
    root_label: str
    files: tuple[SourceFile, ...]

    def __post_init__(self):
        if not self.files:
            raise NoFilesMatchedError("a snapshot must contain at least one file")
        paths = [f.path for f in self.files]
        if paths != sorted(paths):
            raise ValueError("snapshot files must be sorted by path")
        if len(set(paths)) != len(paths):
            raise ValueError("duplicate path in snapshot")

    @property
    def language_histogram(self) -> dict[str, int]:
        histogram: dict[str, int] = {}
        for f in self.files:
            histogram[f.language] = histogram.get(f.language, 0) + 1
        return histogram

    @property
    def paths(self) -> frozenset[str]:
        return frozenset(f.path for f in self.files)

    @property
    def total_loc(self) -> int:
        return sum(f.loc for f in self.files)

    def to_dict(self) -> dict:
        return {
            "snapshotId": self.snapshot_id,
            "rootLabel": self.root_label,
            "files": [
                {
                    "path": f.path,
                    "language": f.language,
                    "loc": f.loc,
                    "contentDigest": f.content_digest,
                }
                for f in self.files
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CodebaseSnapshot":
        files = tuple(
            SourceFile(
                path=normalize_path(entry["path"]),
                language=entry["language"],
                loc=int(entry["loc"]),
                content_digest=entry["contentDigest"],
            )
            for entry in data["files"]
        )
        return cls(
            snapshot_id=data["snapshotId"],
            root_label=data["rootLabel"],
            files=tuple(sorted(files, key=lambda f: f.path)),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "CodebaseSnapshot":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class ContextSet:
    snapshot_id: str
    selected_paths: tuple[str, ...]
    selection_strategy: str
    manifest: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if len(self.selected_paths) > UPLOAD_CAP:
            raise SelectionError(
                f"context holds {len(self.selected_paths)} files; cap is {UPLOAD_CAP}"
            )


def count_lines(content: str) -> int:
    """Newline-delimited line count; raw, no comment stripping."""
    if not content:
        return 0
    return len(content.splitlines())


def _looks_binary(blob: bytes) -> bool:
    return b"\x00" in blob[:8192]


def scan(
    root_directory: str | Path,
    include_extensions: Iterable[str],
    exclude_globs: Sequence[str] = (),
) -> CodebaseSnapshot:
    """Walk ``root_directory`` and build a snapshot of matching files.

    ``include_extensions`` are matched case-insensitively without dots.
    ``exclude_globs`` are fnmatch patterns tested against the normalized
    relative path. Deterministic: files come back sorted by path.
    """
    root = Path(root_directory)
    if not root.is_dir():
        raise RootNotFoundError(f"root directory not found: {root}")
    wanted = {e.lower().lstrip(".") for e in include_extensions}
    if not wanted:
        raise NoFilesMatchedError("no include extensions given")

    files: list[SourceFile] = []
    for current, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in sorted(filenames):
            full = Path(current) / name
            rel = normalize_path(str(full.relative_to(root)))
            ext = full.suffix.lower().lstrip(".")
            if ext not in wanted:
                continue
            if any(fnmatch.fnmatch(rel, pattern) for pattern in exclude_globs):
                continue
            if full.stat().st_size > MAX_FILE_BYTES:
                logger.warning("skipping %s: larger than %d bytes", rel, MAX_FILE_BYTES)
                continue
            blob = full.read_bytes()
            if _looks_binary(blob):
                logger.warning("skipping %s: binary content", rel)
                continue
            content = blob.decode("utf-8", errors="replace")
            files.append(
                SourceFile(
                    path=rel,
                    language=language_for_extension(ext),
                    loc=count_lines(content),
                    content_digest=hashlib.sha256(blob).hexdigest(),
                )
            )

    if not files:
        raise NoFilesMatchedError(
            f"no files under {root} matched extensions {sorted(wanted)}"
        )
    files.sort(key=lambda f: f.path)
    identity = hashlib.sha256()
    for f in files:
        identity.update(f.path.encode("utf-8"))
        identity.update(f.content_digest.encode("ascii"))
    return CodebaseSnapshot(
        snapshot_id=identity.hexdigest()[:16],
        root_label=root.resolve().name,
        files=tuple(files),
    )


def select_context(
    snapshot: CodebaseSnapshot,
    cap: int = UPLOAD_CAP,
    strategy: str = LARGEST_FIRST,
    manifest: Optional[Sequence[str]] = None,
) -> ContextSet:
    """Choose the files that will be uploaded as LLM context.

    Under the cap everything is taken regardless of strategy. Over the cap,
    ``largest-first`` keeps the top ``cap`` files by line count (ties broken
    by path order); ``manifest`` uses a caller-provided list validated
    against the snapshot.
    """
    if cap < 1:
        raise SelectionError("cap must be at least 1")
    if cap > UPLOAD_CAP:
        raise SelectionError(f"cap cannot exceed the provider limit of {UPLOAD_CAP}")

    all_paths = [f.path for f in snapshot.files]
    if strategy == MANIFEST or manifest is not None:
        if manifest is None:
            raise SelectionError("manifest strategy requires a manifest")
        normalized = [normalize_path(p) for p in manifest]
        unknown = [p for p in normalized if p not in snapshot.paths]
        if unknown:
            raise SelectionError(f"manifest references unknown paths: {unknown}")
        if len(normalized) > cap:
            raise SelectionError(
                f"manifest lists {len(normalized)} files; cap is {cap}"
            )
        return ContextSet(
            snapshot_id=snapshot.snapshot_id,
            selected_paths=tuple(normalized),
            selection_strategy=MANIFEST,
            manifest=tuple(normalized),
        )

    if len(all_paths) <= cap:
        return ContextSet(
            snapshot_id=snapshot.snapshot_id,
            selected_paths=tuple(all_paths),
            selection_strategy=strategy if strategy in (ALL, LARGEST_FIRST) else ALL,
        )

    if strategy == ALL:
        raise SelectionError(
            f"snapshot holds {len(all_paths)} files, over the cap of {cap}; "
            "pick largest-first or provide a manifest"
        )
    if strategy != LARGEST_FIRST:
        raise SelectionError(f"unknown selection strategy: {strategy}")
    # Stable sort on descending loc keeps path order among equal sizes.
    ranked = sorted(snapshot.files, key=lambda f: -f.loc)
    chosen = sorted(f.path for f in ranked[:cap])
    return ContextSet(
        snapshot_id=snapshot.snapshot_id,
        selected_paths=tuple(chosen),
        selection_strategy=LARGEST_FIRST,
    )
