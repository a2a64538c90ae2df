"""HTTP session service: upload a codebase, fetch global maps and the
overview, open per-node local maps, and chat in node scope.

Sessions live in a directory each (snapshot, file contents, map payloads,
traces, chat log) so a restarted service serves cached payloads without
touching the LLM provider again. Within one session, generation and chat
are serialized by a lock; separate sessions run concurrently.
"""

from __future__ import annotations

import io
import json
import threading
import time
import uuid
import zipfile
from collections import defaultdict
from pathlib import Path
from typing import Optional, Sequence

from . import model
from .dotio import extract_dot_block, parse_dot, serialize_dot
from .errors import (
    CodeAtlasError,
    DotSyntaxError,
    GatewayError,
    GraphValidationError,
    IngestError,
    NoFilesMatchedError,
    SessionError,
    UnknownNodeError,
    UnknownSessionError,
)
from .gateway import ContextHandle, ProviderConfig, build_provider
from .ingest import CodebaseSnapshot, scan, select_context
from .prompts import assemble_local, assemble_query
from .refine import STOPPED_PARSE_FAILURE, RefinementTrace, refine

DEFAULT_EXTENSIONS = ("py", "java", "sol", "js", "ts")

URL_KINDS = {
    "business": model.BUSINESS_COMPONENT,
    "function-call": model.FUNCTION_CALL,
}

STATUS_READY = "ready"
STATUS_UPLOAD_FAILED = "uploadFailed"


def _kind_from_url(segment: str) -> str:
    try:
        return URL_KINDS[segment]
    except KeyError:
        raise SessionError(
            f"unknown map kind {segment!r}; use one of {sorted(URL_KINDS)}"
        ) from None


class MapService:
    """Core session logic behind the HTTP surface."""

    def __init__(
        self,
        storage_root: str | Path,
        provider_config: ProviderConfig,
        script: Optional[Sequence[str]] = None,
        include_extensions: Sequence[str] = DEFAULT_EXTENSIONS,
        excerpt_lines: int = 40,
        max_iterations: int = 5,
    ):
        self.root = Path(storage_root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.provider_config = provider_config
        self.script = list(script) if script is not None else None
        self.include_extensions = tuple(include_extensions)
        self.excerpt_lines = excerpt_lines
        self.max_iterations = max_iterations
        self._providers: dict[str, object] = {}
        self._handles: dict[str, ContextHandle] = {}
        self._locks: defaultdict[str, threading.Lock] = defaultdict(threading.Lock)

    # -- storage helpers ----------------------------------------------------
    def _dir(self, session_id: str) -> Path:
        path = self.root / session_id
        if not path.is_dir():
            raise UnknownSessionError(f"no session {session_id!r}")
        return path

    def _meta(self, session_id: str) -> dict:
        return json.loads((self._dir(session_id) / "meta.json").read_text("utf-8"))

    def _write_meta(self, session_dir: Path, meta: dict) -> None:
        (session_dir / "meta.json").write_text(
            json.dumps(meta, indent=2, sort_keys=True) + "\n", "utf-8"
        )

    def _snapshot(self, session_id: str) -> CodebaseSnapshot:
        return CodebaseSnapshot.load(self._dir(session_id) / "snapshot.json")

    def _contents(self, session_id: str) -> dict[str, str]:
        return json.loads((self._dir(session_id) / "contents.json").read_text("utf-8"))

    # -- session lifecycle --------------------------------------------------
    def create_session(
        self,
        server_path: Optional[str] = None,
        archive_bytes: Optional[bytes] = None,
        extensions: Optional[Sequence[str]] = None,
    ) -> dict:
        if (server_path is None) == (archive_bytes is None):
            raise SessionError("provide exactly one of serverPath or archive")
        session_id = uuid.uuid4().hex[:12]
        session_dir = self.root / session_id
        session_dir.mkdir(parents=True)
        try:
            if archive_bytes is not None:
                source_dir = session_dir / "source"
                source_dir.mkdir()
                with zipfile.ZipFile(io.BytesIO(archive_bytes)) as archive:
                    archive.extractall(source_dir)
                scan_root = source_dir
            else:
                scan_root = Path(server_path)
            snapshot = scan(scan_root, extensions or self.include_extensions)
        except (IngestError, zipfile.BadZipFile, FileNotFoundError):
            _remove_tree(session_dir)
            raise
        snapshot.save(session_dir / "snapshot.json")
        contents = {
            f.path: (scan_root / f.path).read_text("utf-8", errors="replace")
            for f in snapshot.files
        }
        (session_dir / "contents.json").write_text(
            json.dumps(contents, sort_keys=True), "utf-8"
        )
        meta = {
            "sessionId": session_id,
            "status": STATUS_READY,
            "createdAt": time.time(),
            "fileCount": len(snapshot.files),
        }
        try:
            self._connect(session_id, snapshot, contents)
        except GatewayError as exc:
            # Session survives in a retryable "ingested, not uploaded" state.
            meta["status"] = STATUS_UPLOAD_FAILED
            meta["uploadError"] = str(exc)
        self._write_meta(session_dir, meta)
        return {
            "sessionId": session_id,
            "status": meta["status"],
            "fileCount": len(snapshot.files),
        }

    def _connect(self, session_id: str, snapshot, contents) -> None:
        provider = build_provider(self.provider_config, script=self.script)
        context = select_context(snapshot)
        handle = provider.upload_context(context, contents)
        self._providers[session_id] = provider
        self._handles[session_id] = handle

    def _ensure_provider(self, session_id: str):
        if session_id not in self._providers:
            snapshot = self._snapshot(session_id)
            contents = self._contents(session_id)
            self._connect(session_id, snapshot, contents)
            meta = self._meta(session_id)
            if meta.get("status") != STATUS_READY:
                meta["status"] = STATUS_READY
                meta.pop("uploadError", None)
                self._write_meta(self._dir(session_id), meta)
        return self._providers[session_id], self._handles[session_id]

    def get_session(self, session_id: str) -> dict:
        meta = self._meta(session_id)
        snapshot = self._snapshot(session_id)
        generated = sorted(
            url
            for url, kind in URL_KINDS.items()
            if (self._dir(session_id) / "maps" / kind / "payload.json").exists()
        )
        return {
            "sessionId": session_id,
            "status": meta["status"],
            "rootLabel": snapshot.root_label,
            "fileCount": len(snapshot.files),
            "generatedMaps": generated,
        }

    # -- global maps --------------------------------------------------------
    def get_global(self, session_id: str, kind_segment: str) -> dict:
        kind = _kind_from_url(kind_segment)
        map_dir = self._dir(session_id) / "maps" / kind
        payload_file = map_dir / "payload.json"
        with self._locks[session_id]:
            if payload_file.exists():
                return json.loads(payload_file.read_text("utf-8"))
            return self._generate_global(session_id, kind, map_dir)

    def regenerate(self, session_id: str, kind_segment: str) -> dict:
        kind = _kind_from_url(kind_segment)
        map_dir = self._dir(session_id) / "maps" / kind
        with self._locks[session_id]:
            # Prior traces are kept, versioned by timestamp; only the served
            # payload and caches are discarded.
            payload_file = map_dir / "payload.json"
            if payload_file.exists():
                stamp = int(time.time() * 1000)
                payload_file.rename(map_dir / f"payload-{stamp}.json")
            local_dir = self._dir(session_id) / "local"
            if local_dir.is_dir():
                for cached in local_dir.glob(f"{kind}-*.json"):
                    cached.unlink()
            self._providers.pop(session_id, None)  # fresh provider session
            self._handles.pop(session_id, None)
            return self._generate_global(session_id, kind, map_dir)

    def _generate_global(self, session_id: str, kind: str, map_dir: Path) -> dict:
        provider, handle = self._ensure_provider(session_id)
        snapshot = self._snapshot(session_id)
        trace = refine(
            provider,
            handle,
            snapshot,
            kind,
            session_id=f"{session_id}-{kind}",
            max_iterations=self.max_iterations,
        )
        map_dir.mkdir(parents=True, exist_ok=True)
        trace.save(map_dir)
        if trace.stopped_because == STOPPED_PARSE_FAILURE:
            raw = trace.iterations[-1].raw_completion if trace.iterations else ""
            raise SessionError(
                f"map generation failed to parse; raw completion attached: {raw}"
            )
        graph = trace.final_graph()
        overview = trace.final_overview()
        payload = {
            "sessionId": session_id,
            "kind": kind,
            "graphDot": serialize_dot(graph),
            "overview": overview.to_dict() if overview else None,
            "trace": _trace_summary(trace),
        }
        (map_dir / "graph.dot").write_text(payload["graphDot"], "utf-8")
        if overview:
            (map_dir / "overview.json").write_text(
                json.dumps(overview.to_dict(), indent=2, sort_keys=True) + "\n", "utf-8"
            )
        (map_dir / "payload.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8"
        )
        return json.loads((map_dir / "payload.json").read_text("utf-8"))

    def get_trace(self, session_id: str, kind_segment: str) -> dict:
        kind = _kind_from_url(kind_segment)
        trace_file = (
            self._dir(session_id) / "maps" / kind / f"trace-{session_id}-{kind}.json"
        )
        if not trace_file.exists():
            raise SessionError(f"no trace for {kind_segment} yet")
        return json.loads(trace_file.read_text("utf-8"))

    # -- local maps ---------------------------------------------------------
    def get_local(self, session_id: str, kind_segment: str, node_id: str) -> dict:
        kind = _kind_from_url(kind_segment)
        session_dir = self._dir(session_id)
        cache_file = session_dir / "local" / f"{kind}-{node_id}.json"
        with self._locks[session_id]:
            if cache_file.exists():
                return json.loads(cache_file.read_text("utf-8"))
            payload_file = session_dir / "maps" / kind / "payload.json"
            if not payload_file.exists():
                raise SessionError(
                    f"generate the {kind_segment} map before requesting local maps"
                )
            stored = json.loads(payload_file.read_text("utf-8"))
            graph = parse_dot(stored["graphDot"], kind)
            if node_id not in graph.node_ids():
                raise UnknownNodeError(
                    f"node {node_id!r} is not in the {kind_segment} map"
                )
            node = graph.node(node_id)
            result = self._generate_local(session_id, node)
            cache_file.parent.mkdir(parents=True, exist_ok=True)
            cache_file.write_text(
                json.dumps(result, indent=2, sort_keys=True) + "\n", "utf-8"
            )
            return result

    def _generate_local(self, session_id: str, node) -> dict:
        contents = self._contents(session_id)
        excerpts = []
        for path in node.key_files:
            if path in contents:
                lines = contents[path].splitlines()[: self.excerpt_lines]
                excerpts.append((path, "\n".join(lines)))
        prompt = assemble_local(node, excerpts)
        provider, handle = self._ensure_provider(session_id)
        completion = provider.complete(handle, prompt)
        raw = completion.raw_text
        try:
            dot_text = extract_dot_block(raw)
            graph = parse_dot(dot_text, model.LOCAL)
        except (DotSyntaxError, GraphValidationError):
            import dataclasses

            from .refine import FORMAT_REMINDER

            reminder = dataclasses.replace(
                prompt, rendered_text=prompt.rendered_text + FORMAT_REMINDER
            )
            completion = provider.complete(handle, reminder)
            raw = completion.raw_text
            dot_text = extract_dot_block(raw)  # second failure propagates
            graph = parse_dot(dot_text, model.LOCAL)
        explanation = (raw.replace(dot_text, "")).strip()
        return {
            "nodeId": node.node_id,
            "graphDot": serialize_dot(graph),
            "explanation": explanation,
        }

    # -- chat ---------------------------------------------------------------
    def chat(
        self, session_id: str, question: str, selected_node_id: Optional[str] = None
    ) -> dict:
        session_dir = self._dir(session_id)
        with self._locks[session_id]:
            node = None
            if selected_node_id is not None:
                node = self._find_node(session_dir, selected_node_id)
            prompt = assemble_query(question, node)
            provider, handle = self._ensure_provider(session_id)
            completion = provider.complete(handle, prompt)
            entry = {
                "question": question,
                "selectedNodeId": selected_node_id,
                "nodePayload": _node_payload(node) if node else None,
                "answer": completion.raw_text,
                "timestamp": time.time(),
            }
            log_file = session_dir / "chat.json"
            log = (
                json.loads(log_file.read_text("utf-8")) if log_file.exists() else []
            )
            log.append(entry)
            log_file.write_text(json.dumps(log, indent=2) + "\n", "utf-8")
            return entry

    def chat_log(self, session_id: str) -> list:
        log_file = self._dir(session_id) / "chat.json"
        return json.loads(log_file.read_text("utf-8")) if log_file.exists() else []

    def _find_node(self, session_dir: Path, node_id: str):
        for kind in URL_KINDS.values():
            payload_file = session_dir / "maps" / kind / "payload.json"
            if not payload_file.exists():
                continue
            graph = parse_dot(
                json.loads(payload_file.read_text("utf-8"))["graphDot"], kind
            )
            if node_id in graph.node_ids():
                return graph.node(node_id)
        raise UnknownNodeError(f"node {node_id!r} is not in any generated map")


def _node_payload(node) -> dict:
    return {
        "nodeId": node.node_id,
        "name": node.name,
        "description": node.description,
        "keyFunctions": list(node.key_functions),
        "keyVariables": list(node.key_variables),
        "keyFiles": list(node.key_files),
    }


def _trace_summary(trace: RefinementTrace) -> dict:
    return {
        "stoppedBecause": trace.stopped_because,
        "iterations": [
            {
                "index": i.index,
                "tp": i.report.true_positives,
                "fp": i.report.false_positives,
                "fn": i.report.false_negatives,
                "accuracy": float(i.report.accuracy),
                "coverageDelta": i.coverage_delta,
            }
            for i in trace.iterations
            if i.report is not None
        ],
    }


def _remove_tree(path: Path) -> None:
    import shutil

    shutil.rmtree(path, ignore_errors=True)


# ---------------------------------------------------------------------------
# FastAPI surface

def create_app(service: MapService):
    import base64

    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse

    app = FastAPI(title="codeatlas", version="0.1.0")

    def error_body(code: str, exc: Exception) -> dict:
        return {"code": code, "message": str(exc), "detail": type(exc).__name__}

    @app.exception_handler(CodeAtlasError)
    async def handle_domain_error(request: Request, exc: CodeAtlasError):
        if isinstance(exc, (UnknownSessionError, UnknownNodeError)):
            status, code = 404, "not-found"
        elif isinstance(exc, NoFilesMatchedError):
            status, code = 400, "zero-files"
        elif isinstance(exc, GatewayError):
            status, code = 502, "gateway-error"
        else:
            status, code = 400, "bad-request"
        return JSONResponse(status_code=status, content=error_body(code, exc))

    @app.post("/sessions", status_code=201)
    async def create_session(body: dict):
        archive = body.get("archiveBase64")
        return service.create_session(
            server_path=body.get("serverPath"),
            archive_bytes=base64.b64decode(archive) if archive else None,
            extensions=body.get("extensions"),
        )

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        return service.get_session(session_id)

    @app.get("/sessions/{session_id}/maps/{kind}")
    async def get_global(session_id: str, kind: str):
        return service.get_global(session_id, kind)

    @app.post("/sessions/{session_id}/maps/{kind}/regenerate")
    async def regenerate(session_id: str, kind: str):
        return service.regenerate(session_id, kind)

    @app.get("/sessions/{session_id}/maps/{kind}/nodes/{node_id}/local")
    async def get_local(session_id: str, kind: str, node_id: str):
        return service.get_local(session_id, kind, node_id)

    @app.post("/sessions/{session_id}/chat")
    async def chat(session_id: str, body: dict):
        question = body.get("question", "")
        return service.chat(session_id, question, body.get("selectedNodeId"))

    @app.get("/sessions/{session_id}/chat")
    async def chat_log(session_id: str):
        return service.chat_log(session_id)

    @app.get("/sessions/{session_id}/trace/{kind}")
    async def get_trace(session_id: str, kind: str):
        return service.get_trace(session_id, kind)

    return app
