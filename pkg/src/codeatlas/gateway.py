"""Provider abstraction: upload context files to a retrieval store and
submit prompts for completion.

Two providers implement the same two-method surface: a live HTTP provider
(OpenAI-compatible endpoints) and a scripted fake that replays canned
responses, which makes the whole generate/parse/refine/measure pipeline
deterministic and testable offline.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from .errors import (
    AuthenticationError,
    ConfigurationError,
    ContextCapExceededError,
    GatewayError,
    RetriesExhaustedError,
    ScriptExhaustedError,
)
from .ingest import UPLOAD_CAP, ContextSet
from .prompts import AssembledPrompt

LIVE = "live"
SCRIPTED = "scripted"


@dataclass(frozen=True)
class ProviderConfig:
    provider_kind: str = SCRIPTED
    model_name: str = "gpt-4o-mini"
    api_credential_ref: str = ""  # env var NAME, never the secret itself
    base_url: str = "https://api.openai.com"
    request_timeout: float = 60.0
    max_retries: int = 3
    retry_backoff_ms: int = 500  # doubles per retry
    script_path: Optional[str] = None

    def __post_init__(self):
        if self.provider_kind not in (LIVE, SCRIPTED):
            raise ConfigurationError(f"unknown provider kind: {self.provider_kind!r}")
        if self.max_retries < 0:
            raise ConfigurationError("max_retries must be non-negative")

    def credential(self) -> str:
        if not self.api_credential_ref:
            raise ConfigurationError(
                "live provider needs api_credential_ref naming the env var "
                "that holds the API key"
            )
        value = os.environ.get(self.api_credential_ref)
        if not value:
            raise ConfigurationError(
                f"environment variable {self.api_credential_ref} is not set"
            )
        return value


def load_provider_config(path: str | Path) -> ProviderConfig:
    """Read a provider config from a TOML or JSON file. No secrets on disk:
    the file names the credential env var only."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix in (".toml", ".tml"):
        try:
            import tomllib  # Python >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        data = tomllib.loads(text)
    else:
        data = json.loads(text)
    known = {
        "provider": "provider_kind",
        "model": "model_name",
        "credential_env": "api_credential_ref",
        "base_url": "base_url",
        "timeout_seconds": "request_timeout",
        "max_retries": "max_retries",
        "retry_backoff_ms": "retry_backoff_ms",
        "script": "script_path",
    }
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigurationError(f"unknown config key {key!r} in {path}")
        kwargs[known[key]] = value
    return ProviderConfig(**kwargs)


@dataclass(frozen=True)
class ContextHandle:
    handle_id: str
    uploaded_paths: tuple[str, ...]
    created_at: float

    def __post_init__(self):
        if len(self.uploaded_paths) > UPLOAD_CAP:
            raise ContextCapExceededError(
                f"{len(self.uploaded_paths)} files exceed the provider cap "
                f"of {UPLOAD_CAP}"
            )


@dataclass(frozen=True)
class Completion:
    raw_text: str
    prompt_ref: str  # templateId@version
    latency_ms: int
    attempt: int


def _check_context(context: ContextSet, file_contents: Mapping[str, str]) -> None:
    if len(context.selected_paths) > UPLOAD_CAP:
        raise ContextCapExceededError(
            f"{len(context.selected_paths)} files exceed the provider cap of {UPLOAD_CAP}"
        )
    missing = [p for p in context.selected_paths if p not in file_contents]
    if missing:
        raise GatewayError(f"no content provided for: {missing}")


class ScriptedProvider:
    """Deterministic fake provider.

    Responses are consumed in order, one per :meth:`complete` call; asking
    for more than the script holds raises, because that means the test
    harness and the pipeline disagree about call counts.
    """

    def __init__(self, script: Sequence[str]):
        self._script = list(script)
        self._cursor = 0
        self._lock = threading.Lock()
        self._handles: dict[str, dict[str, str]] = {}
        self.upload_calls = 0
        self.complete_calls = 0
        self.prompts: list[AssembledPrompt] = []

    def upload_context(
        self, context: ContextSet, file_contents: Mapping[str, str]
    ) -> ContextHandle:
        _check_context(context, file_contents)
        with self._lock:
            self.upload_calls += 1
            handle_id = f"scripted-{self.upload_calls}"
            self._handles[handle_id] = {
                p: file_contents[p] for p in context.selected_paths
            }
        return ContextHandle(
            handle_id=handle_id,
            uploaded_paths=tuple(context.selected_paths),
            created_at=0.0,  # fixed: scripted runs must serialize byte-identically
        )

    def uploaded_contents(self, handle: ContextHandle) -> dict[str, str]:
        return dict(self._handles[handle.handle_id])

    def complete(self, handle: ContextHandle, prompt: AssembledPrompt) -> Completion:
        with self._lock:
            if handle.handle_id not in self._handles:
                raise GatewayError(f"unknown context handle {handle.handle_id}")
            self.complete_calls += 1
            self.prompts.append(prompt)
            if self._cursor >= len(self._script):
                raise ScriptExhaustedError(
                    f"script exhausted after {len(self._script)} responses"
                )
            raw = self._script[self._cursor]
            self._cursor += 1
        return Completion(
            raw_text=raw,
            prompt_ref=f"{prompt.template_id}@{prompt.template_version}",
            latency_ms=0,
            attempt=1,
        )


class TransportError(GatewayError):
    """Transient transport failure (connection error, timeout); retryable."""


#: transport(method, url, headers, payload, timeout) -> (status, response dict)
Transport = Callable[[str, str, dict, Optional[dict], float], tuple[int, dict]]


def _requests_transport(method, url, headers, payload, timeout):
    import requests

    try:
        response = requests.request(
            method, url, headers=headers, json=payload, timeout=timeout
        )
    except requests.RequestException as exc:
        raise TransportError(str(exc)) from exc
    try:
        body = response.json()
    except ValueError:
        body = {"raw": response.text}
    return response.status_code, body


class LiveProvider:
    """HTTP provider against OpenAI-compatible vector-store + responses
    endpoints, with exponential-backoff retries on transient failures."""

    def __init__(
        self,
        config: ProviderConfig,
        transport: Transport = _requests_transport,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self._transport = transport
        self._sleep = sleeper
        self.upload_calls = 0
        self.complete_calls = 0

    def _headers(self) -> dict:
        return {"Authorization": f"Bearer {self.config.credential()}"}

    def _request(self, method: str, path: str, payload: Optional[dict]) -> tuple[dict, int]:
        """Returns (body, attempt). Retries 429/5xx and transport errors;
        never retries authentication failures."""
        url = self.config.base_url.rstrip("/") + path
        last_error: Exception | None = None
        backoff = self.config.retry_backoff_ms / 1000.0
        for attempt in range(1, self.config.max_retries + 2):
            try:
                status, body = self._transport(
                    method, url, self._headers(), payload, self.config.request_timeout
                )
            except TransportError as exc:
                last_error = exc
            else:
                if status in (401, 403):
                    raise AuthenticationError(
                        f"provider rejected credential ({status}): {body}"
                    )
                if status < 400:
                    return body, attempt
                last_error = GatewayError(f"provider error {status}: {body}")
                if not (status == 429 or status >= 500):
                    raise last_error
            if attempt <= self.config.max_retries:
                self._sleep(backoff)
                backoff *= 2
        raise RetriesExhaustedError(
            f"gave up after {self.config.max_retries + 1} attempts: {last_error}",
            last_error=last_error,
        )

    def upload_context(
        self, context: ContextSet, file_contents: Mapping[str, str]
    ) -> ContextHandle:
        _check_context(context, file_contents)
        self.upload_calls += 1
        body, _ = self._request(
            "POST",
            "/v1/vector_stores",
            {
                "name": f"codeatlas-{context.snapshot_id}",
                "files": [
                    {"path": p, "content": file_contents[p]}
                    for p in context.selected_paths
                ],
            },
        )
        handle_id = body.get("id")
        if not handle_id:
            raise GatewayError(f"provider response carries no store id: {body}")
        return ContextHandle(
            handle_id=str(handle_id),
            uploaded_paths=tuple(context.selected_paths),
            created_at=time.time(),
        )

    def complete(self, handle: ContextHandle, prompt: AssembledPrompt) -> Completion:
        self.complete_calls += 1
        started = time.monotonic()
        body, attempt = self._request(
            "POST",
            "/v1/responses",
            {
                "model": self.config.model_name,
                "input": prompt.rendered_text,
                "tools": [
                    {"type": "file_search", "vector_store_ids": [handle.handle_id]}
                ],
            },
        )
        text = body.get("output_text") or body.get("text") or ""
        if not text:
            raise GatewayError(f"provider returned an empty completion: {body}")
        return Completion(
            raw_text=text,
            prompt_ref=f"{prompt.template_id}@{prompt.template_version}",
            latency_ms=int((time.monotonic() - started) * 1000),
            attempt=attempt,
        )


def load_script(path: str | Path) -> list:
    """Load a scripted-response file: either a flat JSON list of responses
    or ``{"runs": [[...], ...]}`` with one script per evaluation run."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict) and "runs" in data:
        return [list(run) for run in data["runs"]]
    if isinstance(data, list):
        return list(data)
    raise ConfigurationError(f"unrecognized script file shape in {path}")


def build_provider(config: ProviderConfig, script: Optional[Sequence[str]] = None):
    if config.provider_kind == SCRIPTED:
        if script is None:
            if not config.script_path:
                raise ConfigurationError(
                    "scripted provider needs a script (inline or via script_path)"
                )
            script = load_script(config.script_path)
            if script and isinstance(script[0], list):
                raise ConfigurationError(
                    "per-run script file given where a single session script "
                    "was expected"
                )
        return ScriptedProvider(script)
    config.credential()  # fail fast, naming the env var
    return LiveProvider(config)
