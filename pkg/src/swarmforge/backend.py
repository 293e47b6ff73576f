"""Model and search backends with live, record, and replay modes.

Every stage of the engine talks to one Backend interface: ``complete``
for text completions and ``search`` for web lookups. Live mode POSTs to
an HTTP endpoint with retries; record mode wraps any backend and appends
(fingerprint, response) pairs to a transcript file; replay mode serves
responses from a transcript keyed by request fingerprint and never
touches the network, which makes whole pipeline runs deterministic and
testable offline.

Fingerprints are order-independent hashes of normalized request content:
trailing whitespace is trimmed per line, tool declarations are sorted by
name, and temperature is excluded (responses are canned anyway).
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

from .schema import (
    FieldSchema,
    JsonValue,
    StructuredOutputError,
    canonical_json,
    extract_structured,
    sha256_hex,
)

ROLES = ("user", "assistant", "tool")

DEFAULT_API_KEY_ENV = "SWARMFORGE_API_KEY"
DEFAULT_API_URL_ENV = "SWARMFORGE_API_URL"
DEFAULT_SEARCH_URL_ENV = "SWARMFORGE_SEARCH_URL"


class BackendError(Exception):
    """Base class for backend failures."""


class TransportError(BackendError):
    """A live call failed after retries; retryable at a higher level."""


class ReplayMissError(BackendError):
    """The replay transcript has no entry for the issued request.

    Fatal: it signals nondeterminism between the recorded and the
    replayed pipeline.
    """


class CredentialError(BackendError):
    """Live mode was requested without the required credentials."""


class TranscriptError(BackendError):
    """A transcript file is missing or does not parse."""


# ---------------------------------------------------------------------------
# Request / response types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}

    @classmethod
    def from_dict(cls, raw: dict) -> "Message":
        return cls(role=str(raw["role"]), content=str(raw["content"]))


@dataclass(frozen=True)
class ToolDeclaration:
    name: str
    description: str = ""
    parameter_schema: tuple[FieldSchema, ...] = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "parameter_schema": [f.to_dict() for f in self.parameter_schema],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ToolDeclaration":
        return cls(
            name=str(raw["name"]),
            description=str(raw.get("description", "")),
            parameter_schema=tuple(
                FieldSchema.from_dict(f) for f in raw.get("parameter_schema", [])
            ),
        )


# Tools the engine knows how to execute at runtime.
WEB_SEARCH_TOOL = ToolDeclaration(
    name="web_search",
    description="Search the web and return ranked results.",
    parameter_schema=(
        FieldSchema("query", "text", "search query"),
        FieldSchema("max_results", "number", "optional result cap"),
    ),
)
FILE_GENERATOR_TOOL = ToolDeclaration(
    name="file_generator",
    description="Write a text file into the run directory and return its path.",
    parameter_schema=(
        FieldSchema("path", "text", "relative file path"),
        FieldSchema("content", "text", "file content"),
    ),
)
TOOL_REGISTRY: dict[str, ToolDeclaration] = {
    t.name: t for t in (WEB_SEARCH_TOOL, FILE_GENERATOR_TOOL)
}


@dataclass
class ModelRequest:
    system_prompt: str
    messages: list[Message]
    tool_declarations: list[ToolDeclaration] = field(default_factory=list)
    max_output_tokens: int = 2048
    temperature: float = 0.0


def validate_request(request: ModelRequest) -> list[str]:
    """Check ModelRequest invariants; returns a list of problems."""
    problems = []
    if not request.messages:
        problems.append("messages must be non-empty for completion calls")
    seen = set()
    for decl in request.tool_declarations:
        if decl.name in seen:
            problems.append(f"duplicate tool declaration {decl.name!r}")
        seen.add(decl.name)
    if request.max_output_tokens <= 0:
        problems.append("max_output_tokens must be positive")
    if not 0.0 <= request.temperature <= 2.0:
        problems.append("temperature must be within [0, 2]")
    prev = None
    for i, msg in enumerate(request.messages):
        if msg.role not in ROLES:
            problems.append(f"message {i} has unknown role {msg.role!r}")
            continue
        if i == 0 and msg.role != "user":
            problems.append("conversation must start with a user message")
        if prev is not None:
            # Roles alternate, except tool results may follow an assistant
            # tool call (or another tool result).
            if msg.role == prev and msg.role != "tool":
                problems.append(f"messages {i - 1} and {i} repeat role {msg.role!r}")
            if msg.role == "tool" and prev == "user":
                problems.append(f"message {i}: tool result cannot follow a user message")
        prev = msg.role
    return problems


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: dict

    def to_dict(self) -> dict:
        return {"name": self.name, "arguments": self.arguments}

    @classmethod
    def from_dict(cls, raw: dict) -> "ToolCall":
        return cls(name=str(raw["name"]), arguments=dict(raw.get("arguments", {})))


@dataclass(frozen=True)
class ModelResponse:
    text: str = ""
    tool_calls: tuple[ToolCall, ...] = ()
    token_usage: tuple[int, int] = (0, 0)

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "tool_calls": [tc.to_dict() for tc in self.tool_calls],
            "token_usage": list(self.token_usage),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelResponse":
        usage = raw.get("token_usage", [0, 0])
        return cls(
            text=str(raw.get("text", "")),
            tool_calls=tuple(ToolCall.from_dict(tc) for tc in raw.get("tool_calls", [])),
            token_usage=(int(usage[0]), int(usage[1])),
        )


@dataclass(frozen=True)
class SearchResult:
    title: str
    url: str
    snippet: str

    def __post_init__(self) -> None:
        if not self.url:
            raise ValueError("search result url must be non-empty")

    def to_dict(self) -> dict:
        return {"title": self.title, "url": self.url, "snippet": self.snippet}

    @classmethod
    def from_dict(cls, raw: dict) -> "SearchResult":
        return cls(
            title=str(raw.get("title", "")),
            url=str(raw["url"]),
            snippet=str(raw.get("snippet", "")),
        )


# ---------------------------------------------------------------------------
# Fingerprinting
# ---------------------------------------------------------------------------


def normalize_text(text: str) -> str:
    return "\n".join(line.rstrip() for line in text.split("\n"))


def normalized_request_payload(request: ModelRequest) -> dict:
    tools = sorted(request.tool_declarations, key=lambda t: t.name)
    return {
        "kind": "complete",
        "system": normalize_text(request.system_prompt),
        "messages": [
            {"role": m.role, "content": normalize_text(m.content)} for m in request.messages
        ],
        "tools": [
            {
                "name": t.name,
                "description": normalize_text(t.description),
                "parameters": [f.to_dict() for f in t.parameter_schema],
            }
            for t in tools
        ],
        "max_output_tokens": request.max_output_tokens,
    }


def fingerprint_request(request: ModelRequest) -> str:
    return sha256_hex(canonical_json(normalized_request_payload(request)))


def fingerprint_search(query: str, max_results: int) -> str:
    payload = {"kind": "search", "query": query.strip(), "max_results": max_results}
    return sha256_hex(canonical_json(payload))


# ---------------------------------------------------------------------------
# Transcripts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TranscriptEntry:
    fingerprint: str
    kind: str  # "complete" | "search"
    response: JsonValue

    def to_dict(self) -> dict:
        return {"fingerprint": self.fingerprint, "kind": self.kind, "response": self.response}


@dataclass
class Transcript:
    entries: list[TranscriptEntry] = field(default_factory=list)
    mode: str = "replay"  # "record" | "replay"

    def __post_init__(self) -> None:
        self._index: dict[str, TranscriptEntry] = {}
        for entry in self.entries:
            self._index.setdefault(entry.fingerprint, entry)

    def lookup(self, fingerprint: str) -> TranscriptEntry | None:
        return self._index.get(fingerprint)

    def add(self, entry: TranscriptEntry) -> bool:
        """Append an entry; returns False when the fingerprint is already present."""
        if entry.fingerprint in self._index:
            return False
        self.entries.append(entry)
        self._index[entry.fingerprint] = entry
        return True

    def to_list(self) -> list[dict]:
        return [e.to_dict() for e in self.entries]

    @classmethod
    def from_list(cls, raw: list, mode: str = "replay") -> "Transcript":
        entries = [
            TranscriptEntry(
                fingerprint=str(item["fingerprint"]),
                kind=str(item["kind"]),
                response=item["response"],
            )
            for item in raw
        ]
        return cls(entries=entries, mode=mode)


def read_transcript(path: str | Path, mode: str = "replay") -> Transcript:
    path = Path(path)
    if not path.exists():
        raise TranscriptError(f"transcript file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise TranscriptError(f"transcript file {path} does not parse: {exc}") from exc
    if not isinstance(raw, list):
        raise TranscriptError(f"transcript file {path} must be a JSON array of entries")
    return Transcript.from_list(raw, mode=mode)


def write_transcript(transcript: Transcript, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(
        json.dumps(transcript.to_list(), indent=2, ensure_ascii=True) + "\n",
        encoding="utf-8",
    )
    tmp.replace(path)


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------


class Backend:
    """Interface: complete(request) -> ModelResponse; search(query, n) -> results."""

    def complete(self, request: ModelRequest) -> ModelResponse:
        raise NotImplementedError

    def search(self, query: str, max_results: int) -> list[SearchResult]:
        raise NotImplementedError


def _check_complete_preconditions(request: ModelRequest) -> None:
    problems = validate_request(request)
    if problems:
        raise ValueError("invalid model request: " + "; ".join(problems))


def _check_search_preconditions(query: str) -> None:
    if not query or not query.strip():
        raise ValueError("search query must be non-empty")


class ReplayBackend(Backend):
    """Serves canned responses from a transcript; never performs live calls.

    Lookups are keyed by fingerprint and non-consuming, so identical
    requests always yield identical responses.
    """

    def __init__(self, transcript: Transcript):
        self.transcript = transcript

    def _lookup(self, fingerprint: str, kind: str, detail: str) -> TranscriptEntry:
        entry = self.transcript.lookup(fingerprint)
        if entry is None or entry.kind != kind:
            raise ReplayMissError(
                f"no transcript entry for {kind} request {fingerprint[:12]}…; "
                f"the pipeline diverged from the recording. Request: {detail}"
            )
        return entry

    def complete(self, request: ModelRequest) -> ModelResponse:
        _check_complete_preconditions(request)
        fingerprint = fingerprint_request(request)
        detail = canonical_json(normalized_request_payload(request))[:400]
        entry = self._lookup(fingerprint, "complete", detail)
        return ModelResponse.from_dict(entry.response)

    def search(self, query: str, max_results: int) -> list[SearchResult]:
        _check_search_preconditions(query)
        if max_results == 0:
            return []
        fingerprint = fingerprint_search(query, max_results)
        entry = self._lookup(fingerprint, "search", f"search {query!r} n={max_results}")
        results = [SearchResult.from_dict(r) for r in entry.response]
        return results[:max_results]


class RecordingBackend(Backend):
    """Delegates to an inner backend and appends responses to a transcript file.

    Appends are serialized with a lock; the file is created on the first
    recorded call and rewritten atomically on every append.
    """

    def __init__(self, inner: Backend, path: str | Path):
        self.inner = inner
        self.path = Path(path)
        self._lock = threading.Lock()
        if self.path.exists():
            self.transcript = read_transcript(self.path, mode="record")
        else:
            self.transcript = Transcript(entries=[], mode="record")

    def _record(self, entry: TranscriptEntry) -> None:
        with self._lock:
            if self.transcript.add(entry):
                write_transcript(self.transcript, self.path)

    def complete(self, request: ModelRequest) -> ModelResponse:
        _check_complete_preconditions(request)
        response = self.inner.complete(request)
        self._record(
            TranscriptEntry(
                fingerprint=fingerprint_request(request),
                kind="complete",
                response=response.to_dict(),
            )
        )
        return response

    def search(self, query: str, max_results: int) -> list[SearchResult]:
        _check_search_preconditions(query)
        if max_results == 0:
            return []
        results = self.inner.search(query, max_results)
        self._record(
            TranscriptEntry(
                fingerprint=fingerprint_search(query, max_results),
                kind="search",
                response=[r.to_dict() for r in results],
            )
        )
        return results


class LiveBackend(Backend):
    """HTTP chat-completion and search client with bounded retries.

    The transports are injectable so transport policy (3 attempts,
    exponential backoff starting at 1s) is testable without a network.
    """

    def __init__(
        self,
        transport: Callable[[dict], dict] | None = None,
        search_transport: Callable[[str, int], list[dict]] | None = None,
        *,
        model: str = "gpt-4o-mini",
        api_key_env: str = DEFAULT_API_KEY_ENV,
        temperature: float = 0.0,
        max_attempts: int = 3,
        backoff_start: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.model = model
        self.api_key_env = api_key_env
        self.temperature = temperature
        self.max_attempts = max_attempts
        self.backoff_start = backoff_start
        self._sleep = sleep
        self._transport = transport or self._http_complete
        self._search_transport = search_transport or self._http_search

    # -- default HTTP transports ------------------------------------------

    def _api_key(self) -> str:
        key = os.environ.get(self.api_key_env, "")
        if not key:
            raise CredentialError(
                f"live mode requires the {self.api_key_env} environment variable"
            )
        return key

    def _http_complete(self, payload: dict) -> dict:
        import requests

        url = os.environ.get(DEFAULT_API_URL_ENV, "https://api.openai.com/v1/chat/completions")
        headers = {"Authorization": f"Bearer {self._api_key()}"}
        try:
            resp = requests.post(url, json=payload, headers=headers, timeout=120)
            resp.raise_for_status()
            return resp.json()
        except requests.RequestException as exc:
            raise TransportError(f"completion call failed: {exc}") from exc

    def _http_search(self, query: str, max_results: int) -> list[dict]:
        import requests

        url = os.environ.get(DEFAULT_SEARCH_URL_ENV, "")
        if not url:
            raise CredentialError(
                f"live search requires the {DEFAULT_SEARCH_URL_ENV} environment variable"
            )
        try:
            resp = requests.get(
                url, params={"q": query, "max_results": max_results}, timeout=60
            )
            resp.raise_for_status()
            data = resp.json()
        except requests.RequestException as exc:
            raise TransportError(f"search call failed: {exc}") from exc
        return data.get("results", data) if isinstance(data, dict) else data

    # -- retry loop ---------------------------------------------------------

    def _with_retries(self, call: Callable[[], JsonValue], what: str) -> JsonValue:
        delay = self.backoff_start
        last: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                return call()
            except TransportError as exc:
                last = exc
                if attempt + 1 < self.max_attempts:
                    self._sleep(delay)
                    delay *= 2
        raise TransportError(f"{what} failed after {self.max_attempts} attempts: {last}")

    def complete(self, request: ModelRequest) -> ModelResponse:
        _check_complete_preconditions(request)
        messages = [{"role": "system", "content": request.system_prompt}]
        messages += [m.to_dict() for m in request.messages]
        payload = {
            "model": self.model,
            "messages": messages,
            "max_tokens": request.max_output_tokens,
            "temperature": request.temperature if request.temperature else self.temperature,
        }
        if request.tool_declarations:
            payload["tools"] = [
                {
                    "type": "function",
                    "function": {
                        "name": t.name,
                        "description": t.description,
                        "parameters": {
                            "type": "object",
                            "properties": {
                                f.name: {"description": f.description} for f in t.parameter_schema
                            },
                        },
                    },
                }
                for t in request.tool_declarations
            ]
        raw = self._with_retries(lambda: self._transport(payload), "completion")
        return self._parse_completion(raw)

    @staticmethod
    def _parse_completion(raw: dict) -> ModelResponse:
        try:
            choice = raw["choices"][0]["message"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion payload: {exc}") from exc
        calls = []
        for tc in choice.get("tool_calls") or []:
            fn = tc.get("function", {})
            try:
                args = json.loads(fn.get("arguments", "{}"))
            except json.JSONDecodeError:
                args = {"raw": fn.get("arguments", "")}
            calls.append(ToolCall(name=str(fn.get("name", "")), arguments=args))
        usage = raw.get("usage", {})
        return ModelResponse(
            text=str(choice.get("content") or ""),
            tool_calls=tuple(calls),
            token_usage=(int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0))),
        )

    def search(self, query: str, max_results: int) -> list[SearchResult]:
        _check_search_preconditions(query)
        if max_results == 0:
            return []
        raw = self._with_retries(
            lambda: self._search_transport(query, max_results), "search"
        )
        try:
            results = [SearchResult.from_dict(r) for r in raw]
        except (KeyError, TypeError, ValueError) as exc:
            raise TransportError(f"malformed search payload: {exc}") from exc
        return results[:max_results]


def load_transcript(
    path: str | Path, mode: str, *, inner: Backend | None = None, **live_kwargs
) -> Backend:
    """Open a transcript-backed backend.

    In replay mode the file must exist and parse; in record mode the file
    is created on the first recorded call and the inner backend defaults
    to a live one.
    """
    if mode == "replay":
        return ReplayBackend(read_transcript(path, mode="replay"))
    if mode == "record":
        return RecordingBackend(inner or LiveBackend(**live_kwargs), path)
    raise ValueError(f"unknown transcript mode {mode!r}")


# ---------------------------------------------------------------------------
# Structured completion helper
# ---------------------------------------------------------------------------


def complete_structured(
    backend: Backend, request: ModelRequest, *, repairs: int = 1
) -> tuple[JsonValue, ModelResponse]:
    """Issue a completion and parse one JSON value, re-prompting on parse errors.

    After ``repairs`` failed repair attempts the parse error is raised.
    """
    req = request
    last: StructuredOutputError | None = None
    for _ in range(repairs + 1):
        response = backend.complete(req)
        try:
            return extract_structured(response.text), response
        except StructuredOutputError as exc:
            last = exc
            req = replace(
                req,
                messages=req.messages
                + [
                    Message("assistant", response.text),
                    Message(
                        "user",
                        f"Your reply could not be parsed ({exc}). "
                        "Reply again with exactly one fenced JSON object and nothing else.",
                    ),
                ],
            )
    raise StructuredOutputError(f"unparseable model output after bounded repair: {last}")
