import hashlib
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from swarmforge.backend import (
    CredentialError,
    LiveBackend,
    Message,
    ModelRequest,
    ModelResponse,
    RecordingBackend,
    ReplayBackend,
    ReplayMissError,
    ToolDeclaration,
    Transcript,
    TranscriptEntry,
    TranscriptError,
    TransportError,
    complete_structured,
    fingerprint_request,
    fingerprint_search,
    load_transcript,
    read_transcript,
    validate_request,
    write_transcript,
)
from swarmforge.schema import FieldSchema, StructuredOutputError, fenced_json


def simple_request(text="hello", system="sys"):
    return ModelRequest(system_prompt=system, messages=[Message("user", text)])


# ---------------------------------------------------------------------------
# Request validation
# ---------------------------------------------------------------------------


def test_empty_messages_is_precondition_error():
    backend = ReplayBackend(Transcript())
    with pytest.raises(ValueError, match="non-empty"):
        backend.complete(ModelRequest(system_prompt="s", messages=[]))


def test_roles_must_alternate_starting_with_user():
    bad_start = ModelRequest("s", [Message("assistant", "x")])
    assert any("start with a user" in p for p in validate_request(bad_start))

    repeat = ModelRequest("s", [Message("user", "a"), Message("user", "b")])
    assert any("repeat role" in p for p in validate_request(repeat))

    tool_after_assistant = ModelRequest(
        "s",
        [
            Message("user", "a"),
            Message("assistant", "call"),
            Message("tool", "result"),
            Message("tool", "result2"),
            Message("assistant", "done"),
        ],
    )
    assert validate_request(tool_after_assistant) == []

    tool_after_user = ModelRequest("s", [Message("user", "a"), Message("tool", "r")])
    assert any("cannot follow a user" in p for p in validate_request(tool_after_user))


def test_temperature_and_token_bounds():
    req = simple_request()
    req.temperature = 3.0
    assert any("temperature" in p for p in validate_request(req))
    req.temperature = 1.0
    req.max_output_tokens = 0
    assert any("max_output_tokens" in p for p in validate_request(req))


def test_duplicate_tool_declarations_rejected():
    req = simple_request()
    req.tool_declarations = [ToolDeclaration("t"), ToolDeclaration("t")]
    assert any("duplicate tool" in p for p in validate_request(req))


# ---------------------------------------------------------------------------
# Fingerprints
# ---------------------------------------------------------------------------


def reference_fingerprint(request: ModelRequest) -> str:
    """Independent re-implementation of the fingerprint recipe."""
    tools = sorted(request.tool_declarations, key=lambda t: t.name)
    payload = {
        "kind": "complete",
        "system": "\n".join(l.rstrip() for l in request.system_prompt.split("\n")),
        "messages": [
            {
                "role": m.role,
                "content": "\n".join(l.rstrip() for l in m.content.split("\n")),
            }
            for m in request.messages
        ],
        "tools": [
            {
                "name": t.name,
                "description": "\n".join(l.rstrip() for l in t.description.split("\n")),
                "parameters": [f.to_dict() for f in t.parameter_schema],
            }
            for t in tools
        ],
        "max_output_tokens": request.max_output_tokens,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def test_fingerprint_matches_reference_hasher():
    req = ModelRequest(
        system_prompt="line one   \nline two",
        messages=[Message("user", "do the thing  ")],
        tool_declarations=[
            ToolDeclaration("zeta", "z tool"),
            ToolDeclaration("alpha", "a tool", (FieldSchema("q", "text"),)),
        ],
    )
    assert fingerprint_request(req) == reference_fingerprint(req)


def test_identical_requests_share_a_fingerprint():
    a = simple_request("same")
    b = simple_request("same")
    assert fingerprint_request(a) == fingerprint_request(b)


def test_fingerprint_ignores_trailing_whitespace_and_temperature():
    a = ModelRequest("sys", [Message("user", "text")], temperature=0.0)
    b = ModelRequest("sys  ", [Message("user", "text   ")], temperature=1.5)
    assert fingerprint_request(a) == fingerprint_request(b)


def test_fingerprint_sorts_tool_declarations():
    t1, t2 = ToolDeclaration("a"), ToolDeclaration("b")
    a = ModelRequest("s", [Message("user", "x")], tool_declarations=[t1, t2])
    b = ModelRequest("s", [Message("user", "x")], tool_declarations=[t2, t1])
    assert fingerprint_request(a) == fingerprint_request(b)


@given(st.text(max_size=80), st.text(max_size=80))
def test_fingerprint_stability_property(system, content):
    req1 = ModelRequest(system, [Message("user", content)])
    req2 = ModelRequest(system, [Message("user", content)])
    assert fingerprint_request(req1) == fingerprint_request(req2)
    assert fingerprint_request(req1) == reference_fingerprint(req1)


def test_search_fingerprint_trims_query():
    assert fingerprint_search(" q ", 3) == fingerprint_search("q", 3)
    assert fingerprint_search("q", 3) != fingerprint_search("q", 4)


def test_fingerprint_stable_across_processes():
    import subprocess
    import sys

    snippet = (
        "from swarmforge.backend import ModelRequest, Message, fingerprint_request\n"
        "req = ModelRequest('stable sys  ', [Message('user', 'stable content\\t')])\n"
        "print(fingerprint_request(req))\n"
    )
    out = subprocess.run(
        [sys.executable, "-c", snippet], capture_output=True, text=True, check=True
    ).stdout.strip()
    local = fingerprint_request(
        ModelRequest("stable sys  ", [Message("user", "stable content\t")])
    )
    assert out == local


# ---------------------------------------------------------------------------
# Replay semantics
# ---------------------------------------------------------------------------


def canned(request, text):
    return TranscriptEntry(
        fingerprint=fingerprint_request(request),
        kind="complete",
        response=ModelResponse(text=text).to_dict(),
    )


def test_replay_serves_canned_response():
    req = simple_request("classify this problem", system="classify this problem")
    transcript = Transcript(entries=[canned(req, '{"subject_area": "algebra"}')])
    backend = ReplayBackend(transcript)
    response = backend.complete(simple_request("classify this problem", system="classify this problem"))
    assert '"subject_area": "algebra"' in response.text


def test_two_identical_requests_get_identical_responses():
    req = simple_request("ping")
    transcript = Transcript(entries=[canned(req, "pong")])
    backend = ReplayBackend(transcript)
    first = backend.complete(simple_request("ping"))
    second = backend.complete(simple_request("ping"))
    assert first == second


def test_one_entry_transcript_misses_on_second_distinct_request():
    req = simple_request("first")
    backend = ReplayBackend(Transcript(entries=[canned(req, "ok")]))
    assert backend.complete(simple_request("first")).text == "ok"
    with pytest.raises(ReplayMissError):
        backend.complete(simple_request("second"))


def test_replay_search_and_zero_limit(tmp_path):
    entry = TranscriptEntry(
        fingerprint=fingerprint_search("HumanEval function completion examples", 5),
        kind="search",
        response=[
            {
                "title": "benchmark",
                "url": "https://github.com/openai/human-eval/",
                "snippet": "def sort_third(l): ...",
            }
        ],
    )
    backend = ReplayBackend(Transcript(entries=[entry]))
    hits = backend.search("HumanEval function completion examples", 5)
    assert hits[0].url.startswith("https://github.com/openai/human-eval/")
    # Replayed searches are byte-for-byte stable run over run.
    rerun = backend.search("HumanEval function completion examples", 5)
    assert json.dumps([h.to_dict() for h in hits]) == json.dumps([h.to_dict() for h in rerun])
    assert backend.search("anything", 0) == []
    with pytest.raises(ValueError):
        backend.search("  ", 3)


def test_replay_determinism_byte_identical():
    req = simple_request("x")
    backend = ReplayBackend(Transcript(entries=[canned(req, "y")]))
    runs = [
        json.dumps([backend.complete(simple_request("x")).to_dict() for _ in range(3)])
        for _ in range(2)
    ]
    assert runs[0] == runs[1]


def test_no_live_traffic_in_replay_mode():
    # A replay backend built around a transcript must never touch a transport.
    calls = []

    def exploding_transport(payload):
        calls.append(payload)
        raise TransportError("live transport must not be called in replay mode")

    req = simple_request("offline")
    backend = ReplayBackend(Transcript(entries=[canned(req, "ok")]))
    assert backend.complete(simple_request("offline")).text == "ok"
    assert calls == []
    # Sanity check: the same transport does fire when wired into a live backend.
    live = LiveBackend(transport=exploding_transport, sleep=lambda s: None)
    with pytest.raises(TransportError):
        live.complete(simple_request("offline"))
    assert calls != []


# ---------------------------------------------------------------------------
# Recording
# ---------------------------------------------------------------------------


class OneShotBackend:
    def __init__(self):
        self.complete_calls = 0

    def complete(self, request):
        self.complete_calls += 1
        return ModelResponse(text=f"reply-{self.complete_calls}")

    def search(self, query, max_results):
        return []


def test_record_mode_creates_file_on_first_call(tmp_path):
    path = tmp_path / "t.json"
    backend = load_transcript(path, "record", inner=OneShotBackend())
    assert not path.exists()
    backend.complete(simple_request("a"))
    assert path.exists()
    entries = json.loads(path.read_text())
    assert len(entries) == 1
    assert set(entries[0]) == {"fingerprint", "kind", "response"}


def test_record_then_replay_roundtrip(tmp_path):
    path = tmp_path / "t.json"
    recorder = RecordingBackend(OneShotBackend(), path)
    original = recorder.complete(simple_request("a"))
    replayer = load_transcript(path, "replay")
    assert replayer.complete(simple_request("a")) == original


def test_record_dedupes_identical_requests(tmp_path):
    path = tmp_path / "t.json"
    recorder = RecordingBackend(OneShotBackend(), path)
    recorder.complete(simple_request("a"))
    recorder.complete(simple_request("b"))
    recorder.complete(simple_request("a"))  # same fingerprint; not re-recorded
    assert len(json.loads(path.read_text())) == 2


def test_replay_requires_existing_parseable_file(tmp_path):
    with pytest.raises(TranscriptError):
        load_transcript(tmp_path / "missing.json", "replay")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(TranscriptError):
        load_transcript(bad, "replay")
    not_list = tmp_path / "obj.json"
    not_list.write_text("{}")
    with pytest.raises(TranscriptError):
        load_transcript(not_list, "replay")


def test_transcript_write_read_roundtrip(tmp_path):
    req = simple_request("q")
    transcript = Transcript(entries=[canned(req, "r")])
    path = tmp_path / "t.json"
    write_transcript(transcript, path)
    again = read_transcript(path)
    assert again.to_list() == transcript.to_list()


# ---------------------------------------------------------------------------
# Live transport policy
# ---------------------------------------------------------------------------


def test_live_retries_three_times_with_backoff():
    attempts = []
    delays = []

    def flaky(payload):
        attempts.append(1)
        raise TransportError("boom")

    backend = LiveBackend(transport=flaky, sleep=delays.append)
    with pytest.raises(TransportError, match="after 3 attempts"):
        backend.complete(simple_request("x"))
    assert len(attempts) == 3
    assert delays == [1.0, 2.0]


def test_live_recovers_after_transient_failure():
    state = {"n": 0}

    def flaky(payload):
        state["n"] += 1
        if state["n"] < 3:
            raise TransportError("try again")
        return {
            "choices": [{"message": {"content": "ok"}}],
            "usage": {"prompt_tokens": 5, "completion_tokens": 2},
        }

    backend = LiveBackend(transport=flaky, sleep=lambda s: None)
    response = backend.complete(simple_request("x"))
    assert response.text == "ok"
    assert response.token_usage == (5, 2)


def test_live_credentials_required(monkeypatch):
    monkeypatch.delenv("SWARMFORGE_API_KEY", raising=False)
    backend = LiveBackend(sleep=lambda s: None)
    with pytest.raises((CredentialError, TransportError)):
        backend.complete(simple_request("x"))


def test_live_parses_tool_calls():
    def transport(payload):
        return {
            "choices": [
                {
                    "message": {
                        "content": "",
                        "tool_calls": [
                            {"function": {"name": "web_search", "arguments": '{"query": "q"}'}}
                        ],
                    }
                }
            ]
        }

    backend = LiveBackend(transport=transport, sleep=lambda s: None)
    response = backend.complete(simple_request("x"))
    assert response.tool_calls[0].name == "web_search"
    assert response.tool_calls[0].arguments == {"query": "q"}


# ---------------------------------------------------------------------------
# Structured completion helper
# ---------------------------------------------------------------------------


class ScriptedReplies:
    def __init__(self, replies):
        self.replies = list(replies)
        self.seen = []

    def complete(self, request):
        self.seen.append(request)
        return ModelResponse(text=self.replies.pop(0))

    def search(self, query, max_results):
        return []


def test_complete_structured_repairs_once():
    backend = ScriptedReplies(["not json at all", fenced_json({"ok": True})])
    parsed, _ = complete_structured(backend, simple_request("x"), repairs=1)
    assert parsed == {"ok": True}
    # The repair prompt carries the parse error back to the model.
    repair_request = backend.seen[1]
    assert "could not be parsed" in repair_request.messages[-1].content


def test_complete_structured_raises_after_bounded_repair():
    backend = ScriptedReplies(["garbage", "more garbage"])
    with pytest.raises(StructuredOutputError):
        complete_structured(backend, simple_request("x"), repairs=1)
