"""Shared fixtures and stub backends for the test suite."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

from swarmforge.backend import Backend, ModelRequest, ModelResponse, SearchResult
from swarmforge.plan import AgentSpec, DagEdge, FieldSchema, IoContract, SwarmPlan, VerificationCriteria
from swarmforge.schema import extract_structured, fenced_json

REPO = Path(__file__).resolve().parent.parent
DEMOS = REPO / "demos"
SCRIPTS = REPO / "scripts"


def load_builder_module():
    """Import the demo-definition module from scripts/ (canned plan payloads)."""
    sys.path.insert(0, str(SCRIPTS))
    try:
        import build_demo_transcripts

        return build_demo_transcripts
    finally:
        sys.path.pop(0)


def payload_of(request: ModelRequest):
    return extract_structured(request.messages[0].content)


class StubBackend(Backend):
    """Programmable backend: handlers dispatch on the request's system prompt.

    Handlers return a JSON-serializable reply (wrapped into a fenced JSON
    ModelResponse) or a ready ModelResponse. All requests are recorded.
    """

    def __init__(self):
        self.handlers = []
        self.search_fn = lambda query, n: []
        self.requests: list[ModelRequest] = []
        self.searches: list[tuple[str, int]] = []
        self.complete_calls = 0
        self.search_calls = 0

    def on(self, predicate, handler) -> "StubBackend":
        self.handlers.append((predicate, handler))
        return self

    def on_system(self, system_prompt: str, handler) -> "StubBackend":
        return self.on(lambda r, s=system_prompt: r.system_prompt == s, handler)

    def on_prefix(self, prefix: str, handler) -> "StubBackend":
        return self.on(lambda r, p=prefix: r.system_prompt.startswith(p), handler)

    def on_search(self, fn) -> "StubBackend":
        self.search_fn = fn
        return self

    def complete(self, request: ModelRequest) -> ModelResponse:
        self.complete_calls += 1
        self.requests.append(request)
        for predicate, handler in self.handlers:
            if predicate(request):
                reply = handler(request)
                if isinstance(reply, ModelResponse):
                    return reply
                return ModelResponse(text=fenced_json(reply), token_usage=(8, 8))
        raise AssertionError(
            f"stub has no handler for system prompt {request.system_prompt[:60]!r}"
        )

    def search(self, query: str, max_results: int) -> list[SearchResult]:
        self.search_calls += 1
        self.searches.append((query, max_results))
        if max_results == 0:
            return []
        hits = self.search_fn(query, max_results)
        return [
            h if isinstance(h, SearchResult) else SearchResult.from_dict(h)
            for h in hits
        ][:max_results]


def make_spec(
    spec_id: str,
    deps: tuple[str, ...] = (),
    inputs: tuple[str, ...] = (),
    outputs: tuple[str, ...] = ("result",),
    tools: tuple[str, ...] = (),
    assertions: tuple[str, ...] = (),
    patterns: tuple = (),
    required_tools: tuple[str, ...] = (),
) -> AgentSpec:
    return AgentSpec(
        spec_id=spec_id,
        role=f"test role for {spec_id}",
        tools=list(tools),
        dependencies=list(deps),
        io_contract=IoContract(
            input_schema=[FieldSchema(n, "text", f"input {n}") for n in inputs],
            output_schema=[FieldSchema(n, "text", f"output {n}") for n in outputs],
            description=f"contract of {spec_id}",
        ),
        verification_criteria=VerificationCriteria(
            behavioral_assertions=list(assertions),
            required_tools=list(required_tools),
            forbidden_patterns=list(patterns),
        ),
    )


def make_plan(specs: list[AgentSpec], name: str = "test swarm") -> SwarmPlan:
    edges = [
        DagEdge(from_spec=dep, to_spec=spec.spec_id)
        for spec in specs
        for dep in spec.dependencies
    ]
    return SwarmPlan(
        swarm_name=name,
        summary="test",
        coordination_strategy="serial",
        specs=specs,
        dag_edges=edges,
    )


def stub_agent_prompt(spec: dict | AgentSpec, note: str = "") -> str:
    """An agent prompt satisfying every static check for the given spec."""
    raw = spec.to_dict() if isinstance(spec, AgentSpec) else spec
    contract = raw["io_contract"]
    names = [f["name"] for f in contract.get("input_schema", [])]
    names += [f["name"] for f in contract.get("output_schema", [])]
    lines = [f"# agent: {raw['spec_id']}", f"role: {raw['role']}", "fields: " + ", ".join(names)]
    for a in raw["verification_criteria"].get("behavioral_assertions", []):
        lines.append(f"assert: {a}")
    for p in raw["verification_criteria"].get("forbidden_patterns", []):
        text = p["text"] if isinstance(p, dict) else p.text
        lines.append(f"forbid: {text}")
    if note:
        lines.append(note)
    return "\n".join(lines)


def stub_codegen_handler(request: ModelRequest) -> dict:
    """Codegen reply that always passes static_check for the requested spec."""
    payload = payload_of(request)
    spec = payload["spec"]
    note = ""
    if payload.get("feedback"):
        note = "feedback addressed: " + " | ".join(payload["feedback"])
    return {
        "system_prompt": stub_agent_prompt(spec, note),
        "tool_bindings": spec.get("tools", []),
        "output_parser_hint": "first fenced JSON object",
    }


def approve_handler(_request: ModelRequest) -> dict:
    return {"approved": True, "issues": []}


def judge_pass_handler(request: ModelRequest) -> list[dict]:
    payload = payload_of(request)
    return [
        {"assertion": a, "passed": True, "rationale": "ok"}
        for a in payload.get("assertions", [])
    ]


@pytest.fixture
def demo_paths():
    return {
        name: {
            "task": DEMOS / name / "task.txt",
            "input": DEMOS / name / "input.json",
            "transcript": DEMOS / name / "transcript.json",
        }
        for name in ("function_completion", "competition_math", "reading_comprehension")
    }
