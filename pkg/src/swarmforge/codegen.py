"""Stage 4: compile agent specs into runnable agent configurations.

An agent here is a prompt-plus-bindings configuration executed by the
engine's generic runner, not an emitted source file: the generated
system prompt embeds the role, the I/O contract, every behavioral
assertion and forbidden pattern, and the spec's research summary; tool
bindings map declared tool names onto the engine's tool registry. The
verified swarm is packaged into a content-addressed AgentBundle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .backend import (
    Backend,
    Message,
    ModelRequest,
    TOOL_REGISTRY,
    ToolDeclaration,
    complete_structured,
)
from .grounding import GroundingReport
from .intent import ParsedIntent
from .plan import AgentSpec, SwarmPlan
from .schema import StructuredOutputError, canonical_json, fenced_json, pretty_json, sha256_hex

GENERATION_REPAIRS = 2
TOP_RECOMMENDATIONS_IN_PROMPT = 3

CODEGEN_SYSTEM_PROMPT = (
    "You compile one agent specification into an executable agent configuration "
    "for a generic runner with a run(message, history) interface. Reply with "
    "exactly one fenced JSON object with keys: system_prompt (string), "
    "tool_bindings (array of tool names, a subset of the spec's tools), and "
    "output_parser_hint (string telling the runner how to extract the structured "
    "output). The system prompt must state the agent's role, name every input "
    "and output contract field, repeat each behavioral assertion and each "
    "forbidden pattern verbatim, incorporate the research summary, and instruct "
    "the agent to reply with a single fenced JSON object matching its output "
    "schema."
)

MANDATORY_KEYS = ("system_prompt", "tool_bindings", "output_parser_hint")


class GenerationError(Exception):
    """The model output was missing mandatory sections after bounded repair."""

    def __init__(self, message: str, issues: list[str] | None = None):
        super().__init__(message)
        self.issues = issues or []


class BundleError(Exception):
    """A bundle failed assembly, serialization, or an integrity check."""


@dataclass
class GeneratedAgent:
    spec_id: str
    system_prompt: str
    tool_bindings: list[ToolDeclaration] = field(default_factory=list)
    output_parser_hint: str = ""
    generation: int = 1

    def to_dict(self) -> dict:
        return {
            "spec_id": self.spec_id,
            "system_prompt": self.system_prompt,
            "tool_bindings": [t.to_dict() for t in self.tool_bindings],
            "output_parser_hint": self.output_parser_hint,
            "generation": self.generation,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "GeneratedAgent":
        return cls(
            spec_id=str(raw["spec_id"]),
            system_prompt=str(raw.get("system_prompt", "")),
            tool_bindings=[ToolDeclaration.from_dict(t) for t in raw.get("tool_bindings", [])],
            output_parser_hint=str(raw.get("output_parser_hint", "")),
            generation=int(raw.get("generation", 1)),
        )


def bind_tools(names: list[str]) -> list[ToolDeclaration]:
    """Map tool names onto registry declarations; unknown names bind bare."""
    bindings = []
    for name in names:
        bindings.append(TOOL_REGISTRY.get(name, ToolDeclaration(name=name)))
    return bindings


def generate_agent(
    spec: AgentSpec,
    grounding: GroundingReport,
    intent: ParsedIntent,
    feedback: list[str] | None,
    backend: Backend,
    *,
    generation: int = 1,
) -> GeneratedAgent:
    """Compile a spec (plus grounding and optional verifier feedback) into an agent.

    Only the spec's own directive result and the global top
    recommendations enter the prompt. Replies missing mandatory sections
    get bounded repair; persistent failure raises GenerationError, which
    feeds the construction verification loop.
    """
    directive = grounding.result_for(spec.spec_id)
    payload = {
        "spec": spec.to_dict(),
        "research_summary": directive.research_summary if directive else "",
        "recommendations": [
            r.to_dict() for r in grounding.recommendations[:TOP_RECOMMENDATIONS_IN_PROMPT]
        ],
        "tone": intent.tone,
        "generation": generation,
    }
    if feedback:
        payload["feedback"] = list(feedback)
    request = ModelRequest(
        system_prompt=CODEGEN_SYSTEM_PROMPT,
        messages=[Message("user", f"spec_id: {spec.spec_id}\n" + fenced_json(payload))],
        max_output_tokens=4096,
    )

    issues: list[str] = []
    for _ in range(GENERATION_REPAIRS + 1):
        try:
            parsed, _ = complete_structured(backend, request, repairs=0)
        except StructuredOutputError as exc:
            issues = [str(exc)]
            parsed = None
        if isinstance(parsed, dict):
            issues = [
                f"missing mandatory section {key!r}"
                for key in MANDATORY_KEYS
                if key not in parsed
            ]
            if not str(parsed.get("system_prompt", "")).strip():
                issues.append("system_prompt is empty")
            if not issues:
                return GeneratedAgent(
                    spec_id=spec.spec_id,
                    system_prompt=str(parsed["system_prompt"]),
                    tool_bindings=bind_tools([str(t) for t in parsed.get("tool_bindings", [])]),
                    output_parser_hint=str(parsed.get("output_parser_hint", "")),
                    generation=generation,
                )
        elif parsed is not None:
            issues = ["reply is not a JSON object"]
        request = replace(
            request,
            messages=request.messages
            + [
                Message("assistant", canonical_json(parsed) if parsed is not None else ""),
                Message(
                    "user",
                    "The configuration was rejected:\n- "
                    + "\n- ".join(issues)
                    + "\nReply again with one complete fenced JSON object.",
                ),
            ],
        )
    raise GenerationError(
        f"agent generation for {spec.spec_id!r} failed after bounded repair", issues
    )


# ---------------------------------------------------------------------------
# Bundles
# ---------------------------------------------------------------------------


@dataclass
class AgentBundle:
    plan: SwarmPlan
    agents: list[GeneratedAgent]
    grounding: GroundingReport
    intent: ParsedIntent
    content_hash: str = ""

    def agent_for(self, spec_id: str) -> GeneratedAgent:
        for agent in self.agents:
            if agent.spec_id == spec_id:
                return agent
        raise KeyError(spec_id)

    def body_dict(self) -> dict:
        return {
            "intent": self.intent.to_dict(),
            "plan": self.plan.to_dict(),
            "grounding": self.grounding.to_dict(),
            "agents": [a.to_dict() for a in sorted(self.agents, key=lambda a: a.spec_id)],
        }

    def to_dict(self) -> dict:
        body = self.body_dict()
        body["content_hash"] = self.content_hash
        return body

    @classmethod
    def from_dict(cls, raw: dict) -> "AgentBundle":
        bundle = cls(
            plan=SwarmPlan.from_dict(raw["plan"]),
            agents=[GeneratedAgent.from_dict(a) for a in raw.get("agents", [])],
            grounding=GroundingReport.from_dict(raw.get("grounding", {})),
            intent=ParsedIntent.from_dict(raw.get("intent", {})),
            content_hash=str(raw.get("content_hash", "")),
        )
        expected = sha256_hex(canonical_json(bundle.body_dict()))
        if bundle.content_hash and bundle.content_hash != expected:
            raise BundleError(
                f"bundle content hash mismatch: stored {bundle.content_hash[:12]}…, "
                f"recomputed {expected[:12]}…"
            )
        bundle.content_hash = expected
        return bundle


def assemble_bundle(
    plan: SwarmPlan,
    agents: list[GeneratedAgent],
    grounding: GroundingReport,
    intent: ParsedIntent,
) -> AgentBundle:
    """Package approved agents into a content-addressed bundle.

    Every spec must have exactly one agent; the content hash is the
    SHA-256 of the canonical serialization of all other fields.
    """
    if not plan.specs:
        raise ValueError("cannot assemble a bundle for a plan with no specs")
    spec_ids = {s.spec_id for s in plan.specs}
    agent_ids = [a.spec_id for a in agents]
    missing = sorted(spec_ids - set(agent_ids))
    extra = sorted(set(agent_ids) - spec_ids)
    duplicates = sorted({a for a in agent_ids if agent_ids.count(a) > 1})
    if missing or extra or duplicates:
        raise BundleError(
            f"agents do not match plan specs (missing={missing}, extra={extra}, "
            f"duplicates={duplicates})"
        )
    bundle = AgentBundle(plan=plan, agents=list(agents), grounding=grounding, intent=intent)
    bundle.content_hash = sha256_hex(canonical_json(bundle.body_dict()))
    return bundle


def save_bundle(bundle: AgentBundle, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(pretty_json(bundle.to_dict()), encoding="utf-8")


def load_bundle(path: str | Path) -> AgentBundle:
    path = Path(path)
    if not path.exists():
        raise BundleError(f"bundle file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise BundleError(f"bundle file {path} does not parse: {exc}") from exc
    return AgentBundle.from_dict(raw)
