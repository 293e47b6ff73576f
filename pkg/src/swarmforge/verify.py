"""Construction-time verification with typed failure routing.

Each generated agent passes a static well-formedness check and a
behavioral check in which a verifier model simulates the agent on
representative inputs. Failures are typed, and each type routes to a
fixed upstream stage: a specification-adherence failure regenerates the
agent with feedback, a grounding failure re-runs external research for
that spec, and a contract violation revises the task decomposition.
Failure feedback is threaded verbatim into the next generation attempt,
so recovery stays local to the failing spec.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .backend import Backend, Message, ModelRequest, complete_structured
from .codegen import (
    AgentBundle,
    GeneratedAgent,
    GenerationError,
    assemble_bundle,
    generate_agent,
)
from .grounding import GroundingReport, derive_directives, execute_directives
from .intent import ParsedIntent
from .plan import AgentSpec, SwarmPlan, descendants, plan_swarm, topological_order
from .schema import FieldSchema, StructuredOutputError, fenced_json
from .trace import TraceLog

MAX_PASSES_DEFAULT = 3
REPLAN_BUDGET_DEFAULT = 1
REPRESENTATIVE_INPUT_CAP = 3

VERIFIER_SYSTEM_PROMPT = (
    "You verify a generated agent configuration against its specification by "
    "simulating how it would behave on the representative inputs. Check that the "
    "system prompt enforces the role, the input/output contract, every "
    "behavioral assertion, and every forbidden pattern. Reply with exactly one "
    "fenced JSON object with keys: approved (boolean), failure_type (one of "
    "'spec_adherence', 'grounding', 'contract'; required when approved is "
    "false), and issues (array of strings, non-empty when approved is false)."
)


class FailureType(enum.Enum):
    SPEC_ADHERENCE = "spec_adherence"
    GROUNDING = "grounding"
    CONTRACT = "contract"


class StageRoute(enum.Enum):
    REGENERATE_AGENT = "regenerate_agent"
    RERUN_GROUNDING = "rerun_grounding"
    REPLAN = "replan"


def route_failure(failure_type: FailureType) -> StageRoute:
    """Total mapping from failure type to the stage that corrects it."""
    return {
        FailureType.SPEC_ADHERENCE: StageRoute.REGENERATE_AGENT,
        FailureType.GROUNDING: StageRoute.RERUN_GROUNDING,
        FailureType.CONTRACT: StageRoute.REPLAN,
    }[failure_type]


@dataclass
class ConstructionVerdict:
    spec_id: str
    pass_number: int
    approved: bool
    failure_type: FailureType | None = None
    issues: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        # Normalize toward the verdict invariants: an approval carries no
        # failure type; a rejection always carries one plus issues.
        if self.approved:
            self.failure_type = None
            self.issues = []
        else:
            if self.failure_type is None:
                self.failure_type = FailureType.SPEC_ADHERENCE
            if not self.issues:
                self.issues = ["verifier rejected the agent without detail"]

    def to_dict(self) -> dict:
        return {
            "spec_id": self.spec_id,
            "pass_number": self.pass_number,
            "approved": self.approved,
            "failure_type": self.failure_type.value if self.failure_type else None,
            "issues": list(self.issues),
        }


class ConstructionError(Exception):
    """Construction failed; carries every verdict gathered along the way."""

    def __init__(
        self,
        message: str,
        verdicts: list[ConstructionVerdict] | None = None,
        failure_type: FailureType | None = None,
    ):
        super().__init__(message)
        self.verdicts = verdicts or []
        self.failure_type = failure_type


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


def static_check(agent: GeneratedAgent, spec: AgentSpec) -> list[str]:
    """Well-formedness checks that need no model call. Total function."""
    issues: list[str] = []
    if not agent.system_prompt.strip():
        issues.append("system prompt is empty")
    if not agent.output_parser_hint.strip():
        issues.append("output_parser_hint is missing")
    allowed = set(spec.tools)
    bound = {t.name for t in agent.tool_bindings}
    for name in sorted(bound - allowed):
        issues.append(f"agent binds tool {name!r} that is not in the spec's tools list")
    for name in spec.verification_criteria.required_tools:
        if name not in bound:
            issues.append(f"required tool {name!r} is not bound")
    contract_fields = sorted(spec.input_field_names() | spec.output_field_names())
    for name in contract_fields:
        if name not in agent.system_prompt:
            issues.append(f"contract field {name!r} is not referenced in the prompt")
    return issues


def representative_inputs(spec: AgentSpec, intent: ParsedIntent) -> list[dict]:
    """Pick up to three intent examples whose category matches the spec's
    domain keywords; synthesize one input from the schema otherwise."""
    keywords = {
        word
        for token in (spec.role, spec.spec_id.replace("_", " "))
        for word in token.lower().split()
        if len(word) > 3
    }
    matches = [
        e.to_dict()
        for e in intent.task_examples
        if any(word in e.task_type.lower() for word in keywords)
    ][:REPRESENTATIVE_INPUT_CAP]
    if matches:
        return matches
    return [synthesize_input(spec.io_contract.input_schema)]


_SYNTHETIC_DEFAULTS = {
    "number": 0,
    "boolean": False,
    "list": [],
    "object": {},
    "date": "1970-01-01",
}


def synthesize_input(schema: list[FieldSchema]) -> dict:
    synthetic = {}
    for f in schema:
        if f.kind == "text":
            synthetic[f.name] = f"<{f.description or f.name}>"
        else:
            synthetic[f.name] = _SYNTHETIC_DEFAULTS.get(f.kind)
    return synthetic


def behavioral_check(
    agent: GeneratedAgent,
    spec: AgentSpec,
    backend: Backend,
    *,
    intent: ParsedIntent | None = None,
    pass_number: int = 1,
) -> ConstructionVerdict:
    """Ask the verifier model to simulate the agent on representative inputs."""
    intent = intent or ParsedIntent(goal="", constraints=[])
    payload = {
        "spec": spec.to_dict(),
        "agent": agent.to_dict(),
        "representative_inputs": representative_inputs(spec, intent),
    }
    request = ModelRequest(
        system_prompt=VERIFIER_SYSTEM_PROMPT,
        messages=[Message("user", f"spec_id: {spec.spec_id}\n" + fenced_json(payload))],
    )
    parsed, _ = complete_structured(backend, request, repairs=1)
    if not isinstance(parsed, dict):
        raise StructuredOutputError("verifier reply is not a JSON object")
    approved = bool(parsed.get("approved", False))
    failure_type = None
    raw_type = parsed.get("failure_type")
    if not approved:
        try:
            failure_type = FailureType(str(raw_type))
        except ValueError:
            failure_type = FailureType.SPEC_ADHERENCE
    return ConstructionVerdict(
        spec_id=spec.spec_id,
        pass_number=pass_number,
        approved=approved,
        failure_type=failure_type,
        issues=[str(i) for i in parsed.get("issues", [])],
    )


# ---------------------------------------------------------------------------
# The construction loop
# ---------------------------------------------------------------------------


def _refresh_grounding(
    spec_ids: set[str],
    plan: SwarmPlan,
    grounding: GroundingReport,
    backend: Backend,
    trace: TraceLog,
) -> GroundingReport:
    """Re-run research for the given specs, keeping every other result."""
    directives = [d for d in derive_directives(plan) if d.spec_id in spec_ids]
    if not directives:
        return grounding
    trace.append("grounding_rerun", spec_ids=sorted(spec_ids))
    fresh = execute_directives(directives, backend, trace=trace)
    kept = [r for r in grounding.directive_results if r.spec_id not in spec_ids]
    merged = sorted(kept + fresh.directive_results, key=lambda r: r.spec_id)
    recommendations = grounding.recommendations or fresh.recommendations
    return GroundingReport(recommendations=recommendations, directive_results=merged)


def verify_construction(
    plan: SwarmPlan,
    grounding: GroundingReport,
    intent: ParsedIntent,
    backend: Backend,
    max_passes: int = MAX_PASSES_DEFAULT,
    *,
    trace: TraceLog | None = None,
    replan_budget: int = REPLAN_BUDGET_DEFAULT,
    verification_enabled: bool = True,
) -> AgentBundle:
    """Generate, check, and (on typed failure) repair every agent, then bundle.

    Per spec the loop runs generate -> static check -> behavioral check for
    at most ``max_passes`` passes; at most ``replan_budget`` replans happen
    per construction run. With verification disabled every agent is
    approved at pass 1 and the skip is recorded in the trace.
    """
    if max_passes < 1:
        raise ValueError("max_passes must be >= 1")
    trace = trace if trace is not None else TraceLog()
    approved: dict[str, GeneratedAgent] = {}
    verdicts: list[ConstructionVerdict] = []
    current_plan = plan
    current_grounding = grounding
    replans_left = replan_budget

    queue = list(topological_order(current_plan))
    while queue:
        spec_id = queue.pop(0)
        spec = current_plan.spec_map[spec_id]
        feedback: list[str] | None = None
        replanned = False
        final_verdict: ConstructionVerdict | None = None

        for pass_number in range(1, max_passes + 1):
            try:
                agent = generate_agent(
                    spec, current_grounding, intent, feedback, backend,
                    generation=pass_number,
                )
            except GenerationError as exc:
                # A generation failure feeds the loop like an adherence failure.
                verdict = ConstructionVerdict(
                    spec_id, pass_number, approved=False,
                    failure_type=FailureType.SPEC_ADHERENCE,
                    issues=[str(exc), *exc.issues],
                )
                verdicts.append(verdict)
                trace.append("verdict", **verdict.to_dict())
                final_verdict = verdict
                feedback = verdict.issues
                continue
            trace.append("generate", spec_id=spec_id, generation=pass_number)

            if not verification_enabled:
                verdict = ConstructionVerdict(spec_id, pass_number, approved=True)
                trace.append("auto_approve", spec_id=spec_id)
            else:
                static_issues = static_check(agent, spec)
                trace.append(
                    "static_check", spec_id=spec_id, issues=static_issues, passed=not static_issues
                )
                if static_issues:
                    verdict = ConstructionVerdict(
                        spec_id,
                        pass_number,
                        approved=False,
                        failure_type=FailureType.SPEC_ADHERENCE,
                        issues=static_issues,
                    )
                else:
                    verdict = behavioral_check(
                        agent, spec, backend, intent=intent, pass_number=pass_number
                    )
                    trace.append(
                        "behavioral_check",
                        spec_id=spec_id,
                        pass_number=pass_number,
                        approved=verdict.approved,
                    )
            verdicts.append(verdict)
            trace.append("verdict", **verdict.to_dict())

            if verdict.approved:
                approved[spec_id] = agent
                final_verdict = verdict
                break

            route = route_failure(verdict.failure_type)
            trace.append(
                "route", spec_id=spec_id, failure_type=verdict.failure_type.value,
                route=route.value,
            )
            final_verdict = verdict

            if route is StageRoute.REGENERATE_AGENT:
                feedback = verdict.issues
                continue
            if route is StageRoute.RERUN_GROUNDING:
                current_grounding = _refresh_grounding(
                    {spec_id}, current_plan, current_grounding, backend, trace
                )
                feedback = verdict.issues
                continue
            # Contract violation: revise the decomposition.
            if replans_left <= 0:
                raise ConstructionError(
                    "replan budget exhausted during construction",
                    verdicts,
                    FailureType.CONTRACT,
                )
            replans_left -= 1
            new_plan = plan_swarm(
                intent, backend, feedback=verdict.issues, previous=current_plan
            )
            changed = diff_changed_specs(current_plan, new_plan)
            trace.append("replan", changed=sorted(changed))
            for changed_id in changed:
                approved.pop(changed_id, None)
            current_grounding = _refresh_grounding(
                changed, new_plan, current_grounding, backend, trace
            )
            current_plan = new_plan
            queue = [sid for sid in topological_order(new_plan) if sid not in approved]
            replanned = True
            break

        if replanned:
            continue
        if spec_id not in approved:
            raise ConstructionError(
                f"spec {spec_id!r} was not approved within {max_passes} passes",
                verdicts,
                final_verdict.failure_type if final_verdict else None,
            )

    ordered = topological_order(current_plan)
    agents = [approved[sid] for sid in ordered]
    return assemble_bundle(current_plan, agents, current_grounding, intent)


def diff_changed_specs(old: SwarmPlan, new: SwarmPlan) -> set[str]:
    """Spec ids whose content differs between plans (new or edited specs)."""
    old_hashes = {s.spec_id: s.content_hash() for s in old.specs}
    changed = set()
    for spec in new.specs:
        if old_hashes.get(spec.spec_id) != spec.content_hash():
            changed.add(spec.spec_id)
    return changed


def replan_subgraph(
    bundle: AgentBundle,
    feedback: list[str],
    backend: Backend,
    *,
    trace: TraceLog | None = None,
    max_passes: int = MAX_PASSES_DEFAULT,
    verification_enabled: bool = True,
) -> tuple[AgentBundle, set[str]]:
    """Execution-time structural recovery: revise the plan, rebuild what changed.

    Returns the patched bundle and the set of invalidated spec ids (the
    changed specs plus their descendants); everything else keeps its
    approved agent untouched.
    """
    trace = trace if trace is not None else TraceLog()
    new_plan = plan_swarm(bundle.intent, backend, feedback=feedback, previous=bundle.plan)
    changed = diff_changed_specs(bundle.plan, new_plan)
    trace.append("replan", changed=sorted(changed))

    grounding = _refresh_grounding(changed, new_plan, bundle.grounding, backend, trace)

    kept = {a.spec_id: a for a in bundle.agents if a.spec_id not in changed}
    agents: list[GeneratedAgent] = []
    verdicts: list[ConstructionVerdict] = []
    for spec_id in topological_order(new_plan):
        if spec_id in kept:
            agents.append(kept[spec_id])
            continue
        spec = new_plan.spec_map[spec_id]
        feedback_for_spec: list[str] | None = list(feedback)
        agent: GeneratedAgent | None = None
        for pass_number in range(1, max_passes + 1):
            try:
                candidate = generate_agent(
                    spec, grounding, bundle.intent, feedback_for_spec, backend,
                    generation=pass_number,
                )
            except GenerationError as exc:
                feedback_for_spec = [str(exc), *exc.issues]
                continue
            trace.append("generate", spec_id=spec_id, generation=pass_number)
            if not verification_enabled:
                agent = candidate
                trace.append("auto_approve", spec_id=spec_id)
                break
            static_issues = static_check(candidate, spec)
            if static_issues:
                verdict = ConstructionVerdict(
                    spec_id, pass_number, approved=False,
                    failure_type=FailureType.SPEC_ADHERENCE, issues=static_issues,
                )
            else:
                verdict = behavioral_check(
                    candidate, spec, backend, intent=bundle.intent, pass_number=pass_number
                )
                trace.append(
                    "behavioral_check", spec_id=spec_id, pass_number=pass_number,
                    approved=verdict.approved,
                )
            verdicts.append(verdict)
            trace.append("verdict", **verdict.to_dict())
            if verdict.approved:
                agent = candidate
                break
            feedback_for_spec = verdict.issues
        if agent is None:
            raise ConstructionError(
                f"replanned spec {spec_id!r} was not approved within {max_passes} passes",
                verdicts,
            )
        agents.append(agent)

    patched = assemble_bundle(new_plan, agents, grounding, bundle.intent)
    invalidated = set(changed)
    for spec_id in changed:
        invalidated |= descendants(new_plan, spec_id)
    return patched, invalidated
