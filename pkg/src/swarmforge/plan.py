"""Task decomposition into a DAG of agent specifications.

A SwarmPlan names a set of agent specs, each with a role, tools,
dependencies, an explicit I/O contract, and verification criteria, plus
the DAG edges connecting them. The validator guarantees the structural
properties the executor relies on: acyclicity, edge/dependency
consistency, unique ids, tool closure, and input resolvability (every
input field of every non-root spec can be assembled from upstream
outputs or the task input, so the happy path never hits a missing key).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field, replace

from .backend import Backend, Message, ModelRequest, complete_structured
from .contracts import ForbiddenPattern
from .intent import ParsedIntent
from .schema import FieldSchema, canonical_json, fenced_json, sha256_hex

MAX_SPECS_DEFAULT = 12

PLAN_SYSTEM_PROMPT = (
    "You decompose a task into a small swarm of specialist agents arranged in a "
    "dependency DAG. Reply with exactly one fenced JSON object with keys: "
    "swarm_name (string), summary (string), coordination_strategy (string), "
    "specs (array), dag_edges (array of {from_spec, to_spec}). Each spec has: "
    "spec_id (snake_case identifier), role (string), tools (array drawn from "
    "['web_search', 'file_generator']), dependencies (array of spec_ids), "
    "io_contract {description, input_schema, output_schema} where each schema "
    "entry is {name, kind one of text|number|boolean|list|object|date, "
    "description}, and verification_criteria {behavioral_assertions (array of "
    "strings), required_tools (array), forbidden_patterns (array of {text, kind "
    "one of literal|regex|tool_call|model_judged, pattern})}. Root agents read "
    "the task input; every non-root input field must be produced by a "
    "dependency's output schema, carried over from the task input, or reference "
    "a dependency's whole output as '<prefix>_document'. The graph must be "
    "acyclic and an edge (u, v) must exist exactly when u is in v's dependencies."
)


class PlanningError(Exception):
    """The planner could not produce a valid plan within bounded repair."""

    def __init__(self, message: str, report: list[str] | None = None):
        super().__init__(message)
        self.report = report or []


class PlanCycleError(Exception):
    """A cycle was found while ordering a plan."""


@dataclass
class IoContract:
    input_schema: list[FieldSchema] = field(default_factory=list)
    output_schema: list[FieldSchema] = field(default_factory=list)
    description: str = ""

    def to_dict(self) -> dict:
        return {
            "description": self.description,
            "input_schema": [f.to_dict() for f in self.input_schema],
            "output_schema": [f.to_dict() for f in self.output_schema],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "IoContract":
        return cls(
            input_schema=[FieldSchema.from_dict(f) for f in raw.get("input_schema", [])],
            output_schema=[FieldSchema.from_dict(f) for f in raw.get("output_schema", [])],
            description=str(raw.get("description", "")),
        )


@dataclass
class VerificationCriteria:
    behavioral_assertions: list[str] = field(default_factory=list)
    required_tools: list[str] = field(default_factory=list)
    forbidden_patterns: list[ForbiddenPattern] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "behavioral_assertions": list(self.behavioral_assertions),
            "required_tools": list(self.required_tools),
            "forbidden_patterns": [p.to_dict() for p in self.forbidden_patterns],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "VerificationCriteria":
        return cls(
            behavioral_assertions=[str(a) for a in raw.get("behavioral_assertions", [])],
            required_tools=[str(t) for t in raw.get("required_tools", [])],
            forbidden_patterns=[
                ForbiddenPattern.from_dict(p) for p in raw.get("forbidden_patterns", [])
            ],
        )


@dataclass
class AgentSpec:
    spec_id: str
    role: str
    tools: list[str] = field(default_factory=list)
    dependencies: list[str] = field(default_factory=list)
    io_contract: IoContract = field(default_factory=IoContract)
    verification_criteria: VerificationCriteria = field(default_factory=VerificationCriteria)

    def to_dict(self) -> dict:
        return {
            "spec_id": self.spec_id,
            "role": self.role,
            "tools": list(self.tools),
            "dependencies": list(self.dependencies),
            "io_contract": self.io_contract.to_dict(),
            "verification_criteria": self.verification_criteria.to_dict(),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "AgentSpec":
        return cls(
            spec_id=str(raw["spec_id"]),
            role=str(raw.get("role", "")),
            tools=[str(t) for t in raw.get("tools", [])],
            dependencies=[str(d) for d in raw.get("dependencies", [])],
            io_contract=IoContract.from_dict(raw.get("io_contract", {})),
            verification_criteria=VerificationCriteria.from_dict(
                raw.get("verification_criteria", {})
            ),
        )

    def content_hash(self) -> str:
        return sha256_hex(canonical_json(self.to_dict()))

    def output_field_names(self) -> set[str]:
        return {f.name for f in self.io_contract.output_schema}

    def input_field_names(self) -> set[str]:
        return {f.name for f in self.io_contract.input_schema}


@dataclass(frozen=True)
class DagEdge:
    from_spec: str
    to_spec: str

    def to_dict(self) -> dict:
        return {"from_spec": self.from_spec, "to_spec": self.to_spec}

    @classmethod
    def from_dict(cls, raw: dict) -> "DagEdge":
        # Planner replies sometimes abbreviate the endpoint keys.
        return cls(
            from_spec=str(raw.get("from_spec", raw.get("from", ""))),
            to_spec=str(raw.get("to_spec", raw.get("to", ""))),
        )


@dataclass
class SwarmPlan:
    swarm_name: str
    summary: str = ""
    coordination_strategy: str = ""
    specs: list[AgentSpec] = field(default_factory=list)
    dag_edges: list[DagEdge] = field(default_factory=list)

    @property
    def spec_map(self) -> dict[str, AgentSpec]:
        return {s.spec_id: s for s in self.specs}

    def roots(self) -> list[str]:
        return [s.spec_id for s in self.specs if not s.dependencies]

    def terminals(self) -> list[str]:
        sources = {e.from_spec for e in self.dag_edges}
        return [s.spec_id for s in self.specs if s.spec_id not in sources]

    def to_dict(self) -> dict:
        return {
            "swarm_name": self.swarm_name,
            "summary": self.summary,
            "coordination_strategy": self.coordination_strategy,
            "specs": [s.to_dict() for s in self.specs],
            "dag_edges": [e.to_dict() for e in self.dag_edges],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SwarmPlan":
        specs = [AgentSpec.from_dict(s) for s in raw.get("specs", [])]
        edges = [DagEdge.from_dict(e) for e in raw.get("dag_edges", [])]
        if not edges and any(s.dependencies for s in specs):
            edges = edges_from_dependencies(specs)
        if edges and not any(s.dependencies for s in specs):
            apply_dependencies_from_edges(specs, edges)
        return cls(
            swarm_name=str(raw.get("swarm_name", "")),
            summary=str(raw.get("summary", "")),
            coordination_strategy=str(raw.get("coordination_strategy", "")),
            specs=specs,
            dag_edges=edges,
        )


def edges_from_dependencies(specs: list[AgentSpec]) -> list[DagEdge]:
    edges = []
    for spec in specs:
        for dep in spec.dependencies:
            edges.append(DagEdge(from_spec=dep, to_spec=spec.spec_id))
    return edges


def apply_dependencies_from_edges(specs: list[AgentSpec], edges: list[DagEdge]) -> None:
    incoming: dict[str, list[str]] = {s.spec_id: [] for s in specs}
    for edge in edges:
        if edge.to_spec in incoming:
            incoming[edge.to_spec].append(edge.from_spec)
    for spec in specs:
        spec.dependencies = incoming[spec.spec_id]


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def task_input_namespace(plan: SwarmPlan) -> set[str]:
    """Field names the caller supplies at run time: the root specs' inputs."""
    names: set[str] = set()
    for spec in plan.specs:
        if not spec.dependencies:
            names |= spec.input_field_names()
    return names


DOCUMENT_SUFFIX = "_document"


def resolve_input_source(
    plan: SwarmPlan, spec: AgentSpec, field_name: str
) -> tuple[str, str] | None:
    """Find where an input field comes from.

    Returns (producer_spec_id, source_kind) with source_kind one of
    "field" (a dependency's named output, dependencies searched in
    topological order, first match wins), "task" (the task-input
    namespace), or "document" (a "<prefix>_document" field resolving to
    the whole output of the unique dependency whose id starts with
    <prefix>). None when unresolvable; ambiguity raises ValueError.
    """
    spec_map = plan.spec_map
    try:
        order = topological_order(plan)
    except PlanCycleError:
        order = [s.spec_id for s in plan.specs]
    deps_in_order = [d for d in order if d in spec.dependencies]
    for dep_id in deps_in_order:
        dep = spec_map.get(dep_id)
        if dep is not None and field_name in dep.output_field_names():
            return dep_id, "field"
    if field_name in task_input_namespace(plan):
        return "", "task"
    if field_name.endswith(DOCUMENT_SUFFIX):
        prefix = field_name[: -len(DOCUMENT_SUFFIX)]
        candidates = [d for d in deps_in_order if d.startswith(prefix)]
        if len(candidates) == 1:
            return candidates[0], "document"
        if len(candidates) > 1:
            raise ValueError(
                f"document reference {field_name!r} is ambiguous between {candidates}"
            )
    return None


def validate_plan(plan: SwarmPlan) -> list[str]:
    """Structural validation. The returned report is empty iff the plan is valid."""
    report: list[str] = []
    ids = [s.spec_id for s in plan.specs]
    id_set = set(ids)

    if not plan.specs:
        report.append("plan has no specs")
        return report

    seen: set[str] = set()
    for sid in ids:
        if sid in seen:
            report.append(f"duplicate spec_id {sid!r}")
        seen.add(sid)

    for spec in plan.specs:
        for dep in spec.dependencies:
            if dep not in id_set:
                report.append(f"spec {spec.spec_id!r} depends on unknown spec {dep!r}")
            if dep == spec.spec_id:
                report.append(f"spec {spec.spec_id!r} depends on itself")
        if not spec.io_contract.output_schema:
            report.append(f"spec {spec.spec_id!r} has an empty output schema")
        for tool in spec.verification_criteria.required_tools:
            if tool not in spec.tools:
                report.append(
                    f"spec {spec.spec_id!r} requires tool {tool!r} missing from its tools list"
                )
        for pattern in spec.verification_criteria.forbidden_patterns:
            error = pattern.compile_error()
            if error:
                report.append(f"spec {spec.spec_id!r}: {error}")

    for edge in plan.dag_edges:
        if edge.from_spec not in id_set or edge.to_spec not in id_set:
            report.append(f"edge ({edge.from_spec!r} -> {edge.to_spec!r}) has unknown endpoint")
        if edge.from_spec == edge.to_spec:
            report.append(f"edge ({edge.from_spec!r} -> {edge.to_spec!r}) is a self-loop")

    edge_set = {(e.from_spec, e.to_spec) for e in plan.dag_edges}
    dep_set = {(d, s.spec_id) for s in plan.specs for d in s.dependencies}
    for u, v in sorted(edge_set - dep_set):
        report.append(f"edge ({u!r} -> {v!r}) has no matching dependency entry")
    for u, v in sorted(dep_set - edge_set):
        report.append(f"dependency {u!r} of {v!r} has no matching edge")

    cycle_members = _cycle_members(plan)
    if cycle_members:
        report.append("cycle detected among specs: " + ", ".join(sorted(cycle_members)))

    if not any(not s.dependencies for s in plan.specs):
        report.append("plan has no root spec (every spec has dependencies)")

    # Input resolvability, only meaningful on an otherwise consistent graph.
    if not report:
        for spec in plan.specs:
            if not spec.dependencies:
                continue
            for f in spec.io_contract.input_schema:
                try:
                    source = resolve_input_source(plan, spec, f.name)
                except ValueError as exc:
                    report.append(f"spec {spec.spec_id!r}: {exc}")
                    continue
                if source is None:
                    report.append(
                        f"spec {spec.spec_id!r} input field {f.name!r} is not produced by "
                        "any dependency or the task input"
                    )
    return report


def _cycle_members(plan: SwarmPlan) -> set[str]:
    """Kahn elimination; whatever cannot be removed sits on a cycle."""
    ids = {s.spec_id for s in plan.specs}
    outgoing: dict[str, set[str]] = {sid: set() for sid in ids}
    indegree: dict[str, int] = {sid: 0 for sid in ids}
    for edge in plan.dag_edges:
        if edge.from_spec in ids and edge.to_spec in ids and edge.from_spec != edge.to_spec:
            if edge.to_spec not in outgoing[edge.from_spec]:
                outgoing[edge.from_spec].add(edge.to_spec)
                indegree[edge.to_spec] += 1
    queue = [sid for sid, deg in indegree.items() if deg == 0]
    removed = 0
    while queue:
        node = queue.pop()
        removed += 1
        for succ in outgoing[node]:
            indegree[succ] -= 1
            if indegree[succ] == 0:
                queue.append(succ)
    if removed == len(ids):
        return set()
    return {sid for sid, deg in indegree.items() if deg > 0}


def topological_order(plan: SwarmPlan) -> list[str]:
    """Deterministic topological order; ties broken by ascending spec_id."""
    ids = [s.spec_id for s in plan.specs]
    id_set = set(ids)
    indegree = {sid: 0 for sid in ids}
    outgoing: dict[str, set[str]] = {sid: set() for sid in ids}
    for edge in plan.dag_edges:
        if edge.from_spec in id_set and edge.to_spec in id_set:
            if edge.to_spec not in outgoing[edge.from_spec]:
                outgoing[edge.from_spec].add(edge.to_spec)
                indegree[edge.to_spec] += 1
    heap = [sid for sid in ids if indegree[sid] == 0]
    heapq.heapify(heap)
    order: list[str] = []
    while heap:
        node = heapq.heappop(heap)
        order.append(node)
        for succ in sorted(outgoing[node]):
            indegree[succ] -= 1
            if indegree[succ] == 0:
                heapq.heappush(heap, succ)
    if len(order) != len(ids):
        raise PlanCycleError(
            "cycle detected among specs: " + ", ".join(sorted(set(ids) - set(order)))
        )
    return order


def descendants(plan: SwarmPlan, spec_id: str) -> set[str]:
    outgoing: dict[str, set[str]] = {s.spec_id: set() for s in plan.specs}
    for edge in plan.dag_edges:
        if edge.from_spec in outgoing:
            outgoing[edge.from_spec].add(edge.to_spec)
    seen: set[str] = set()
    stack = [spec_id]
    while stack:
        node = stack.pop()
        for succ in outgoing.get(node, ()):
            if succ not in seen:
                seen.add(succ)
                stack.append(succ)
    return seen


def ancestors(plan: SwarmPlan, spec_id: str) -> set[str]:
    spec_map = plan.spec_map
    seen: set[str] = set()
    stack = [spec_id]
    while stack:
        node = stack.pop()
        spec = spec_map.get(node)
        if spec is None:
            continue
        for dep in spec.dependencies:
            if dep not in seen:
                seen.add(dep)
                stack.append(dep)
    return seen


# ---------------------------------------------------------------------------
# Planning
# ---------------------------------------------------------------------------


def plan_swarm(
    intent: ParsedIntent,
    backend: Backend,
    *,
    max_specs: int = MAX_SPECS_DEFAULT,
    feedback: list[str] | None = None,
    previous: SwarmPlan | None = None,
) -> SwarmPlan:
    """Decompose an intent into a validated SwarmPlan.

    When ``feedback``/``previous`` are given this is a replan: the prior
    plan and the failure feedback are shown to the planner. One repair
    attempt is made with the validation report appended; a second invalid
    plan raises PlanningError carrying the report.
    """
    payload: dict = {
        "intent": intent.to_dict(),
        "task_examples": [e.to_dict() for e in intent.task_examples],
        "max_specs": max_specs,
    }
    if previous is not None:
        payload["previous_plan"] = previous.to_dict()
    if feedback:
        payload["failure_feedback"] = list(feedback)
    request = ModelRequest(
        system_prompt=PLAN_SYSTEM_PROMPT,
        messages=[Message("user", fenced_json(payload))],
        max_output_tokens=4096,
    )

    report: list[str] = []
    for _ in range(2):
        parsed, _response = complete_structured(backend, request, repairs=1)
        if not isinstance(parsed, dict):
            report = ["planner reply is not an object"]
        else:
            plan = SwarmPlan.from_dict(parsed)
            report = validate_plan(plan)
            if len(plan.specs) > max_specs:
                report.append(f"plan exceeds the {max_specs}-spec cap")
            if not report:
                return plan
        request = replace(
            request,
            messages=request.messages
            + [
                Message("assistant", fenced_json(parsed if isinstance(parsed, dict) else {})),
                Message(
                    "user",
                    "The plan failed validation:\n- "
                    + "\n- ".join(report)
                    + "\nReply with a corrected plan as one fenced JSON object.",
                ),
            ],
        )
    raise PlanningError("planner produced an invalid plan after bounded repair", report)
