"""Execution phase: dependency-ordered dispatch under continuous gating.

The coordinator dispatches agents when their dependencies are satisfied,
routes intermediate outputs through a versioned context store, and gates
every output against its spec's criteria before anything downstream may
consume it (failed outputs are never written to the store). Gate
failures are attributed to one of three levels, and the recovery action
scales with the locality of the error: a local error retries the same
agent with feedback, an upstream error re-executes the responsible
dependency chain, and a structural error replans the affected subgraph.
All recovery is budgeted, so runs terminate.
"""

from __future__ import annotations

import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .backend import (
    Backend,
    Message,
    ModelRequest,
    ToolCall,
    TransportError,
    complete_structured,
)
from .codegen import AgentBundle, GeneratedAgent
from .contracts import (
    AssertionVerdict,
    ForbiddenMatch,
    SchemaViolation,
    check_forbidden,
    check_schema,
    evaluate_assertions,
    render_gate_text,
)
from .plan import (
    AgentSpec,
    SwarmPlan,
    ancestors,
    descendants,
    resolve_input_source,
    task_input_namespace,
    topological_order,
)
from .schema import JsonValue, StructuredOutputError, canonical_json, extract_structured, fenced_json
from .trace import TraceLog

MAX_TOOL_ROUNDS = 4

ATTRIBUTION_SYSTEM_PROMPT = (
    "You attribute a gated output failure to its source. A 'local' failure "
    "means the agent produced a bad output despite receiving correct inputs; "
    "an 'upstream' failure originates from one of the agent's dependencies; a "
    "'structural' failure means no existing agent could plausibly resolve the "
    "issue because the task decomposition itself is flawed. Reply with exactly "
    "one fenced JSON object with keys: label (one of 'local', 'upstream', "
    "'structural'), responsible_spec_id (string or null; required for "
    "'upstream'), and rationale (string)."
)


class ExecutionError(Exception):
    """The run cannot proceed (deadlock, tool-loop overflow)."""


class TaskInputError(ExecutionError):
    """The task input does not satisfy the root specs; raised before dispatch."""


class MissingInputError(ExecutionError):
    """A required input field could not be assembled at dispatch time."""

    def __init__(self, spec_id: str, field_name: str):
        super().__init__(
            f"required input field {field_name!r} of spec {spec_id!r} could not be resolved"
        )
        self.spec_id = spec_id
        self.field_name = field_name


# ---------------------------------------------------------------------------
# Context store
# ---------------------------------------------------------------------------

MISSING = object()


@dataclass(frozen=True)
class StoredVersion:
    value: JsonValue
    seq: int


class ContextStore:
    """Versioned routing of gated outputs between agents.

    Writes are append-only and happen only for gated-PASS outputs; reads
    resolve to the latest version. The task-input namespace is a separate
    read-only map.
    """

    def __init__(self, task_input: dict | None = None):
        self.task_input: dict[str, JsonValue] = dict(task_input or {})
        self._fields: dict[tuple[str, str], list[StoredVersion]] = {}
        self._documents: dict[str, list[StoredVersion]] = {}
        self._lock = threading.Lock()
        self._writes = 0

    def write_output(self, spec_id: str, output: dict, seq: int) -> None:
        with self._lock:
            self._writes += 1
            for name, value in output.items():
                self._fields.setdefault((spec_id, name), []).append(StoredVersion(value, seq))
            self._documents.setdefault(spec_id, []).append(StoredVersion(output, seq))

    def read(self, spec_id: str, field_name: str) -> JsonValue:
        versions = self._fields.get((spec_id, field_name))
        if not versions:
            return MISSING
        return versions[-1].value

    def read_document(self, spec_id: str) -> JsonValue:
        versions = self._documents.get(spec_id)
        if not versions:
            return MISSING
        return versions[-1].value

    def has_output(self, spec_id: str) -> bool:
        return spec_id in self._documents


# ---------------------------------------------------------------------------
# Gate verdicts
# ---------------------------------------------------------------------------


@dataclass
class GateVerdict:
    spec_id: str
    schema_violations: list[SchemaViolation] = field(default_factory=list)
    forbidden_matches: list[ForbiddenMatch] = field(default_factory=list)
    assertion_verdicts: list[AssertionVerdict] = field(default_factory=list)

    @property
    def failed_assertions(self) -> list[AssertionVerdict]:
        return [v for v in self.assertion_verdicts if not v.passed]

    @property
    def passed(self) -> bool:
        return (
            not self.schema_violations
            and not self.forbidden_matches
            and not self.failed_assertions
        )

    def issue_texts(self) -> list[str]:
        issues = [str(v) for v in self.schema_violations]
        issues += [f"forbidden pattern matched: {m.pattern} (span: {m.span!r})"
                   for m in self.forbidden_matches]
        issues += [f"assertion failed: {v.assertion} ({v.rationale})"
                   for v in self.failed_assertions]
        return issues

    def to_dict(self) -> dict:
        return {
            "spec_id": self.spec_id,
            "passed": self.passed,
            "schema_violations": [v.to_dict() for v in self.schema_violations],
            "forbidden_matches": [m.to_dict() for m in self.forbidden_matches],
            "assertion_verdicts": [v.to_dict() for v in self.assertion_verdicts],
        }


def gate_output(
    spec: AgentSpec,
    output: JsonValue,
    store: ContextStore,
    backend: Backend,
    *,
    gate_text: str = "",
    context: JsonValue = None,
    seq: int = 0,
    on_warning=None,
) -> GateVerdict:
    """Validate one output against the spec's criteria; write it on PASS.

    Schema and mechanical pattern checks are deterministic; behavioral
    assertions (plus model-judged forbidden patterns) go to the verifier
    model. Nothing is written to the store on FAIL.
    """
    criteria = spec.verification_criteria
    violations = check_schema(
        output, spec.io_contract.output_schema, on_warning=on_warning
    )
    mechanical = [p for p in criteria.forbidden_patterns if p.kind != "model_judged"]
    matches = check_forbidden(gate_text, mechanical)

    semantic = list(criteria.behavioral_assertions)
    semantic += [
        f"The output must not violate: {p.text}"
        for p in criteria.forbidden_patterns
        if p.kind == "model_judged"
    ]
    verdicts = (
        evaluate_assertions(output, semantic, context, backend) if semantic else []
    )

    verdict = GateVerdict(
        spec_id=spec.spec_id,
        schema_violations=violations,
        forbidden_matches=matches,
        assertion_verdicts=verdicts,
    )
    if verdict.passed and isinstance(output, dict):
        store.write_output(spec.spec_id, output, seq)
    return verdict


# ---------------------------------------------------------------------------
# Attribution
# ---------------------------------------------------------------------------

LOCAL = "local"
UPSTREAM = "upstream"
STRUCTURAL = "structural"


@dataclass(frozen=True)
class AttributionLabel:
    kind: str  # local | upstream | structural
    responsible_spec_id: str | None = None

    @classmethod
    def local(cls) -> "AttributionLabel":
        return cls(LOCAL)

    @classmethod
    def upstream(cls, spec_id: str) -> "AttributionLabel":
        return cls(UPSTREAM, spec_id)

    @classmethod
    def structural(cls) -> "AttributionLabel":
        return cls(STRUCTURAL)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "responsible_spec_id": self.responsible_spec_id}


def _mentions(text: str, token: str) -> bool:
    return re.search(rf"(?<![A-Za-z0-9_]){re.escape(token)}(?![A-Za-z0-9_])", text) is not None


def attribute_error(
    spec: AgentSpec,
    verdict: GateVerdict,
    store: ContextStore,
    trace: TraceLog,
    backend: Backend,
    *,
    plan: SwarmPlan,
) -> AttributionLabel:
    """Classify a gate failure as local, upstream, or structural.

    Mechanical rules run first: a violated assertion that names one of
    the spec's input fields implicates that field's producer (upstream);
    a violation naming a contract field that no dependency produces and
    the task input does not carry is structural; a pure schema violation
    of the spec's own output contract is local. Anything still ambiguous
    is put to the attribution model; an unparseable reply defaults to
    local (the cheapest action) with a trace warning.
    """
    failed_texts = [
        f"{v.assertion} {v.rationale}" for v in verdict.failed_assertions
    ] + [f"{m.pattern} {m.span}" for m in verdict.forbidden_matches]
    transitive = ancestors(plan, spec.spec_id)

    # Upstream: a failed check references an input field traced to a dependency.
    for f in spec.io_contract.input_schema:
        if not any(_mentions(text, f.name) for text in failed_texts):
            continue
        try:
            source = resolve_input_source(plan, spec, f.name)
        except ValueError:
            source = None
        if source is not None and source[1] in ("field", "document"):
            return AttributionLabel.upstream(source[0])

    # Structural: a failed check concerns a contract field absent from every
    # upstream output schema and from the task input.
    own = spec.input_field_names() | spec.output_field_names()
    upstream_fields: set[str] = set()
    for dep_id in transitive:
        dep = plan.spec_map.get(dep_id)
        if dep is not None:
            upstream_fields |= dep.output_field_names()
    vocabulary: set[str] = set()
    for other in plan.specs:
        vocabulary |= other.input_field_names() | other.output_field_names()
    reachable = own | upstream_fields | task_input_namespace(plan)
    for token in sorted(vocabulary - reachable):
        if any(_mentions(text, token) for text in failed_texts):
            return AttributionLabel.structural()

    # Pure own-contract schema violations are local: the inputs were fine.
    if verdict.schema_violations and not failed_texts:
        return AttributionLabel.local()

    payload = {
        "failing_spec": spec.to_dict(),
        "verdict": verdict.to_dict(),
        "dependencies": list(spec.dependencies),
        "transitive_dependencies": sorted(transitive),
    }
    request = ModelRequest(
        system_prompt=ATTRIBUTION_SYSTEM_PROMPT,
        messages=[Message("user", fenced_json(payload))],
    )
    try:
        parsed, _ = complete_structured(backend, request, repairs=1)
    except StructuredOutputError:
        trace.append(
            "warning",
            stage="attribution",
            spec_id=spec.spec_id,
            message="attribution model reply unparseable; defaulting to local",
        )
        return AttributionLabel.local()
    label = str(parsed.get("label", "")).lower() if isinstance(parsed, dict) else ""
    if label == UPSTREAM:
        responsible = str(parsed.get("responsible_spec_id") or "")
        if responsible in transitive:
            return AttributionLabel.upstream(responsible)
        trace.append(
            "warning",
            stage="attribution",
            spec_id=spec.spec_id,
            message=f"attribution named {responsible!r} which is not a dependency; using local",
        )
        return AttributionLabel.local()
    if label == STRUCTURAL:
        return AttributionLabel.structural()
    if label == LOCAL:
        return AttributionLabel.local()
    trace.append(
        "warning",
        stage="attribution",
        spec_id=spec.spec_id,
        message=f"attribution label {label!r} unknown; defaulting to local",
    )
    return AttributionLabel.local()


# ---------------------------------------------------------------------------
# Recovery
# ---------------------------------------------------------------------------

RETRY_LOCAL = "retry_local"
REEXECUTE_UPSTREAM = "reexecute_upstream"
REPLAN_SUBGRAPH = "replan_subgraph"


@dataclass(frozen=True)
class RecoveryBudgets:
    local_retries: int = 2  # per spec
    upstream_chains: int = 1  # per run
    structural_replans: int = 1  # per run


@dataclass
class BudgetState:
    budgets: RecoveryBudgets
    local_remaining: dict[str, int] = field(default_factory=dict)
    upstream_remaining: int = 0
    structural_remaining: int = 0

    @classmethod
    def fresh(cls, budgets: RecoveryBudgets) -> "BudgetState":
        return cls(
            budgets=budgets,
            upstream_remaining=budgets.upstream_chains,
            structural_remaining=budgets.structural_replans,
        )

    def local_left(self, spec_id: str) -> int:
        return self.local_remaining.setdefault(spec_id, self.budgets.local_retries)


@dataclass(frozen=True)
class RecoveryAction:
    kind: str  # retry_local | reexecute_upstream | replan_subgraph
    feedback: tuple[str, ...] = ()
    spec_id: str | None = None  # upstream target
    affected: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "feedback": list(self.feedback),
            "spec_id": self.spec_id,
            "affected": list(self.affected),
        }


def recover(
    label: AttributionLabel,
    budgets: BudgetState,
    *,
    failing_spec_id: str,
    feedback: list[str] | None = None,
    affected: list[str] | None = None,
) -> RecoveryAction | None:
    """Map an attribution label to its recovery action, spending budget.

    Returns None when the relevant budget is exhausted (a terminal
    failure for the run).
    """
    feedback = tuple(feedback or ())
    if label.kind == LOCAL:
        left = budgets.local_left(failing_spec_id)
        if left <= 0:
            return None
        budgets.local_remaining[failing_spec_id] = left - 1
        return RecoveryAction(kind=RETRY_LOCAL, feedback=feedback)
    if label.kind == UPSTREAM:
        if budgets.upstream_remaining <= 0:
            return None
        budgets.upstream_remaining -= 1
        return RecoveryAction(
            kind=REEXECUTE_UPSTREAM, feedback=feedback, spec_id=label.responsible_spec_id
        )
    if budgets.structural_remaining <= 0:
        return None
    budgets.structural_remaining -= 1
    return RecoveryAction(
        kind=REPLAN_SUBGRAPH,
        feedback=feedback,
        affected=tuple(affected or (failing_spec_id,)),
    )


# ---------------------------------------------------------------------------
# Agent invocation
# ---------------------------------------------------------------------------


def execute_tool(call: ToolCall, backend: Backend, run_dir: str | Path | None) -> JsonValue:
    if call.name == "web_search":
        query = str(call.arguments.get("query", ""))
        limit = int(call.arguments.get("max_results", 5) or 5)
        try:
            return [r.to_dict() for r in backend.search(query, limit)]
        except (TransportError, ValueError) as exc:
            return {"error": str(exc)}
    if call.name == "file_generator":
        raw_path = str(call.arguments.get("path", "generated.txt"))
        parts = [p for p in Path(raw_path).parts if p not in ("..", "/", "")]
        base = Path(run_dir) / "generated_files" if run_dir else Path.cwd() / "generated_files"
        target = base.joinpath(*parts) if parts else base / "generated.txt"
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(str(call.arguments.get("content", "")), encoding="utf-8")
        return {"path": str(target)}
    return {"error": f"unknown tool {call.name!r}"}


def invoke_agent(
    agent: GeneratedAgent,
    payload: dict,
    backend: Backend,
    *,
    feedback: list[str] | None = None,
    run_dir: str | Path | None = None,
    max_output_tokens: int = 4096,
) -> tuple[str, list[ToolCall]]:
    """Run one agent on an input payload; returns (reply text, tool calls made).

    Implements the run(message, history) convention: the input payload is
    rendered as the message, tool results are appended to the history,
    and the loop is bounded.
    """
    message = (
        "Input:\n"
        + fenced_json(payload)
        + "\n\nProduce your output now. Reply with exactly one fenced JSON object "
        "matching your output schema."
    )
    if agent.output_parser_hint:
        message += f"\nFormat note: {agent.output_parser_hint}"
    if feedback:
        message += "\n\nFeedback on your previous attempt:\n- " + "\n- ".join(feedback)

    history = [Message("user", message)]
    calls_made: list[ToolCall] = []
    for _ in range(MAX_TOOL_ROUNDS + 1):
        response = backend.complete(
            ModelRequest(
                system_prompt=agent.system_prompt,
                messages=history,
                tool_declarations=list(agent.tool_bindings),
                max_output_tokens=max_output_tokens,
            )
        )
        if not response.tool_calls:
            return response.text, calls_made
        calls_made.extend(response.tool_calls)
        history = history + [
            Message(
                "assistant",
                response.text
                or canonical_json([tc.to_dict() for tc in response.tool_calls]),
            )
        ]
        for call in response.tool_calls:
            result = execute_tool(call, backend, run_dir)
            history.append(Message("tool", canonical_json({"tool": call.name, "result": result})))
    raise ExecutionError(f"tool-call round limit exceeded for agent {agent.spec_id!r}")


def assemble_input(
    plan: SwarmPlan, spec: AgentSpec, store: ContextStore
) -> dict:
    """Build an agent's input from upstream outputs and the task namespace.

    Name match against dependencies in topological order wins first, then
    the task input, then whole-output document references.
    """
    payload: dict = {}
    for f in spec.io_contract.input_schema:
        try:
            source = resolve_input_source(plan, spec, f.name)
        except ValueError:
            source = None
        if source is None:
            if f.optional:
                continue
            raise MissingInputError(spec.spec_id, f.name)
        producer, kind = source
        if kind == "task":
            if f.name not in store.task_input:
                if f.optional:
                    continue
                raise MissingInputError(spec.spec_id, f.name)
            payload[f.name] = store.task_input[f.name]
        elif kind == "field":
            value = store.read(producer, f.name)
            if value is MISSING:
                raise MissingInputError(spec.spec_id, f.name)
            payload[f.name] = value
        else:  # whole-output document reference
            document = store.read_document(producer)
            if document is MISSING:
                raise MissingInputError(spec.spec_id, f.name)
            payload[f.name] = canonical_json(document)
    return payload


# ---------------------------------------------------------------------------
# The run loop
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    success: bool
    final_outputs: dict[str, JsonValue]
    outputs: dict[str, JsonValue]
    trace: TraceLog

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "final_outputs": self.final_outputs,
            "outputs": self.outputs,
        }


def _audited_upstream(plan: SwarmPlan, spec: AgentSpec) -> str | None:
    """The producer a swarm-member verifier audits: its last dependency in
    topological order."""
    if not spec.dependencies:
        return None
    order = topological_order(plan)
    deps = [d for d in order if d in spec.dependencies]
    return deps[-1] if deps else None


def _verifier_feedback(output: dict) -> list[str]:
    items = output.get("revision_request") or output.get("errors_found") or []
    feedback = []
    for item in items:
        if isinstance(item, dict):
            feedback.append(canonical_json(item))
        else:
            feedback.append(str(item))
    return feedback or ["a downstream verifier rejected this output"]


def execute_swarm(
    bundle: AgentBundle,
    task_input: dict,
    budgets: RecoveryBudgets | None = None,
    backend: Backend | None = None,
    *,
    trace: TraceLog | None = None,
    serial: bool = True,
    run_dir: str | Path | None = None,
    replan_fn=None,
    max_workers: int = 4,
) -> RunResult:
    """Run a bundle's DAG to completion under gating and budgeted recovery.

    ``replan_fn(bundle, feedback, backend, trace) -> (bundle, invalidated)``
    handles structural recovery; it defaults to the construction-side
    subgraph replanner. Serial mode (the default for tests and replay)
    dispatches one ready spec at a time in deterministic order; concurrent
    mode dispatches every ready spec per wave, gating results in order.
    """
    if backend is None:
        raise ValueError("execute_swarm requires a backend")
    budgets = budgets or RecoveryBudgets()
    state = BudgetState.fresh(budgets)
    trace = trace if trace is not None else TraceLog()
    store = ContextStore(task_input)
    current = bundle

    missing = [
        f.name
        for root in current.plan.specs
        if not root.dependencies
        for f in root.io_contract.input_schema
        if f.name not in store.task_input and not f.optional
    ]
    if missing:
        raise TaskInputError(
            "task input does not satisfy the root specs' input fields: "
            + ", ".join(sorted(set(missing)))
        )

    if replan_fn is None:
        from .verify import replan_subgraph

        def replan_fn(b, feedback, be, tr):
            return replan_subgraph(b, feedback, be, trace=tr)

    completed: set[str] = set()
    feedback_for: dict[str, list[str]] = {}
    attempts: dict[str, int] = {}

    def fail_run(reason: str, **data) -> RunResult:
        trace.append("budget_exhausted", reason=reason, **data)
        trace.append("completion", success=False)
        return RunResult(False, {}, _collect_outputs(current.plan, store), trace)

    while True:
        order = topological_order(current.plan)
        pending = [sid for sid in order if sid not in completed]
        if not pending:
            break
        spec_map = current.plan.spec_map
        ready = [
            sid
            for sid in pending
            if all(dep in completed for dep in spec_map[sid].dependencies)
        ]
        if not ready:
            raise ExecutionError("no dispatchable spec; the plan is inconsistent")
        batch = ready[:1] if serial else ready

        invocations: list[tuple[str, dict | None, str, list[ToolCall], Exception | None]] = []

        def run_one(sid: str):
            spec = spec_map[sid]
            try:
                payload = assemble_input(current.plan, spec, store)
            except MissingInputError as exc:
                return sid, None, "", [], exc
            agent = current.agent_for(sid)
            attempts[sid] = attempts.get(sid, 0) + 1
            trace.append(
                "dispatch",
                spec_id=sid,
                attempt=attempts[sid],
                inputs=payload,
            )
            text, calls = invoke_agent(
                agent,
                payload,
                backend,
                feedback=feedback_for.pop(sid, None),
                run_dir=run_dir,
            )
            trace.append("output", spec_id=sid, chars=len(text), tool_calls=len(calls))
            return sid, payload, text, calls, None

        if len(batch) > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                invocations = list(pool.map(run_one, batch))
        else:
            invocations = [run_one(batch[0])]

        mutated = False
        for sid, payload, text, calls, dispatch_error in invocations:
            if mutated:
                break  # graph changed mid-batch; stale invocations re-run later
            spec = spec_map[sid]

            if dispatch_error is not None:
                # Missing required input: a contract-style structural signal.
                verdict = GateVerdict(
                    spec_id=sid,
                    schema_violations=[SchemaViolation("", str(dispatch_error))],
                )
                trace.append("gate", **verdict.to_dict())
                label = AttributionLabel.structural()
                trace.append("attribution", spec_id=sid, label=label.kind,
                             responsible_spec_id=label.responsible_spec_id)
                action = recover(
                    label, state, failing_spec_id=sid, feedback=[str(dispatch_error)]
                )
                if action is None:
                    return fail_run("structural budget exhausted", spec_id=sid)
                trace.append("recovery", spec_id=sid, action=action.kind,
                             feedback=list(action.feedback), target=action.spec_id,
                             affected=list(action.affected))
                current, invalidated = replan_fn(
                    current, list(action.feedback), backend, trace
                )
                completed = {
                    c for c in completed
                    if c in current.plan.spec_map and c not in invalidated
                }
                mutated = True
                continue

            parse_violation = None
            output = None
            try:
                output = extract_structured(text)
            except StructuredOutputError as exc:
                parse_violation = SchemaViolation("", f"output is not structured: {exc}")

            if parse_violation is not None:
                verdict = GateVerdict(spec_id=sid, schema_violations=[parse_violation])
            else:
                verdict = gate_output(
                    spec,
                    output,
                    store,
                    backend,
                    gate_text=render_gate_text(text, calls),
                    context=payload,
                    seq=trace.events[-1].seq if trace.events else 0,
                    on_warning=lambda msg, _sid=sid: trace.append(
                        "warning", stage="gate", spec_id=_sid, message=msg
                    ),
                )
            trace.append("gate", output=output, **verdict.to_dict())

            if verdict.passed:
                completed.add(sid)
                # A swarm-member verifier's FAIL verdict counts as a gate
                # failure of the producer it audits.
                if (
                    isinstance(output, dict)
                    and str(output.get("verdict", "")).strip() == "FAIL"
                    and spec.dependencies
                ):
                    audited = _audited_upstream(current.plan, spec)
                    if audited is not None:
                        seeded = _verifier_feedback(output)
                        trace.append(
                            "gate",
                            spec_id=audited,
                            passed=False,
                            schema_violations=[],
                            forbidden_matches=[],
                            assertion_verdicts=[],
                            swarm_verifier=sid,
                            issues=seeded,
                        )
                        label = AttributionLabel.upstream(audited)
                        trace.append("attribution", spec_id=audited, label=label.kind,
                                     responsible_spec_id=label.responsible_spec_id)
                        action = recover(
                            label, state, failing_spec_id=sid, feedback=seeded
                        )
                        if action is None:
                            return fail_run("upstream budget exhausted", spec_id=audited)
                        trace.append("recovery", spec_id=audited, action=action.kind,
                                     feedback=list(action.feedback), target=action.spec_id,
                                     affected=list(action.affected))
                        chain = {audited} | (
                            descendants(current.plan, audited)
                            & (ancestors(current.plan, sid) | {sid})
                        ) | {sid}
                        completed -= chain
                        feedback_for[audited] = seeded
                        mutated = True
                continue

            # Gate failure: attribute, then recover.
            label = attribute_error(
                spec, verdict, store, trace, backend, plan=current.plan
            )
            trace.append("attribution", spec_id=sid, label=label.kind,
                         responsible_spec_id=label.responsible_spec_id)
            issues = verdict.issue_texts()
            action = recover(label, state, failing_spec_id=sid, feedback=issues)
            if action is None:
                return fail_run(f"{label.kind} budget exhausted", spec_id=sid)
            trace.append("recovery", spec_id=sid, action=action.kind,
                         feedback=list(action.feedback), target=action.spec_id,
                         affected=list(action.affected))

            if action.kind == RETRY_LOCAL:
                feedback_for[sid] = list(action.feedback)
                mutated = True
            elif action.kind == REEXECUTE_UPSTREAM:
                target = action.spec_id or sid
                chain = {target} | (
                    descendants(current.plan, target)
                    & (ancestors(current.plan, sid) | {sid})
                ) | {sid}
                completed -= chain
                feedback_for[target] = list(action.feedback)
                mutated = True
            else:  # replan the affected subgraph and resume
                current, invalidated = replan_fn(
                    current, list(action.feedback), backend, trace
                )
                completed = {
                    c for c in completed
                    if c in current.plan.spec_map and c not in invalidated
                }
                mutated = True

    final = {
        sid: store.read_document(sid)
        for sid in current.plan.terminals()
        if store.has_output(sid)
    }
    trace.append("completion", success=True, final_specs=sorted(final))
    return RunResult(True, final, _collect_outputs(current.plan, store), trace)


def _collect_outputs(plan: SwarmPlan, store: ContextStore) -> dict[str, JsonValue]:
    return {
        s.spec_id: store.read_document(s.spec_id)
        for s in plan.specs
        if store.has_output(s.spec_id)
    }
