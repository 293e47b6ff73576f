import pytest
from hypothesis import given
from hypothesis import strategies as st

from swarmforge.backend import ToolDeclaration
from swarmforge.codegen import CODEGEN_SYSTEM_PROMPT, GeneratedAgent
from swarmforge.grounding import SUMMARY_SYSTEM_PROMPT, GroundingReport
from swarmforge.intent import ParsedIntent, TaskExample
from swarmforge.plan import PLAN_SYSTEM_PROMPT
from swarmforge.verify import (
    VERIFIER_SYSTEM_PROMPT,
    ConstructionError,
    ConstructionVerdict,
    FailureType,
    StageRoute,
    behavioral_check,
    representative_inputs,
    route_failure,
    static_check,
    verify_construction,
)
from swarmforge.trace import TraceLog
from tests.conftest import (
    StubBackend,
    make_plan,
    make_spec,
    payload_of,
    stub_agent_prompt,
    stub_codegen_handler,
)


def intent():
    return ParsedIntent(goal="g", constraints=["c"])


# ---------------------------------------------------------------------------
# Routing table (pinned)
# ---------------------------------------------------------------------------


def test_routing_table_is_total_and_pinned():
    assert route_failure(FailureType.SPEC_ADHERENCE) is StageRoute.REGENERATE_AGENT
    assert route_failure(FailureType.GROUNDING) is StageRoute.RERUN_GROUNDING
    assert route_failure(FailureType.CONTRACT) is StageRoute.REPLAN
    # Exhaustive: every failure type maps to exactly one route.
    routes = {route_failure(ft) for ft in FailureType}
    assert len(routes) == len(FailureType) == 3


# ---------------------------------------------------------------------------
# static_check
# ---------------------------------------------------------------------------


def conforming_agent(spec):
    return GeneratedAgent(
        spec_id=spec.spec_id,
        system_prompt=stub_agent_prompt(spec),
        tool_bindings=[ToolDeclaration(t) for t in spec.tools],
        output_parser_hint="first fenced JSON object",
    )


def test_conformant_agent_has_no_issues():
    spec = make_spec("s", tools=("web_search",), required_tools=("web_search",))
    assert static_check(conforming_agent(spec), spec) == []


def test_missing_required_tool_binding_named():
    spec = make_spec("s", tools=("web_search",), required_tools=("web_search",))
    agent = conforming_agent(spec)
    agent.tool_bindings = []
    issues = static_check(agent, spec)
    assert any("web_search" in i and "required" in i for i in issues)


def test_binding_outside_spec_tools_is_violation():
    spec = make_spec("s")
    agent = conforming_agent(spec)
    agent.tool_bindings = [ToolDeclaration("file_generator")]
    issues = static_check(agent, spec)
    assert any("not in the spec's tools" in i for i in issues)


def test_empty_prompt_and_missing_hint_flagged():
    spec = make_spec("s")
    agent = conforming_agent(spec)
    agent.system_prompt = "  "
    agent.output_parser_hint = ""
    issues = static_check(agent, spec)
    assert any("system prompt is empty" in i for i in issues)
    assert any("output_parser_hint" in i for i in issues)


def test_unreferenced_contract_field_flagged():
    spec = make_spec("s", inputs=("payload",), outputs=("summary",))
    agent = conforming_agent(spec)
    agent.system_prompt = "does things, mentions payload only"
    issues = static_check(agent, spec)
    assert any("'summary'" in i for i in issues)


# ---------------------------------------------------------------------------
# behavioral_check and representative inputs
# ---------------------------------------------------------------------------


def test_behavioral_check_parses_rejection():
    spec = make_spec("classifier")

    def verifier(request):
        return {
            "approved": False,
            "failure_type": "spec_adherence",
            "issues": ["instructs the agent to solve instead of classify"],
        }

    backend = StubBackend().on_system(VERIFIER_SYSTEM_PROMPT, verifier)
    verdict = behavioral_check(conforming_agent(spec), spec, backend, pass_number=1)
    assert not verdict.approved
    assert verdict.failure_type is FailureType.SPEC_ADHERENCE
    assert "solve" in verdict.issues[0]


def test_vacuous_criteria_approved():
    spec = make_spec("plain")  # no assertions, no patterns
    backend = StubBackend().on_system(
        VERIFIER_SYSTEM_PROMPT, lambda r: {"approved": True, "issues": []}
    )
    verdict = behavioral_check(conforming_agent(spec), spec, backend)
    assert verdict.approved and verdict.failure_type is None


def test_unknown_failure_type_defaults_to_spec_adherence():
    backend = StubBackend().on_system(
        VERIFIER_SYSTEM_PROMPT,
        lambda r: {"approved": False, "failure_type": "cosmic", "issues": ["x"]},
    )
    spec = make_spec("s")
    verdict = behavioral_check(conforming_agent(spec), spec, backend)
    assert verdict.failure_type is FailureType.SPEC_ADHERENCE


def test_representative_inputs_prefer_matching_examples():
    spec = make_spec("math_solver")
    spec.role = "solves algebra problems"
    examples = [
        TaskExample(task_type="algebra drills", example="x+1=2"),
        TaskExample(task_type="geometry", example="area"),
        TaskExample(task_type="algebra proofs", example="induction"),
    ]
    got = representative_inputs(spec, ParsedIntent(goal="g", task_examples=examples))
    assert [e["task_type"] for e in got] == ["algebra drills", "algebra proofs"]


def test_representative_inputs_synthesized_when_nothing_matches():
    spec = make_spec("s", inputs=("question",))
    (synthetic,) = representative_inputs(spec, intent())
    assert "question" in synthetic


@given(st.booleans(), st.sampled_from([None, *FailureType]), st.lists(st.text(max_size=10), max_size=3))
def test_verdict_invariants_always_hold(approved, failure_type, issues):
    verdict = ConstructionVerdict(
        spec_id="s", pass_number=1, approved=approved,
        failure_type=failure_type, issues=list(issues),
    )
    if verdict.approved:
        assert verdict.failure_type is None and verdict.issues == []
    else:
        assert verdict.failure_type is not None and verdict.issues


# ---------------------------------------------------------------------------
# verify_construction scenarios
# ---------------------------------------------------------------------------


def pipeline_backend(verifier_script, planner=None, summaries=True):
    """Codegen always emits a statically clean agent; the verifier is scripted.

    verifier_script(spec_id, generation) -> verdict payload.
    """
    stub = StubBackend().on_system(CODEGEN_SYSTEM_PROMPT, stub_codegen_handler)

    def verifier(request):
        payload = payload_of(request)
        return verifier_script(
            payload["spec"]["spec_id"], int(payload["agent"].get("generation", 1))
        )

    stub.on_system(VERIFIER_SYSTEM_PROMPT, verifier)
    if planner is not None:
        stub.on_system(PLAN_SYSTEM_PROMPT, planner)
    if summaries:
        stub.on_system(
            SUMMARY_SYSTEM_PROMPT,
            lambda r: {"research_summary": "fresh notes", "recommendations": []},
        )
        stub.on_search(lambda q, n: [{"title": "t", "url": "https://x", "snippet": "s"}])
    return stub


def approve_all(spec_id, generation):
    return {"approved": True, "issues": []}


def two_spec_plan():
    return make_plan(
        [make_spec("a"), make_spec("b", deps=("a",), inputs=("result",), outputs=("out_b",))]
    )


def test_happy_path_zero_regenerations():
    trace = TraceLog()
    backend = pipeline_backend(approve_all)
    bundle = verify_construction(two_spec_plan(), GroundingReport(), intent(), backend, trace=trace)
    assert {a.spec_id for a in bundle.agents} == {"a", "b"}
    assert all(a.generation == 1 for a in bundle.agents)
    generates = trace.of_kind("generate")
    assert len(generates) == 2


def test_spec_adherence_then_approval_threads_feedback():
    issues_pass_1 = ["streams raw output instead of structured fields"]

    def script(spec_id, generation):
        if spec_id == "b" and generation == 1:
            return {"approved": False, "failure_type": "spec_adherence", "issues": issues_pass_1}
        return {"approved": True, "issues": []}

    trace = TraceLog()
    backend = pipeline_backend(script)
    bundle = verify_construction(two_spec_plan(), GroundingReport(), intent(), backend, trace=trace)
    agent_b = bundle.agent_for("b")
    assert agent_b.generation == 2
    # The pass-1 issues appear verbatim in the generation-2 request payload.
    regen_requests = [
        r for r in backend.requests
        if r.system_prompt == CODEGEN_SYSTEM_PROMPT
        and payload_of(r)["spec"]["spec_id"] == "b"
        and payload_of(r).get("generation") == 2
    ]
    assert regen_requests
    assert payload_of(regen_requests[0])["feedback"] == issues_pass_1
    # Locality: spec a was generated exactly once.
    a_generates = [e for e in trace.of_kind("generate") if e.data["spec_id"] == "a"]
    assert len(a_generates) == 1
    # No grounding reruns happened.
    assert trace.of_kind("grounding_rerun") == []


def test_three_failures_exhaust_passes():
    def script(spec_id, generation):
        if spec_id == "a":
            return {
                "approved": False,
                "failure_type": "spec_adherence",
                "issues": [f"rejection {generation}"],
            }
        return {"approved": True, "issues": []}

    backend = pipeline_backend(script)
    with pytest.raises(ConstructionError) as exc:
        verify_construction(two_spec_plan(), GroundingReport(), intent(), backend, max_passes=3)
    verdicts = [v for v in exc.value.verdicts if v.spec_id == "a"]
    assert len(verdicts) == 3
    assert all(v.failure_type is FailureType.SPEC_ADHERENCE for v in verdicts)
    assert [v.pass_number for v in verdicts] == [1, 2, 3]
    assert exc.value.failure_type is FailureType.SPEC_ADHERENCE


def test_grounding_failure_reruns_research_for_that_spec_only():
    state = {"reran": False}

    def script(spec_id, generation):
        if spec_id == "b" and generation == 1:
            return {"approved": False, "failure_type": "grounding", "issues": ["stale sources"]}
        return {"approved": True, "issues": []}

    trace = TraceLog()
    plan = make_plan(
        [
            make_spec("a", tools=("web_search",)),
            make_spec("b", deps=("a",), inputs=("result",), outputs=("out_b",),
                      tools=("web_search",)),
        ]
    )
    backend = pipeline_backend(script)
    bundle = verify_construction(plan, GroundingReport(), intent(), backend, trace=trace)
    reruns = trace.of_kind("grounding_rerun")
    assert len(reruns) == 1 and reruns[0].data["spec_ids"] == ["b"]
    assert bundle.agent_for("b").generation == 2
    # Exactly one search: the rerun for b. Spec a's grounding was never redone.
    assert backend.search_calls == 1


def test_contract_failure_replans_once_and_preserves_approved_agents():
    plan = two_spec_plan()
    revised = two_spec_plan()
    revised.spec_map["b"].role = "revised role for b"

    def script(spec_id, generation):
        if spec_id == "b" and generation == 1:
            # Only the original spec is rejected; the revised one approves.
            return {"approved": False, "failure_type": "contract", "issues": ["io mismatch"]}
        return {"approved": True, "issues": []}

    def verifier(request):
        payload = payload_of(request)
        spec = payload["spec"]
        if spec["spec_id"] == "b" and spec["role"] != "revised role for b":
            return {"approved": False, "failure_type": "contract", "issues": ["io mismatch"]}
        return {"approved": True, "issues": []}

    trace = TraceLog()
    stub = StubBackend().on_system(CODEGEN_SYSTEM_PROMPT, stub_codegen_handler)
    stub.on_system(VERIFIER_SYSTEM_PROMPT, verifier)
    stub.on_system(PLAN_SYSTEM_PROMPT, lambda r: revised.to_dict())
    bundle = verify_construction(plan, GroundingReport(), intent(), stub, trace=trace)
    assert bundle.plan.spec_map["b"].role == "revised role for b"
    replans = trace.of_kind("replan")
    assert len(replans) == 1 and replans[0].data["changed"] == ["b"]
    # Spec a kept its approved agent: generated exactly once in total.
    a_generates = [e for e in trace.of_kind("generate") if e.data["spec_id"] == "a"]
    assert len(a_generates) == 1


def test_second_contract_failure_exhausts_replan_budget():
    plan = two_spec_plan()

    def always_contract(spec_id, generation):
        if spec_id == "b":
            return {"approved": False, "failure_type": "contract", "issues": ["broken io"]}
        return {"approved": True, "issues": []}

    # The planner returns the same plan, so the contract failure repeats.
    backend = pipeline_backend(always_contract, planner=lambda r: plan.to_dict())
    with pytest.raises(ConstructionError, match="replan budget"):
        verify_construction(plan, GroundingReport(), intent(), backend, replan_budget=1)


def test_static_failure_counts_as_pass_without_model_call():
    calls = {"verify": 0}

    def bad_codegen(request):
        payload = payload_of(request)
        reply = stub_codegen_handler(request)
        if payload["spec"]["spec_id"] == "a" and payload.get("generation", 1) == 1:
            reply = dict(reply, output_parser_hint="")
        return reply

    def verifier(request):
        calls["verify"] += 1
        return {"approved": True, "issues": []}

    stub = StubBackend().on_system(CODEGEN_SYSTEM_PROMPT, bad_codegen)
    stub.on_system(VERIFIER_SYSTEM_PROMPT, verifier)
    trace = TraceLog()
    bundle = verify_construction(
        make_plan([make_spec("a")]), GroundingReport(), intent(), backend=stub, trace=trace
    )
    assert bundle.agent_for("a").generation == 2
    # Pass 1 was rejected statically: only one behavioral check total.
    assert calls["verify"] == 1
    statics = [e for e in trace.of_kind("static_check") if not e.data["passed"]]
    assert len(statics) == 1


def test_verification_disabled_approves_everything_at_pass_one():
    trace = TraceLog()

    def never_called(spec_id, generation):
        raise AssertionError("behavioral verification must not run when disabled")

    backend = pipeline_backend(never_called)
    bundle = verify_construction(
        two_spec_plan(), GroundingReport(), intent(), backend,
        trace=trace, verification_enabled=False,
    )
    assert all(a.generation == 1 for a in bundle.agents)
    assert trace.of_kind("behavioral_check") == []
    assert len(trace.of_kind("auto_approve")) == 2


def test_max_passes_must_be_positive():
    with pytest.raises(ValueError):
        verify_construction(
            two_spec_plan(), GroundingReport(), intent(),
            pipeline_backend(approve_all), max_passes=0,
        )


def test_generation_counter_strictly_increases_in_trace():
    def script(spec_id, generation):
        if generation < 3:
            return {"approved": False, "failure_type": "spec_adherence", "issues": ["again"]}
        return {"approved": True, "issues": []}

    trace = TraceLog()
    backend = pipeline_backend(script)
    verify_construction(make_plan([make_spec("s")]), GroundingReport(), intent(),
                        backend, trace=trace)
    generations = [e.data["generation"] for e in trace.of_kind("generate")]
    assert generations == sorted(generations)
    assert len(set(generations)) == len(generations) == 3


def test_generation_failure_feeds_the_loop_as_adherence():
    # Generation itself fails (mandatory sections missing after bounded
    # repair) on pass 1; pass 2 generates and verifies cleanly.
    state = {"codegen_rounds": 0}

    def flaky_codegen(request):
        state["codegen_rounds"] += 1
        payload = payload_of(request)
        if payload.get("generation", 1) == 1:
            return {"tool_bindings": []}  # missing system_prompt / hint
        return stub_codegen_handler(request)

    stub = StubBackend().on_system(CODEGEN_SYSTEM_PROMPT, flaky_codegen)
    stub.on_system(VERIFIER_SYSTEM_PROMPT, lambda r: {"approved": True, "issues": []})
    trace = TraceLog()
    bundle = verify_construction(
        make_plan([make_spec("a")]), GroundingReport(), intent(), stub, trace=trace
    )
    assert bundle.agent_for("a").generation == 2
    verdicts = trace.of_kind("verdict")
    assert not verdicts[0].data["approved"]
    assert verdicts[0].data["failure_type"] == "spec_adherence"


def test_loop_boundedness_total_call_budget():
    # Worst case: every pass rejected. Behavioral checks are bounded by
    # specs * max_passes and codegen calls match them one-for-one.
    def reject(spec_id, generation):
        return {"approved": False, "failure_type": "spec_adherence", "issues": ["no"]}

    backend = pipeline_backend(reject)
    with pytest.raises(ConstructionError):
        verify_construction(
            make_plan([make_spec("only")]), GroundingReport(), intent(), backend,
            max_passes=3,
        )
    codegen_calls = [r for r in backend.requests if r.system_prompt == CODEGEN_SYSTEM_PROMPT]
    verify_calls = [r for r in backend.requests if r.system_prompt == VERIFIER_SYSTEM_PROMPT]
    assert len(codegen_calls) == 3 and len(verify_calls) == 3
