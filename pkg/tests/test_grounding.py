import json
from hypothesis import given
from hypothesis import strategies as st

from swarmforge.backend import TransportError
from swarmforge.grounding import (
    DEGRADED_SUMMARY,
    SUMMARY_SYSTEM_PROMPT,
    ApiRecommendation,
    GroundingReport,
    SearchDirective,
    derive_directives,
    execute_directives,
)
from swarmforge.plan import SwarmPlan
from swarmforge.trace import TraceLog
from tests.conftest import StubBackend, load_builder_module, make_plan, make_spec, payload_of

BUILDER = load_builder_module()


# ---------------------------------------------------------------------------
# derive_directives
# ---------------------------------------------------------------------------


def test_one_directive_per_tool_listing_spec():
    plan = make_plan(
        [
            make_spec("a", tools=("web_search",)),
            make_spec("b", deps=("a",), inputs=("result",), outputs=("out_b",)),
            make_spec(
                "c", deps=("a",), inputs=("result",), outputs=("out_c",),
                required_tools=("web_search",), tools=("web_search",),
            ),
        ]
    )
    directives = derive_directives(plan)
    assert [d.spec_id for d in directives] == ["a", "c"]
    assert all(d.directive_id == d.spec_id for d in directives)
    assert all(d.query_terms for d in directives)


def test_all_toolless_specs_yield_no_directives():
    plan = make_plan([make_spec("a"), make_spec("b", deps=("a",), inputs=("result",), outputs=("o",))])
    assert derive_directives(plan) == []


def test_demo_reading_plan_yields_four_directives_matching_spec_ids():
    plan = SwarmPlan.from_dict(BUILDER.ReadingComprehensionDemo.plan_payload)
    directives = derive_directives(plan)
    assert [d.directive_id for d in directives] == [
        "passage_analyst",
        "question_classifier",
        "reasoning_engine",
        "answer_formatter",
    ]


def test_demo_function_plan_yields_four_directives():
    plan = SwarmPlan.from_dict(BUILDER.FunctionCompletionDemo.plan_payload)
    assert len(derive_directives(plan)) == 4


def test_query_terms_come_from_role_and_contract():
    spec = make_spec("s", tools=("web_search",), outputs=("alpha", "beta", "gamma", "delta"))
    (directive,) = derive_directives(make_plan([spec]))
    assert spec.role in directive.query_terms
    assert "alpha" in directive.query_terms and "delta" not in directive.query_terms


# ---------------------------------------------------------------------------
# execute_directives
# ---------------------------------------------------------------------------


def summary_backend(recs_by_spec=None, hits=None):
    recs_by_spec = recs_by_spec or {}

    def handler(request):
        payload = payload_of(request)
        spec_id = payload["directive"]["spec_id"]
        return {
            "research_summary": f"notes for {spec_id}",
            "recommendations": recs_by_spec.get(spec_id, []),
        }

    stub = StubBackend().on_system(SUMMARY_SYSTEM_PROMPT, handler)
    stub.on_search(
        hits
        or (
            lambda q, n: [
                {"title": "hit", "url": "https://example.org/hit", "snippet": q[:40]}
            ]
        )
    )
    return stub


def directives_for(*spec_ids):
    return [
        SearchDirective(directive_id=s, spec_id=s, query_terms=(f"about {s}",))
        for s in spec_ids
    ]


def test_one_result_per_directive_sorted_by_spec_id():
    backend = summary_backend()
    report = execute_directives(directives_for("zeta", "alpha"), backend)
    assert [r.spec_id for r in report.directive_results] == ["alpha", "zeta"]
    assert all(r.research_summary.startswith("notes for") for r in report.directive_results)
    assert all(r.sources for r in report.directive_results)


def test_empty_directive_list_is_empty_report():
    report = execute_directives([], StubBackend())
    assert report.directive_results == [] and report.recommendations == []


def test_recommendations_ranked_descending_and_clamped():
    recs = {
        "a": [
            {"name": "low", "url": "u", "relevance_score": 0.2},
            {"name": "over", "url": "u", "relevance_score": 7.5},
        ],
        "b": [{"name": "mid", "url": "u", "relevance_score": 0.6}],
    }
    report = execute_directives(directives_for("a", "b"), summary_backend(recs))
    scores = [r.relevance_score for r in report.recommendations]
    assert scores == sorted(scores, reverse=True)
    assert report.recommendations[0].name == "over"
    assert report.recommendations[0].relevance_score == 1.0


def test_top_recommendation_score_one_from_demo_definitions():
    demo = BUILDER.FunctionCompletionDemo
    recs = {sid: payload for sid, payload in demo.recommendations.items()}
    report = execute_directives(
        directives_for(*recs.keys()), summary_backend(recs)
    )
    assert report.recommendations[0].relevance_score == 1.0


def test_individual_search_failure_degrades_with_warning():
    def failing_search(q, n):
        raise TransportError("offline")

    trace = TraceLog()
    backend = summary_backend()
    backend.on_search(failing_search)
    report = execute_directives(directives_for("only"), backend, trace=trace)
    (result,) = report.directive_results
    assert result.sources == []
    assert result.research_summary == DEGRADED_SUMMARY
    assert trace.of_kind("warning")
    # The summarization model is not consulted for a degraded directive.
    assert backend.complete_calls == 0


def test_scripted_run_twice_is_byte_identical():
    reports = [
        json.dumps(execute_directives(directives_for("a", "b"), summary_backend()).to_dict(),
                   sort_keys=True)
        for _ in range(2)
    ]
    assert reports[0] == reports[1]


def test_parallel_matches_serial():
    serial = execute_directives(directives_for("a", "b", "c"), summary_backend())
    parallel = execute_directives(
        directives_for("a", "b", "c"), summary_backend(), parallel=True
    )
    assert serial.to_dict() == parallel.to_dict()


def test_report_roundtrip():
    report = execute_directives(directives_for("a"), summary_backend())
    assert GroundingReport.from_dict(report.to_dict()).to_dict() == report.to_dict()


@given(st.lists(st.floats(min_value=-2, max_value=9), max_size=8))
def test_recommendation_scores_always_clamped(scores):
    recs = [ApiRecommendation.from_dict({"name": f"r{i}", "relevance_score": s})
            for i, s in enumerate(scores)]
    assert all(0.0 <= r.relevance_score <= 1.0 for r in recs)
