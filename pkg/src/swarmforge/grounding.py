"""Stage 3: directive-driven external research for agent specifications.

One targeted search per agent spec that needs external knowledge,
followed by a model call that turns the raw results into a research
summary and scored API recommendations. Directives are independent and
may execute concurrently; report assembly is deterministic (sorted by
spec_id, recommendations sorted by descending relevance).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .backend import Backend, Message, ModelRequest, SearchResult, TransportError, complete_structured
from .plan import SwarmPlan
from .schema import fenced_json
from .trace import TraceLog

RESULTS_PER_DIRECTIVE = 8
DEGRADED_SUMMARY = "search unavailable; no external sources were retrieved"

SUMMARY_SYSTEM_PROMPT = (
    "You turn raw web search results into research for one agent specification. "
    "Reply with exactly one fenced JSON object with keys: research_summary "
    "(string condensing what the agent should know) and recommendations (array "
    "of {name, url, description, auth_method, relevance_score} where "
    "relevance_score is a number in [0, 1])."
)


class GroundingError(Exception):
    """The grounding stage failed as a whole (individual misses degrade)."""


@dataclass(frozen=True)
class SearchDirective:
    directive_id: str
    spec_id: str
    query_terms: tuple[str, ...]

    @property
    def query(self) -> str:
        return " ".join(self.query_terms)

    def to_dict(self) -> dict:
        return {
            "directive_id": self.directive_id,
            "spec_id": self.spec_id,
            "query_terms": list(self.query_terms),
        }


@dataclass
class DirectiveResult:
    directive_id: str
    spec_id: str
    research_summary: str
    sources: list[SearchResult] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "directive_id": self.directive_id,
            "spec_id": self.spec_id,
            "research_summary": self.research_summary,
            "sources": [s.to_dict() for s in self.sources],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "DirectiveResult":
        return cls(
            directive_id=str(raw["directive_id"]),
            spec_id=str(raw["spec_id"]),
            research_summary=str(raw.get("research_summary", "")),
            sources=[SearchResult.from_dict(s) for s in raw.get("sources", [])],
        )


@dataclass(frozen=True)
class ApiRecommendation:
    name: str
    url: str = ""
    description: str = ""
    auth_method: str = ""
    relevance_score: float = 0.0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "url": self.url,
            "description": self.description,
            "auth_method": self.auth_method,
            "relevance_score": self.relevance_score,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ApiRecommendation":
        score = raw.get("relevance_score", 0.0)
        try:
            score = float(score)
        except (TypeError, ValueError):
            score = 0.0
        return cls(
            name=str(raw.get("name", "")),
            url=str(raw.get("url", "")),
            description=str(raw.get("description", "")),
            auth_method=str(raw.get("auth_method", "")),
            relevance_score=min(1.0, max(0.0, score)),
        )


@dataclass
class GroundingReport:
    recommendations: list[ApiRecommendation] = field(default_factory=list)
    directive_results: list[DirectiveResult] = field(default_factory=list)

    def result_for(self, spec_id: str) -> DirectiveResult | None:
        for result in self.directive_results:
            if result.spec_id == spec_id:
                return result
        return None

    def to_dict(self) -> dict:
        return {
            "recommendations": [r.to_dict() for r in self.recommendations],
            "directive_results": [d.to_dict() for d in self.directive_results],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "GroundingReport":
        return cls(
            recommendations=[ApiRecommendation.from_dict(r) for r in raw.get("recommendations", [])],
            directive_results=[
                DirectiveResult.from_dict(d) for d in raw.get("directive_results", [])
            ],
        )


def derive_directives(plan: SwarmPlan) -> list[SearchDirective]:
    """One directive per spec that lists tools or requires them; id = spec_id.

    Query terms come from the spec's role plus its leading output contract
    fields.
    """
    directives = []
    for spec in plan.specs:
        if not spec.tools and not spec.verification_criteria.required_tools:
            continue
        terms = [spec.role] + [f.name for f in spec.io_contract.output_schema[:3]]
        directives.append(
            SearchDirective(
                directive_id=spec.spec_id,
                spec_id=spec.spec_id,
                query_terms=tuple(t for t in terms if t),
            )
        )
    return directives


def execute_directives(
    directives: list[SearchDirective],
    backend: Backend,
    *,
    results_per_directive: int = RESULTS_PER_DIRECTIVE,
    trace: TraceLog | None = None,
    parallel: bool = False,
) -> GroundingReport:
    """Run every directive and assemble the grounding report.

    An individual search failure degrades that directive to an
    empty-sources result with a warning event; model-call failures abort
    the stage.
    """

    def run_one(directive: SearchDirective) -> tuple[DirectiveResult, list[ApiRecommendation]]:
        try:
            hits = backend.search(directive.query, results_per_directive)
        except TransportError as exc:
            if trace is not None:
                trace.append(
                    "warning",
                    stage="grounding",
                    spec_id=directive.spec_id,
                    message=f"search failed: {exc}",
                )
            return (
                DirectiveResult(
                    directive_id=directive.directive_id,
                    spec_id=directive.spec_id,
                    research_summary=DEGRADED_SUMMARY,
                    sources=[],
                ),
                [],
            )
        payload = {
            "directive": directive.to_dict(),
            "results": [h.to_dict() for h in hits],
        }
        request = ModelRequest(
            system_prompt=SUMMARY_SYSTEM_PROMPT,
            messages=[Message("user", fenced_json(payload))],
        )
        parsed, _ = complete_structured(backend, request, repairs=1)
        if not isinstance(parsed, dict):
            parsed = {}
        recommendations = [
            ApiRecommendation.from_dict(r)
            for r in parsed.get("recommendations", [])
            if isinstance(r, dict)
        ]
        result = DirectiveResult(
            directive_id=directive.directive_id,
            spec_id=directive.spec_id,
            research_summary=str(parsed.get("research_summary", "")),
            sources=hits,
        )
        return result, recommendations

    if parallel and len(directives) > 1:
        with ThreadPoolExecutor(max_workers=min(8, len(directives))) as pool:
            outcomes = list(pool.map(run_one, directives))
    else:
        outcomes = [run_one(d) for d in directives]

    results = sorted((r for r, _ in outcomes), key=lambda r: r.spec_id)
    recommendations: list[ApiRecommendation] = []
    for _, recs in outcomes:
        recommendations.extend(recs)
    recommendations.sort(key=lambda r: (-r.relevance_score, r.name))
    return GroundingReport(recommendations=recommendations, directive_results=results)
