"""Stage 1: parse a raw task description into a grounded, structured intent.

The model extracts goal, domain, tone, entities, constraints, and a set
of task categories; one web search per category (capped) retrieves a
concrete example, giving every retrieved example a source URL that is
traceable to a search result from the same run.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .backend import Backend, Message, ModelRequest, TransportError, complete_structured
from .schema import JsonValue
from .trace import TraceLog

MAX_SEARCH_QUERIES = 8
RESULTS_PER_QUERY = 3

INTENT_SYSTEM_PROMPT = (
    "You analyze a raw task description and produce a structured intent object. "
    "Reply with exactly one fenced JSON object with keys: goal (string), domain "
    "(string), tone (string), entities (array of strings), constraints (array of "
    "strings, each traceable to a sentence of the task description), and "
    "task_categories (array of at most 8 short category names that span the task "
    "space)."
)


class IntentError(Exception):
    """The model output could not be shaped into a valid intent."""

    def __init__(self, message: str, report: list[str] | None = None):
        super().__init__(message)
        self.report = report or []


@dataclass(frozen=True)
class TaskDescription:
    text: str


@dataclass(frozen=True)
class TaskExample:
    task_type: str
    example: str
    description: str = ""
    source_url: str = ""

    def to_dict(self) -> dict:
        return {
            "task_type": self.task_type,
            "description": self.description,
            "example": self.example,
            "source_url": self.source_url,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "TaskExample":
        return cls(
            task_type=str(raw["task_type"]),
            example=str(raw.get("example", "")),
            description=str(raw.get("description", "")),
            source_url=str(raw.get("source_url", "")),
        )


@dataclass
class ParsedIntent:
    goal: str
    domain: str = ""
    tone: str = ""
    entities: list[str] = field(default_factory=list)
    constraints: list[str] = field(default_factory=list)
    task_examples: list[TaskExample] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "goal": self.goal,
            "domain": self.domain,
            "tone": self.tone,
            "entities": list(self.entities),
            "constraints": list(self.constraints),
            "task_examples": [e.to_dict() for e in self.task_examples],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ParsedIntent":
        return cls(
            goal=str(raw.get("goal", "")),
            domain=str(raw.get("domain", "")),
            tone=str(raw.get("tone", "")),
            entities=[str(e) for e in raw.get("entities", [])],
            constraints=[str(c) for c in raw.get("constraints", [])],
            task_examples=[TaskExample.from_dict(e) for e in raw.get("task_examples", [])],
        )


def validate_intent(intent: ParsedIntent, *, grounding_enabled: bool = True) -> list[str]:
    """Total validation; the report is empty iff the intent is well-formed."""
    report: list[str] = []
    if not intent.goal.strip():
        report.append("goal empty")
    if not intent.constraints:
        report.append("constraints empty")
    if grounding_enabled and not intent.task_examples:
        report.append("task_examples empty while grounding is enabled")
    for i, example in enumerate(intent.task_examples):
        if not example.task_type.strip():
            report.append(f"task_example[{i}] task_type empty")
        if not example.example.strip():
            report.append(f"task_example[{i}] example empty")
    return report


def category_query(domain: str, category: str) -> str:
    domain = domain.strip()
    if domain:
        return f"{category} examples for {domain}"
    return f"{category} task examples"


def degenerate_intent(task: TaskDescription) -> ParsedIntent:
    """Fallback when intent analysis is disabled: carry the raw text through."""
    text = task.text.strip()
    return ParsedIntent(goal=text, constraints=[text], task_examples=[])


def analyze_prompt(
    task: TaskDescription,
    backend: Backend,
    *,
    grounding_enabled: bool = True,
    max_queries: int = MAX_SEARCH_QUERIES,
    trace: TraceLog | None = None,
) -> ParsedIntent:
    """Parse the task description into a ParsedIntent.

    Search failures downgrade to missing examples with a warning event;
    a semantically empty model reply gets one repair attempt before
    IntentError is raised.
    """
    text = task.text.strip()
    if not text:
        raise ValueError("task description is empty")

    request = ModelRequest(
        system_prompt=INTENT_SYSTEM_PROMPT,
        messages=[Message("user", f"Task description:\n---\n{text}\n---")],
    )

    parsed: JsonValue = {}
    report: list[str] = []
    categories: list[str] = []
    intent = ParsedIntent(goal="")
    for _ in range(2):
        parsed, _response = complete_structured(backend, request, repairs=1)
        if not isinstance(parsed, dict):
            parsed = {}
        intent = ParsedIntent.from_dict(parsed)
        categories = [str(c) for c in parsed.get("task_categories", [])][:max_queries]
        report = validate_intent(intent, grounding_enabled=False)
        if not report:
            break
        request = replace(
            request,
            messages=request.messages
            + [
                Message("assistant", str(parsed)),
                Message(
                    "user",
                    "The intent was invalid:\n- " + "\n- ".join(report) +
                    "\nReply again with one corrected fenced JSON object.",
                ),
            ],
        )
    if report:
        raise IntentError("model produced an invalid intent after bounded repair", report)

    examples: list[TaskExample] = []
    if grounding_enabled:
        for category in categories:
            query = category_query(intent.domain, category)
            try:
                results = backend.search(query, RESULTS_PER_QUERY)
            except TransportError as exc:
                if trace is not None:
                    trace.append("warning", stage="intent", message=f"search failed: {exc}")
                continue
            if not results:
                if trace is not None:
                    trace.append(
                        "warning", stage="intent", message=f"no results for {query!r}"
                    )
                continue
            top = results[0]
            examples.append(
                TaskExample(
                    task_type=category,
                    description=top.title,
                    example=top.snippet,
                    source_url=top.url,
                )
            )
    examples.sort(key=lambda e: e.task_type)
    intent.task_examples = examples
    return intent
