"""Shared checking engine for output schemas, forbidden patterns, and assertions.

Used twice: during construction to vet generated agents, and during
execution to gate every intermediate output before anything downstream
may consume it. Schema and pattern checks are pure and deterministic;
assertion evaluation consults a verifier model.

Natural-language forbidden patterns are compiled at plan time into one
of three machine kinds: a literal or regex text match, a tool-call
occurrence check, or a model-judged pattern that is folded into the
assertion evaluation path.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterable

from .backend import Backend, Message, ModelRequest, ToolCall, complete_structured
from .schema import (
    FieldSchema,
    JsonValue,
    StructuredOutputError,
    fenced_json,
    parse_iso_date,
)

PATTERN_KINDS = ("literal", "regex", "tool_call", "model_judged")

TOOL_CALL_MARKER = "[tool_call]"

JUDGE_SYSTEM_PROMPT = (
    "You judge whether a structured output satisfies each behavioral assertion, "
    "given the output and the upstream context it was produced from. "
    "Reply with exactly one fenced JSON array containing one object per assertion, "
    "in the same order, each with keys: assertion (string), passed (boolean), "
    "rationale (string, required when passed is false)."
)


@dataclass(frozen=True)
class ForbiddenPattern:
    """One forbidden-output rule, flagged with its checking kind.

    ``text`` is the human-readable rule as planned; ``pattern`` carries
    the machine payload (substring for literal, regex source for regex,
    tool name for tool_call, empty for model_judged).
    """

    text: str
    kind: str = "model_judged"
    pattern: str = ""

    def __post_init__(self) -> None:
        if self.kind not in PATTERN_KINDS:
            raise ValueError(f"unknown forbidden-pattern kind {self.kind!r}")

    def compile_error(self) -> str | None:
        """Return a message when the machine payload does not compile."""
        if self.kind == "regex":
            try:
                re.compile(self.pattern)
            except re.error as exc:
                return f"pattern {self.text!r}: regex does not compile: {exc}"
        if self.kind in ("literal", "regex", "tool_call") and not self.pattern:
            return f"pattern {self.text!r}: kind {self.kind} requires a machine payload"
        return None

    def to_dict(self) -> dict:
        return {"text": self.text, "kind": self.kind, "pattern": self.pattern}

    @classmethod
    def from_dict(cls, raw: dict | str) -> "ForbiddenPattern":
        if isinstance(raw, str):
            return cls(text=raw, kind="model_judged", pattern="")
        return cls(
            text=str(raw.get("text", "")),
            kind=str(raw.get("kind", "model_judged")),
            pattern=str(raw.get("pattern", "")),
        )


@dataclass(frozen=True)
class SchemaViolation:
    field: str
    message: str

    def __str__(self) -> str:
        return self.message

    def to_dict(self) -> dict:
        return {"field": self.field, "message": self.message}


@dataclass(frozen=True)
class ForbiddenMatch:
    pattern: str  # the human-readable rule text
    span: str  # the matched text
    start: int

    def to_dict(self) -> dict:
        return {"pattern": self.pattern, "span": self.span, "start": self.start}


@dataclass(frozen=True)
class AssertionVerdict:
    assertion: str
    passed: bool
    rationale: str

    def to_dict(self) -> dict:
        return {"assertion": self.assertion, "passed": self.passed, "rationale": self.rationale}


# ---------------------------------------------------------------------------
# Schema checking
# ---------------------------------------------------------------------------


def _kind_check(value: JsonValue, kind: str, strict_numbers: bool) -> tuple[bool, str | None]:
    """Returns (matches, warning)."""
    if kind == "text":
        return isinstance(value, str), None
    if kind == "number":
        if isinstance(value, bool):
            return False, None
        if isinstance(value, (int, float)):
            return True, None
        # Model outputs frequently stringify numbers; accept integer-valued
        # text with a warning unless strict checking is requested.
        if not strict_numbers and isinstance(value, str):
            try:
                int(value.strip())
            except ValueError:
                return False, None
            return True, f"number given as text {value!r}"
        return False, None
    if kind == "boolean":
        return isinstance(value, bool), None
    if kind == "list":
        return isinstance(value, list), None
    if kind == "object":
        return isinstance(value, dict), None
    if kind == "date":
        return parse_iso_date(value), None
    return False, None


def check_schema(
    value: JsonValue,
    schema: Iterable[FieldSchema],
    *,
    on_warning: Callable[[str], None] | None = None,
    strict_numbers: bool = False,
) -> list[SchemaViolation]:
    """Check a structured value against a field schema.

    The returned list is empty iff every schema field is present with a
    matching kind. Extra fields are reported through ``on_warning``, not
    as violations.
    """
    schema = list(schema)
    violations: list[SchemaViolation] = []
    if not schema:
        return violations
    if not isinstance(value, dict):
        return [SchemaViolation("", f"output is not an object (got {type(value).__name__})")]
    declared = {f.name for f in schema}
    for field in schema:
        if field.name not in value:
            violations.append(
                SchemaViolation(field.name, f"missing field {field.name!r}")
            )
            continue
        matches, warning = _kind_check(value[field.name], field.kind, strict_numbers)
        if not matches:
            violations.append(
                SchemaViolation(
                    field.name,
                    f"field {field.name!r} expected kind {field.kind}, "
                    f"got {type(value[field.name]).__name__}",
                )
            )
        elif warning and on_warning is not None:
            on_warning(f"field {field.name!r}: {warning}")
    if on_warning is not None:
        for extra in sorted(set(value) - declared):
            on_warning(f"unexpected field {extra!r}")
    return violations


# ---------------------------------------------------------------------------
# Forbidden patterns
# ---------------------------------------------------------------------------


def render_gate_text(text: str, tool_calls: Iterable[ToolCall] = ()) -> str:
    """Combine reply text with normalized tool-call markers for pattern checks."""
    lines = [text]
    for call in tool_calls:
        lines.append(f"{TOOL_CALL_MARKER} {call.name}")
    return "\n".join(lines)


def check_forbidden(
    output_text: str, patterns: Iterable[ForbiddenPattern]
) -> list[ForbiddenMatch]:
    """Match mechanical forbidden patterns against gated output text.

    Model-judged patterns are skipped here; the gate folds them into
    assertion evaluation. At most one match is reported per pattern.
    """
    matches: list[ForbiddenMatch] = []
    for pat in patterns:
        error = pat.compile_error()
        if error:
            raise ValueError(error)
        if pat.kind == "literal":
            index = output_text.find(pat.pattern)
            if index >= 0:
                matches.append(ForbiddenMatch(pat.text, pat.pattern, index))
        elif pat.kind == "regex":
            found = re.search(pat.pattern, output_text, re.MULTILINE)
            if found:
                matches.append(ForbiddenMatch(pat.text, found.group(0), found.start()))
        elif pat.kind == "tool_call":
            needle = f"{TOOL_CALL_MARKER} {pat.pattern}"
            index = output_text.find(needle)
            if index >= 0:
                matches.append(ForbiddenMatch(pat.text, needle, index))
        # model_judged: handled by evaluate_assertions
    return matches


# ---------------------------------------------------------------------------
# Behavioral assertions
# ---------------------------------------------------------------------------


def evaluate_assertions(
    output: JsonValue,
    assertions: list[str],
    context: JsonValue,
    backend: Backend,
    *,
    repairs: int = 1,
) -> list[AssertionVerdict]:
    """Ask the verifier model to judge each assertion against the output.

    Returns one verdict per assertion, in order. Unparseable judgments
    count as failed with rationale "unparseable".
    """
    if not assertions:
        return []
    payload = {"assertions": assertions, "output": output, "context": context}
    request = ModelRequest(
        system_prompt=JUDGE_SYSTEM_PROMPT,
        messages=[Message("user", fenced_json(payload))],
    )
    try:
        parsed, _ = complete_structured(backend, request, repairs=repairs)
    except StructuredOutputError:
        return [AssertionVerdict(a, False, "unparseable") for a in assertions]

    if isinstance(parsed, dict):
        parsed = parsed.get("verdicts", [])
    items = parsed if isinstance(parsed, list) else []

    verdicts: list[AssertionVerdict] = []
    for i, assertion in enumerate(assertions):
        item = items[i] if i < len(items) and isinstance(items[i], dict) else None
        if item is None or "passed" not in item:
            verdicts.append(AssertionVerdict(assertion, False, "unparseable"))
            continue
        passed = bool(item["passed"])
        rationale = str(item.get("rationale", ""))
        if not passed and not rationale:
            rationale = "assertion failed"
        verdicts.append(AssertionVerdict(assertion, passed, rationale))
    return verdicts
