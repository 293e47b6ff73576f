"""Field descriptors, JSON-tree helpers, and canonical serialization.

Everything downstream of the model boundary speaks in small structured
values (JSON trees) described by named, kinded fields. Canonical
serialization (sorted keys, compact separators) is the hashing wire
format; the pretty variant is used for artifact files so that repeated
runs produce byte-identical output.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from datetime import date, datetime
from typing import Any

JsonValue = Any  # tree of dict / list / str / int / float / bool / None

FIELD_KINDS = ("text", "number", "boolean", "list", "object", "date")


class StructuredOutputError(Exception):
    """A model reply did not contain a single parseable JSON value."""


@dataclass(frozen=True)
class FieldSchema:
    """One named, kinded field of an input or output contract."""

    name: str
    kind: str = "text"
    description: str = ""

    def __post_init__(self) -> None:
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.kind!r} (field {self.name!r})")

    @property
    def optional(self) -> bool:
        # Convention: a leading "optional" in the description marks fields the
        # executor may leave absent when assembling inputs.
        return self.description.lower().startswith("optional")

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "description": self.description}

    @classmethod
    def from_dict(cls, raw: dict) -> "FieldSchema":
        return cls(
            name=str(raw["name"]),
            kind=str(raw.get("kind", "text")),
            description=str(raw.get("description", "")),
        )


def canonical_json(value: JsonValue) -> str:
    """Compact, sorted-key serialization used for hashing and fingerprints."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def pretty_json(value: JsonValue) -> str:
    """Sorted-key, indented serialization used for on-disk artifacts."""
    return json.dumps(value, sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def sha256_hex(data: str | bytes) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def fenced_json(value: JsonValue) -> str:
    """Render a value as the single fenced JSON block stage prompts expect."""
    return "```json\n" + json.dumps(value, sort_keys=True, indent=2, ensure_ascii=True) + "\n```"


_FENCE_RE = re.compile(r"```(?:[A-Za-z0-9_+-]*)\n(.*?)```", re.DOTALL)


def extract_structured(text: str) -> JsonValue:
    """Extract the first well-formed JSON value from a model reply.

    Fenced blocks are preferred; otherwise the first balanced object or
    array that parses is used. Raises StructuredOutputError when nothing
    parses.
    """
    if not isinstance(text, str) or not text.strip():
        raise StructuredOutputError("reply is empty")

    for block in _FENCE_RE.finditer(text):
        candidate = block.group(1).strip()
        try:
            return json.loads(candidate)
        except json.JSONDecodeError:
            continue

    decoder = json.JSONDecoder()
    for match in re.finditer(r"[{\[]", text):
        try:
            value, _ = decoder.raw_decode(text, match.start())
        except json.JSONDecodeError:
            continue
        return value

    raise StructuredOutputError("no parseable JSON object in reply")


def parse_iso_date(value: str) -> bool:
    """True when the string parses as an ISO date or datetime."""
    if not isinstance(value, str):
        return False
    for parser in (date.fromisoformat, datetime.fromisoformat):
        try:
            parser(value)
            return True
        except ValueError:
            continue
    return False
