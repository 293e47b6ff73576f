"""Append-only event logs shared by construction and execution.

One event per line on disk (JSONL), schema versioned. Sequence numbers
are strictly increasing within a log; wall times are informational and
excluded from any byte-for-byte determinism comparison.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

TRACE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    wall_time: float
    kind: str
    data: dict

    def to_dict(self) -> dict:
        return {
            "v": TRACE_SCHEMA_VERSION,
            "seq": self.seq,
            "wall_time": self.wall_time,
            "kind": self.kind,
            "data": self.data,
        }

    def to_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=True)


@dataclass
class TraceLog:
    """Thread-safe, append-only event log."""

    events: list[TraceEvent] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    _seq: int = 0

    def append(self, kind: str, **data) -> TraceEvent:
        with self._lock:
            self._seq += 1
            event = TraceEvent(seq=self._seq, wall_time=time.time(), kind=kind, data=data)
            self.events.append(event)
            return event

    def of_kind(self, kind: str) -> list[TraceEvent]:
        return [e for e in self.events if e.kind == kind]

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            for event in self.events:
                fh.write(event.to_line() + "\n")


def load_events(path: str | Path) -> list[TraceEvent]:
    events = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            events.append(
                TraceEvent(
                    seq=int(raw["seq"]),
                    wall_time=float(raw["wall_time"]),
                    kind=str(raw["kind"]),
                    data=dict(raw.get("data", {})),
                )
            )
    return events
