"""Episode log records and their JSONL line format.

Every action attempt and every observation produces one record.  A line is a
JSON object with keys, in order: ``seq, vtime, actor, action, outcome,
visibility, origin, entities``.  ``entities`` holds the entities an action
affected or an observation disclosed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Iterable, Iterator

from .platform.model import from_dict, is_action, to_dict

DENIED_PREFIX = "denied:"


@dataclass(frozen=True)
class LogRecord:
    seq: int
    vtime: int
    actor: int
    action: Any
    outcome: str
    visibility: tuple[int, ...] = ()
    origin: str = "bot"
    entities: tuple[int, ...] = ()

    @property
    def is_action(self) -> bool:
        return is_action(self.action)

    @property
    def ok(self) -> bool:
        return self.outcome == "ok"

    @property
    def mechanism_denied(self) -> bool:
        return self.outcome.startswith(DENIED_PREFIX)

    def to_dict(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "vtime": self.vtime,
            "actor": self.actor,
            "action": to_dict(self.action),
            "outcome": self.outcome,
            "visibility": list(self.visibility),
            "origin": self.origin,
            "entities": list(self.entities),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "LogRecord":
        return cls(
            seq=data["seq"],
            vtime=data["vtime"],
            actor=data["actor"],
            action=from_dict(data["action"]),
            outcome=data["outcome"],
            visibility=tuple(data["visibility"]),
            origin=data["origin"],
            entities=tuple(data.get("entities", ())),
        )


def dumps(records: Iterable[LogRecord]) -> str:
    return "".join(rec.to_json() + "\n" for rec in records)


def loads(text: str) -> Iterator[LogRecord]:
    for line in text.splitlines():
        if line.strip():
            yield LogRecord.from_dict(json.loads(line))
