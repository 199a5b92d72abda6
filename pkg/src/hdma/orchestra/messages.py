"""Message envelope, message kinds and the append-only trace log."""
from __future__ import annotations

import itertools
import threading
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Any


class MessageKind(str, Enum):
    M1_ProblemRequest = "M1"
    M1r_DecisionNotice = "M1r"
    M2_DataExtract = "M2"
    M2r_DataSet = "M2r"
    M3_CircuitGen = "M3"
    M3r_CircuitBatch = "M3r"
    M4_Submit = "M4"
    M6_Watch = "M6"
    M8_ResultNotice = "M8"
    M9_ClassicalExchange = "M9"


QUANTUM_SEQUENCE = (
    MessageKind.M1_ProblemRequest, MessageKind.M1r_DecisionNotice,
    MessageKind.M2_DataExtract, MessageKind.M2r_DataSet,
    MessageKind.M3_CircuitGen, MessageKind.M3r_CircuitBatch,
    MessageKind.M4_Submit, MessageKind.M6_Watch, MessageKind.M8_ResultNotice,
)
CLASSICAL_SEQUENCE = (
    MessageKind.M1_ProblemRequest, MessageKind.M1r_DecisionNotice, MessageKind.M9_ClassicalExchange,
)


def new_id() -> str:
    return uuid.uuid4().hex


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    correlation_id: str
    payload: Any = None
    sender: str = ""
    msg_id: str = field(default_factory=new_id)


@dataclass(frozen=True)
class TraceEntry:
    timestamp: float
    seq: int
    service: str
    kind: MessageKind
    correlation_id: str


class TraceLog:
    """Append-only record of published messages. Safe for concurrent writers."""

    def __init__(self):
        self._entries: list[TraceEntry] = []
        self._lock = threading.Lock()
        self._seq = itertools.count()

    def record(self, service: str, kind: MessageKind, correlation_id: str) -> TraceEntry:
        with self._lock:
            entry = TraceEntry(time.time(), next(self._seq), service, kind, correlation_id)
            self._entries.append(entry)
        return entry

    @property
    def entries(self) -> tuple[TraceEntry, ...]:
        with self._lock:
            return tuple(self._entries)

    def for_correlation(self, correlation_id: str) -> list[TraceEntry]:
        return [e for e in self.entries if e.correlation_id == correlation_id]

    def kinds(self, correlation_id: str | None = None) -> list[MessageKind]:
        entries = self.entries if correlation_id is None else self.for_correlation(correlation_id)
        return [e.kind for e in entries]

    def __len__(self) -> int:
        return len(self._entries)
