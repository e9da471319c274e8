"""Event queue with a total, deterministic processing order."""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field
from typing import Any


class EventKind(enum.IntEnum):
    """Tie-break priority for events sharing a timestamp (lower first)."""

    ORDER_ISSUED = 0
    ASSIGNMENT_DELIVERED = 1
    VEHICLE_ARRIVED = 2
    DWELL_COMPLETE = 3
    PASSENGER_BOARDED = 4
    PASSENGER_ALIGHTED = 5
    REBALANCE_DECISION = 6


@dataclass(frozen=True, order=True)
class Event:
    """Ordering: (time, kind, subject, seq).

    ``seq`` is a global schedule counter, which makes same-pair messages
    FIFO and the whole order total.
    """

    time: float
    kind: EventKind
    subject: str
    seq: int
    payload: Any = field(compare=False, default=None)


class EventQueue:
    def __init__(self):
        self._heap: list[Event] = []
        self._seq = 0

    def push(self, time: float, kind: EventKind, subject: str, payload: Any = None) -> Event:
        event = Event(time, kind, subject, self._seq, payload)
        self._seq += 1
        heapq.heappush(self._heap, event)
        return event

    def pop(self) -> Event:
        return heapq.heappop(self._heap)

    def __len__(self) -> int:
        return len(self._heap)

    def __bool__(self) -> bool:
        return bool(self._heap)
