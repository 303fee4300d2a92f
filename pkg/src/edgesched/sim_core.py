"""Deterministic discrete-event engine.

Virtual time is kept in integer microseconds. Events are totally ordered by
``(at, seq)``; ``seq`` is assigned on scheduling so simultaneous events run
in insertion order.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

logger = logging.getLogger(__name__)

US_PER_MS = 1000


def ms_to_us(ms: float) -> int:
    return int(round(ms * US_PER_MS))


def us_to_ms(us: int) -> float:
    return us / US_PER_MS


class EventKind(Enum):
    TASK_ARRIVAL = "TaskArrival"
    MESSAGE_DELIVERY = "MessageDelivery"
    CONTAINER_COMPLETE = "ContainerComplete"
    PROFILE_TICK = "ProfileTick"
    EXPERIMENT_END = "ExperimentEnd"


class SchedulingError(RuntimeError):
    """An event was scheduled before the current virtual time."""


@dataclass(order=True, frozen=True)
class Event:
    at: int
    seq: int
    kind: EventKind = field(compare=False)
    payload: Any = field(compare=False, default=None)
    device: str | None = field(compare=False, default=None)
    task_id: int | None = field(compare=False, default=None)

    def trace_line(self) -> str:
        task = "-" if self.task_id is None else str(self.task_id)
        return f"{self.at} {self.kind.value} {self.device or '-'} {task}"


@dataclass(frozen=True)
class NetworkLink:
    """A device's link to the edge server.

    ``loss_probability`` only applies to image transfers; profile updates and
    results always arrive.
    """

    bandwidth_kb_per_ms: float
    propagation_ms: float = 0.0
    loss_probability: float = 0.0

    def __post_init__(self):
        if not self.bandwidth_kb_per_ms > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth_kb_per_ms}")
        if self.propagation_ms < 0:
            raise ValueError(f"propagation must be non-negative, got {self.propagation_ms}")
        if not 0 <= self.loss_probability <= 1:
            raise ValueError(f"loss probability must be within [0, 1], got {self.loss_probability}")

    def delay_ms(self, size_kb: float) -> float:
        return size_kb / self.bandwidth_kb_per_ms + self.propagation_ms


@dataclass
class Message:
    kind: str  # "image", "result" or "profile"
    src: str
    dst: str
    body: Any = None


Handler = Callable[[Event], None]


class EventLoop:
    def __init__(self, seed: int = 0, trace: bool = False):
        self.now = 0
        self.rng = random.Random(seed)
        self.handlers: dict[EventKind, Handler] = {}
        self.observers: list[Callable[["EventLoop", Event], None]] = []
        self.trace: list[str] | None = [] if trace else None
        self.dispatched = 0
        self.losses = 0
        self._queue: list[Event] = []
        self._seq = itertools.count()

    @property
    def pending_events(self) -> int:
        return len(self._queue)

    def on(self, kind: EventKind, handler: Handler) -> None:
        self.handlers[kind] = handler

    def schedule(self, at: int, kind: EventKind, payload=None, *, device=None, task_id=None) -> Event:
        if at < self.now:
            raise SchedulingError(f"cannot schedule {kind.value} at {at}us, clock is already at {self.now}us")
        event = Event(at, next(self._seq), kind, payload, device, task_id)
        heapq.heappush(self._queue, event)
        return event

    def schedule_in(self, delay_ms: float, kind: EventKind, payload=None, **kw) -> Event:
        return self.schedule(self.now + ms_to_us(delay_ms), kind, payload, **kw)

    def send(self, message: Message, size_kb: float, link: NetworkLink, *, lossy: bool = True, task_id=None) -> bool:
        """Schedule delivery of ``message`` over ``link``.

        Returns ``False`` when the transfer was lost; nothing is scheduled
        in that case.
        """
        p = link.loss_probability if lossy else 0.0
        # no RNG draw at p == 0 keeps loss-free runs independent of the seed
        if p >= 1 or (p > 0 and self.rng.random() < p):
            self.losses += 1
            logger.debug("lost %s %s->%s task=%s at %dus", message.kind, message.src, message.dst, task_id, self.now)
            return False
        self.schedule_in(link.delay_ms(size_kb), EventKind.MESSAGE_DELIVERY, message, device=message.dst, task_id=task_id)
        return True

    def run_until_idle(self) -> int:
        """Dispatch events until the queue drains or an ExperimentEnd fires."""
        while self._queue:
            event = heapq.heappop(self._queue)
            assert event.at >= self.now, "event time regression"
            self.now = event.at
            self.dispatched += 1
            if self.trace is not None:
                self.trace.append(event.trace_line())
            handler = self.handlers.get(event.kind)
            if handler is not None:
                handler(event)
            for observer in self.observers:
                observer(self, event)
            if event.kind is EventKind.EXPERIMENT_END:
                break
        return self.now
