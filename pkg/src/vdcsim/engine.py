"""Deterministic single-threaded discrete-event kernel.

Entities exchange timestamped events through a central future-event
queue. Events are totally ordered by (time, insertion sequence), so
equal timestamps dispatch in FIFO insertion order and a run is a pure
function of its inputs: the same entities scheduling the same events
replay the exact same dispatch sequence every time.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, Sequence

log = logging.getLogger(__name__)

__all__ = [
    "EntityState",
    "Event",
    "EventTag",
    "FutureEventQueue",
    "SchedulingError",
    "SimEntity",
    "Simulation",
    "SimulationStateError",
    "TagCollisionError",
    "TagRegistry",
]


class TagCollisionError(ValueError):
    """Tag registration would produce ambiguous event tags."""


class SchedulingError(ValueError):
    """Malformed schedule request (negative delay or unknown destination)."""


class SimulationStateError(RuntimeError):
    """The kernel was driven outside its legal lifecycle."""


@dataclass(frozen=True)
class EventTag:
    """Symbolic event kind, scoped by the namespace that registered it."""

    namespace: str
    name: str

    def __str__(self) -> str:
        return f"{self.namespace}.{self.name}"


class TagRegistry:
    """Collision-free registry of event tags.

    Each module registers its own namespace exactly once and receives
    distinct tag values. Two namespaces may reuse the same symbolic
    names without their tags ever comparing equal, and re-registering
    a namespace is an error rather than a silent merge.
    """

    def __init__(self) -> None:
        self._namespaces: dict[str, dict[str, EventTag]] = {}

    def register_namespace(self, namespace: str, names: Iterable[str]) -> list[EventTag]:
        if namespace in self._namespaces:
            raise TagCollisionError(f"tag namespace {namespace!r} is already registered")
        table: dict[str, EventTag] = {}
        for name in names:
            if name in table:
                raise TagCollisionError(
                    f"duplicate tag name {name!r} in namespace {namespace!r}"
                )
            table[name] = EventTag(namespace, name)
        if not table:
            raise TagCollisionError(f"namespace {namespace!r} registered without tags")
        self._namespaces[namespace] = table
        return list(table.values())

    def get(self, namespace: str, name: str) -> EventTag:
        try:
            return self._namespaces[namespace][name]
        except KeyError:
            raise KeyError(f"unknown event tag {namespace}.{name}") from None

    def namespaces(self) -> list[str]:
        return list(self._namespaces)


@dataclass(frozen=True)
class Event:
    """One scheduled occurrence, addressed from one entity to another."""

    time: float
    seq: int
    source: int
    dest: int
    tag: EventTag
    payload: Any = None


class _Entry:
    # Heap entry ordered by (time, seq). Comparisons run through __lt__
    # so the queue can count them; that is what the complexity checks
    # in the test suite instrument.
    __slots__ = ("time", "seq", "event", "_stats")

    def __init__(self, event: Event, stats: list[int]) -> None:
        self.time = event.time
        self.seq = event.seq
        self.event = event
        self._stats = stats

    def __lt__(self, other: "_Entry") -> bool:
        self._stats[0] += 1
        if self.time != other.time:
            return self.time < other.time
        return self.seq < other.seq


class FutureEventQueue:
    """Priority queue of pending events ordered by (time, seq).

    Push and pop are both O(log n). Ties on time resolve to insertion
    order because the sequence number is part of the sort key.
    """

    def __init__(self) -> None:
        self._heap: list[_Entry] = []
        self._stats = [0]

    def push(self, event: Event) -> None:
        heapq.heappush(self._heap, _Entry(event, self._stats))

    def pop(self) -> Event:
        if not self._heap:
            raise IndexError("pop from an empty event queue")
        return heapq.heappop(self._heap).event

    def peek_time(self) -> float:
        if not self._heap:
            raise IndexError("peek on an empty event queue")
        return self._heap[0].time

    def __len__(self) -> int:
        return len(self._heap)

    @property
    def comparison_count(self) -> int:
        """Total entry comparisons performed so far (for complexity tests)."""
        return self._stats[0]


class EntityState(Enum):
    CREATED = "created"
    RUNNING = "running"
    FINISHED = "finished"


class SimEntity:
    """Base class for anything that can receive events.

    Subclasses override ``start`` to schedule their initial events and
    ``process_event`` to react to incoming ones. Entities are attached
    to exactly one simulation, which assigns their integer id.
    """

    def __init__(self, name: str) -> None:
        self.name = name
        self.id: int | None = None
        self.sim: "Simulation | None" = None
        self.state = EntityState.CREATED

    def start(self) -> None:
        """Hook invoked once when the simulation starts running."""

    def process_event(self, event: Event) -> None:
        raise NotImplementedError(f"{type(self).__name__} does not handle events")

    def shutdown(self) -> None:
        """Hook invoked once after the run loop stops."""

    def retire(self) -> None:
        """Stop receiving events; anything still addressed here is dropped."""
        self.state = EntityState.FINISHED

    def schedule(self, delay: float, dest: int, tag: EventTag, payload: Any = None) -> int:
        if self.sim is None or self.id is None:
            raise SimulationStateError(f"entity {self.name!r} is not attached to a simulation")
        return self.sim.schedule(self.id, delay, dest, tag, payload)


class Simulation:
    """Owns the clock, the event queue, the tag registry and the entities."""

    def __init__(self) -> None:
        self.tags = TagRegistry()
        (self.end_tag,) = self.tags.register_namespace("kernel", ["END"])
        self._queue = FutureEventQueue()
        self._entities: list[SimEntity] = []
        self._clock = 0.0
        self._next_seq = 0
        self._stop = False
        self._started = False
        self._trace: list[tuple[float, int, int, int, str]] | None = None

    # -- registry -----------------------------------------------------

    def add_entity(self, entity: SimEntity) -> int:
        if entity.sim is not None:
            raise SimulationStateError(f"entity {entity.name!r} is already attached")
        entity.sim = self
        entity.id = len(self._entities)
        self._entities.append(entity)
        return entity.id

    def entity(self, entity_id: int) -> SimEntity:
        return self._entities[entity_id]

    @property
    def entities(self) -> Sequence[SimEntity]:
        return tuple(self._entities)

    # -- scheduling ---------------------------------------------------

    def clock(self) -> float:
        return self._clock

    def schedule(
        self,
        source: int,
        delay: float,
        dest: int,
        tag: EventTag,
        payload: Any = None,
    ) -> int:
        """Enqueue an event ``delay`` seconds from now; returns its seq."""
        if delay < 0:
            raise SchedulingError(f"negative delay {delay!r}")
        if not 0 <= dest < len(self._entities):
            raise SchedulingError(f"unknown destination entity id {dest!r}")
        event = Event(self._clock + delay, self._next_seq, source, dest, tag, payload)
        self._next_seq += 1
        self._queue.push(event)
        return event.seq

    def pending(self) -> int:
        return len(self._queue)

    def terminate(self) -> None:
        """Stop the run loop; events still queued are discarded."""
        self._stop = True

    # -- diagnostics ----------------------------------------------------

    def enable_trace(self) -> None:
        self._trace = []

    @property
    def trace(self) -> list[tuple[float, int, int, int, str]] | None:
        return self._trace

    # -- run loop -------------------------------------------------------

    def run(self) -> float:
        """Dispatch events in (time, seq) order until none remain.

        Returns the final clock value. An event carrying the kernel END
        tag stops the loop immediately and drains whatever is left.
        """
        if self._started:
            raise SimulationStateError("a simulation can only run once")
        if not self._entities:
            raise SimulationStateError("cannot run with no entities registered")
        self._started = True
        for entity in self._entities:
            entity.state = EntityState.RUNNING
        for entity in self._entities:
            entity.start()
        while len(self._queue) and not self._stop:
            event = self._queue.pop()
            self._clock = event.time
            if self._trace is not None:
                self._trace.append(
                    (event.time, event.seq, event.source, event.dest, str(event.tag))
                )
            if event.tag == self.end_tag:
                self.terminate()
                break
            dest = self._entities[event.dest]
            if dest.state is not EntityState.RUNNING:
                log.warning(
                    "dropping event %s at t=%.6f: destination %r is %s",
                    event.tag, event.time, dest.name, dest.state.value,
                )
                continue
            dest.process_event(event)
        for entity in self._entities:
            if entity.state is EntityState.RUNNING:
                entity.shutdown()
                entity.state = EntityState.FINISHED
        return self._clock
