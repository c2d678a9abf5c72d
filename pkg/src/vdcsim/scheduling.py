"""Cloudlet lifecycle and the guest-level schedulers.

A scheduler advances its cloudlets between two points in simulation
time given the processing power currently granted to the guest. The
update template is fixed for every policy:

  1. settle the work accrued since the previous update, crediting each
     executing cloudlet with timespan * its allocated MIPS,
  2. retire cloudlets the finished-handler reports complete,
  3. promote waiting cloudlets the unpause-handler releases,
  4. report the earliest estimated completion among what remains.

Policies only decide how capacity is split (time-shared equal division
versus space-shared PE ownership) and when waiting cloudlets may start.
Cloudlet subclasses customize per-update bookkeeping through the three
handler hooks, which is how multi-stage cloudlets with send and receive
phases run on an unmodified scheduler.

Allocations for the elapsed span are computed against the executing set
as it stood when the update began. Every state change (submission,
completion, capacity change, payload delivery) triggers an update, so
the executing set is constant over any settled span and total credited
work equals capacity times elapsed time whenever no per-cloudlet cap
binds.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

log = logging.getLogger(__name__)

__all__ = [
    "Cloudlet",
    "CloudletScheduler",
    "CloudletStatus",
    "NO_NEXT_EVENT",
    "NetworkCloudlet",
    "SchedulerContext",
    "SchedulerError",
    "SpaceSharedScheduler",
    "Stage",
    "StageKind",
    "TimeSharedScheduler",
]

#: Returned by update_processing when executing cloudlets exist but none
#: can make progress on its own (no capacity, or blocked on a payload
#: that has not arrived). The caller must not self-schedule and should
#: reawaken the scheduler when capacity or a delivery changes the state.
NO_NEXT_EVENT = math.inf


class SchedulerError(RuntimeError):
    """The scheduler was driven outside its contract."""


def _complete(done: float, target: float) -> bool:
    # Work accrual is exact event arithmetic plus float rounding, so a
    # budget is "met" within a relative epsilon rather than exactly.
    return done >= target - 1e-9 * max(1.0, abs(target))


class CloudletStatus(Enum):
    QUEUED = "queued"
    EXEC = "exec"
    PAUSED = "paused"
    FINISHED = "finished"
    FAILED = "failed"


class Cloudlet:
    """A unit of compute work measured in millions of instructions."""

    def __init__(
        self,
        cloudlet_id: str,
        length_mi: float,
        pes_required: int = 1,
        deadline_s: float | None = None,
    ) -> None:
        if length_mi < 0:
            raise ValueError(f"length_mi must be non-negative, got {length_mi!r}")
        if pes_required < 1:
            raise ValueError(f"pes_required must be at least 1, got {pes_required!r}")
        self.id = cloudlet_id
        self.length_mi = float(length_mi)
        self.pes_required = pes_required
        self.deadline_s = deadline_s
        self.length_so_far_mi = 0.0
        self.status = CloudletStatus.QUEUED
        self.submit_time: float | None = None
        self.start_time: float | None = None
        self.finish_time: float | None = None

    # -- scheduler handler hooks ---------------------------------------

    def update(self, ctx: "SchedulerContext | None") -> None:
        """Per-update bookkeeping hook; plain cloudlets need none."""

    def is_finished(self) -> bool:
        return _complete(self.length_so_far_mi, self.length_mi)

    def needs_cpu(self) -> bool:
        """Whether the cloudlet consumes processing power right now.

        Cloudlets that return False are excluded from the time-shared
        divisor and accrue nothing until their state changes.
        """
        return True

    def remaining_work_mi(self) -> float:
        """MI still to run before the next self-timed transition.

        Returns 0 when the cloudlet only needs another update call to
        move forward, and infinity when it is blocked on an external
        event and has no self-timed transition at all.
        """
        rem = self.length_mi - self.length_so_far_mi
        return rem if not _complete(self.length_so_far_mi, self.length_mi) else 0.0

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.id!r}, {self.status.value})"


class StageKind(Enum):
    EXECUTION = "execution"
    SEND = "send"
    RECEIVE = "receive"


@dataclass(frozen=True)
class Stage:
    """One phase of a multi-stage cloudlet.

    Exactly the fields meaningful for the kind are set: EXECUTION
    carries an MI budget, SEND carries a payload size and the peer it
    is addressed to, RECEIVE only names the peer it waits for.
    """

    kind: StageKind
    length_mi: float = 0.0
    payload_bytes: int = 0
    peer_id: str | None = None

    def __post_init__(self) -> None:
        if self.kind is StageKind.EXECUTION:
            if self.length_mi < 0:
                raise ValueError("execution stage length must be non-negative")
            if self.payload_bytes or self.peer_id is not None:
                raise ValueError("execution stage takes no payload or peer")
        elif self.kind is StageKind.SEND:
            if self.peer_id is None:
                raise ValueError("send stage requires a peer id")
            if self.payload_bytes < 0:
                raise ValueError("payload_bytes must be non-negative")
            if self.length_mi:
                raise ValueError("send stage takes no MI budget")
        else:
            if self.peer_id is None:
                raise ValueError("receive stage requires a peer id")
            if self.length_mi or self.payload_bytes:
                raise ValueError("receive stage takes no MI budget or payload")

    @classmethod
    def execution(cls, length_mi: float) -> "Stage":
        return cls(StageKind.EXECUTION, length_mi=length_mi)

    @classmethod
    def send(cls, payload_bytes: int, peer_id: str) -> "Stage":
        return cls(StageKind.SEND, payload_bytes=payload_bytes, peer_id=peer_id)

    @classmethod
    def receive(cls, peer_id: str) -> "Stage":
        return cls(StageKind.RECEIVE, peer_id=peer_id)


@dataclass
class SchedulerContext:
    """What handlers may touch during an update: the current time, the
    guest being updated, and a sink for outgoing transfers."""

    time: float
    guest: object | None = None
    on_send: Callable[["NetworkCloudlet", Stage], None] | None = None


class NetworkCloudlet(Cloudlet):
    """Cloudlet built from an ordered list of stages.

    The update hook advances through stages as they complete: an
    EXECUTION stage completes when the accrued MI meets its cumulative
    budget, a SEND stage hands its payload to the transfer sink exactly
    once and completes immediately, and a RECEIVE stage completes when
    a payload from its peer has been delivered. While a RECEIVE stage
    waits, the cloudlet consumes no processing power.
    """

    def __init__(
        self,
        cloudlet_id: str,
        stages: Sequence[Stage],
        pes_required: int = 1,
        deadline_s: float | None = None,
    ) -> None:
        stages = list(stages)
        if not stages:
            raise ValueError("a network cloudlet needs at least one stage")
        total = sum(s.length_mi for s in stages if s.kind is StageKind.EXECUTION)
        super().__init__(cloudlet_id, total, pes_required, deadline_s)
        self.stages = stages
        self.stage_index = 0
        # Cumulative MI budget at which each execution stage completes.
        self._thresholds: list[float | None] = []
        running = 0.0
        for stage in stages:
            if stage.kind is StageKind.EXECUTION:
                running += stage.length_mi
                self._thresholds.append(running)
            else:
                self._thresholds.append(None)
        self._sent: set[int] = set()
        self._received: Counter[str] = Counter()

    def deliver_payload(self, sender_id: str) -> None:
        """Record that a payload from ``sender_id`` arrived."""
        self._received[sender_id] += 1

    def current_stage(self) -> Stage | None:
        if self.stage_index >= len(self.stages):
            return None
        return self.stages[self.stage_index]

    def update(self, ctx: SchedulerContext | None) -> None:
        while self.stage_index < len(self.stages):
            stage = self.stages[self.stage_index]
            if stage.kind is StageKind.EXECUTION:
                threshold = self._thresholds[self.stage_index]
                if not _complete(self.length_so_far_mi, threshold):
                    break
                # Snap so downstream stages see an exact budget.
                self.length_so_far_mi = max(self.length_so_far_mi, threshold)
                self.stage_index += 1
            elif stage.kind is StageKind.SEND:
                if self.stage_index not in self._sent:
                    if ctx is None or ctx.on_send is None:
                        raise SchedulerError(
                            f"cloudlet {self.id!r} reached a send stage without a transfer sink"
                        )
                    self._sent.add(self.stage_index)
                    ctx.on_send(self, stage)
                self.stage_index += 1
            else:  # RECEIVE
                if self._received[stage.peer_id] > 0:
                    self._received[stage.peer_id] -= 1
                    self.stage_index += 1
                else:
                    break

    def is_finished(self) -> bool:
        return self.stage_index >= len(self.stages)

    def needs_cpu(self) -> bool:
        stage = self.current_stage()
        if stage is None or stage.kind is not StageKind.EXECUTION:
            return False
        return not _complete(self.length_so_far_mi, self._thresholds[self.stage_index])

    def remaining_work_mi(self) -> float:
        stage = self.current_stage()
        if stage is None:
            return 0.0
        if stage.kind is StageKind.EXECUTION:
            threshold = self._thresholds[self.stage_index]
            if _complete(self.length_so_far_mi, threshold):
                return 0.0
            return threshold - self.length_so_far_mi
        if stage.kind is StageKind.SEND:
            # Unfired send: the next update call fires it at zero cost.
            return 0.0
        if self._received[stage.peer_id] > 0:
            return 0.0
        return math.inf


class CloudletScheduler:
    """Policy-independent update template.

    Subclasses implement ``allocated_mips_for`` (how the granted share
    is split), ``submit`` admission, and may override the three handler
    hooks. A handler that raises marks its cloudlet FAILED and removes
    it rather than corrupting the remaining schedule.
    """

    policy_name = "base"

    def __init__(self) -> None:
        self.exec_list: list[Cloudlet] = []
        self.wait_list: list[Cloudlet] = []
        self.previous_time = 0.0
        self.current_share: tuple[float, ...] = ()
        self._finished: list[Cloudlet] = []

    # -- handler hooks (overridable) -------------------------------------

    def on_cloudlet_update(self, cloudlet: Cloudlet, ctx: SchedulerContext | None) -> None:
        cloudlet.update(ctx)

    def is_cloudlet_finished(self, cloudlet: Cloudlet) -> bool:
        return cloudlet.is_finished()

    def unpause_cloudlets(
        self, wait_list: Sequence[Cloudlet], ctx: SchedulerContext | None
    ) -> list[Cloudlet]:
        """Waiting cloudlets allowed to start executing now."""
        return []

    # -- policy surface ---------------------------------------------------

    def allocated_mips_for(
        self, cloudlet: Cloudlet, current_time: float, mips_share: Sequence[float]
    ) -> float:
        raise NotImplementedError

    def submit(self, cloudlet: Cloudlet, current_time: float) -> float:
        raise NotImplementedError

    # -- shared machinery -------------------------------------------------

    def set_share(self, mips_share: Sequence[float]) -> None:
        self.current_share = tuple(mips_share)

    @property
    def is_idle(self) -> bool:
        return not self.exec_list and not self.wait_list

    def pop_finished(self) -> list[Cloudlet]:
        """Drain cloudlets that completed since the last call."""
        out = self._finished
        self._finished = []
        return out

    def update_processing(
        self,
        current_time: float,
        mips_share: Sequence[float],
        ctx: SchedulerContext | None = None,
    ) -> float:
        """Advance every executing cloudlet to ``current_time``.

        Returns the earliest estimated completion time among executing
        cloudlets, 0.0 when nothing is executing or waiting, and
        NO_NEXT_EVENT when cloudlets exist but none can progress until
        an external change.
        """
        if current_time < self.previous_time:
            raise SchedulerError(
                f"time went backwards: {current_time!r} < {self.previous_time!r}"
            )
        share = tuple(mips_share)
        self.current_share = share
        span = current_time - self.previous_time
        self.previous_time = current_time

        # Span allocations reflect the executing set over the elapsed
        # interval, so they are computed before any handler runs.
        span_alloc = {
            id(cl): self.allocated_mips_for(cl, current_time, share) for cl in self.exec_list
        }
        survivors: list[Cloudlet] = []
        for cloudlet in self.exec_list:
            try:
                self.on_cloudlet_update(cloudlet, ctx)
                cloudlet.length_so_far_mi += span * span_alloc[id(cloudlet)]
                finished = self.is_cloudlet_finished(cloudlet)
            except Exception:
                log.exception("handler failed; marking cloudlet %r FAILED", cloudlet.id)
                cloudlet.status = CloudletStatus.FAILED
                self._on_exit(cloudlet)
                continue
            if finished:
                cloudlet.status = CloudletStatus.FINISHED
                cloudlet.length_so_far_mi = max(cloudlet.length_so_far_mi, cloudlet.length_mi)
                cloudlet.finish_time = current_time
                self._on_exit(cloudlet)
                self._finished.append(cloudlet)
            else:
                survivors.append(cloudlet)
        self.exec_list = survivors

        if not self.exec_list and not self.wait_list:
            return 0.0

        for cloudlet in self.unpause_cloudlets(tuple(self.wait_list), ctx):
            self.wait_list.remove(cloudlet)
            self._admit(cloudlet, current_time)

        next_event = NO_NEXT_EVENT
        for cloudlet in self.exec_list:
            est = self._estimate_finish(cloudlet, current_time, share)
            if est < next_event:
                next_event = est
        return next_event

    def _estimate_finish(
        self, cloudlet: Cloudlet, current_time: float, share: tuple[float, ...]
    ) -> float:
        rem = cloudlet.remaining_work_mi()
        if rem <= 0:
            return current_time
        if math.isinf(rem):
            return NO_NEXT_EVENT
        alloc = self.allocated_mips_for(cloudlet, current_time, share)
        if alloc <= 0:
            return NO_NEXT_EVENT
        est = current_time + rem / alloc
        return est if est > current_time else current_time

    def _pre_submit(self, cloudlet: Cloudlet, current_time: float) -> None:
        if cloudlet.status is not CloudletStatus.QUEUED:
            raise SchedulerError(
                f"cloudlet {cloudlet.id!r} is {cloudlet.status.value}, expected queued"
            )
        if cloudlet in self.exec_list or cloudlet in self.wait_list:
            raise SchedulerError(f"cloudlet {cloudlet.id!r} was already submitted")
        if current_time < self.previous_time:
            raise SchedulerError(
                f"time went backwards: {current_time!r} < {self.previous_time!r}"
            )
        if current_time > self.previous_time:
            if self.exec_list:
                raise SchedulerError(
                    "call update_processing to settle accrued work before submitting"
                )
            self.previous_time = current_time
        cloudlet.submit_time = current_time

    def _admit(self, cloudlet: Cloudlet, current_time: float) -> None:
        cloudlet.status = CloudletStatus.EXEC
        if cloudlet.start_time is None:
            cloudlet.start_time = current_time
        self.exec_list.append(cloudlet)

    def _on_exit(self, cloudlet: Cloudlet) -> None:
        """Policy hook when a cloudlet leaves the executing set."""


class TimeSharedScheduler(CloudletScheduler):
    """Every executing cloudlet gets an equal slice of the total share.

    The slice is capped at pes_required times the strongest PE, since a
    cloudlet cannot run faster than the processors it can occupy.
    Blocked cloudlets neither consume nor shrink anyone's slice.
    """

    policy_name = "time_shared"

    def allocated_mips_for(
        self, cloudlet: Cloudlet, current_time: float, mips_share: Sequence[float]
    ) -> float:
        if cloudlet not in self.exec_list:
            raise SchedulerError(f"cloudlet {cloudlet.id!r} is not executing")
        if not cloudlet.needs_cpu():
            return 0.0
        total = sum(mips_share)
        if not mips_share or total <= 0:
            return 0.0
        active = sum(1 for cl in self.exec_list if cl.needs_cpu())
        equal = total / active
        cap = cloudlet.pes_required * max(mips_share)
        return min(equal, cap)

    def submit(self, cloudlet: Cloudlet, current_time: float) -> float:
        self._pre_submit(cloudlet, current_time)
        self._admit(cloudlet, current_time)
        return self._estimate_finish(cloudlet, current_time, self.current_share)


class SpaceSharedScheduler(CloudletScheduler):
    """Cloudlets own whole PEs; newcomers wait until enough are free.

    By default a cloudlet starts whenever its PE demand fits in the
    free processors. With ``strict_serial`` the scheduler runs exactly
    one cloudlet at a time regardless of spare PEs. Waiting cloudlets
    start in submission order and the head of the queue is never
    skipped in favor of a smaller cloudlet behind it.
    """

    policy_name = "space_shared"

    def __init__(self, strict_serial: bool = False) -> None:
        super().__init__()
        self.strict_serial = strict_serial
        self._assigned: dict[int, tuple[int, ...]] = {}

    def _free_pes(self) -> list[int]:
        taken = {pe for pes in self._assigned.values() for pe in pes}
        return [i for i in range(len(self.current_share)) if i not in taken]

    def allocated_mips_for(
        self, cloudlet: Cloudlet, current_time: float, mips_share: Sequence[float]
    ) -> float:
        if cloudlet not in self.exec_list:
            raise SchedulerError(f"cloudlet {cloudlet.id!r} is not executing")
        if not cloudlet.needs_cpu():
            return 0.0
        pes = self._assigned.get(id(cloudlet), ())
        return sum(mips_share[i] for i in pes if i < len(mips_share))

    def _fits(self, cloudlet: Cloudlet, free_count: int, running: int) -> bool:
        if self.strict_serial and running:
            return False
        return cloudlet.pes_required <= free_count

    def _admit(self, cloudlet: Cloudlet, current_time: float) -> None:
        free = self._free_pes()
        if len(free) < cloudlet.pes_required:
            raise SchedulerError(
                f"cloudlet {cloudlet.id!r} admitted without {cloudlet.pes_required} free PEs"
            )
        self._assigned[id(cloudlet)] = tuple(free[: cloudlet.pes_required])
        super()._admit(cloudlet, current_time)

    def _on_exit(self, cloudlet: Cloudlet) -> None:
        self._assigned.pop(id(cloudlet), None)

    def unpause_cloudlets(
        self, wait_list: Sequence[Cloudlet], ctx: SchedulerContext | None
    ) -> list[Cloudlet]:
        out: list[Cloudlet] = []
        free = len(self._free_pes())
        running = len(self.exec_list)
        for cloudlet in wait_list:
            if not self._fits(cloudlet, free, running + len(out)):
                break
            out.append(cloudlet)
            free -= cloudlet.pes_required
        return out

    def submit(self, cloudlet: Cloudlet, current_time: float) -> float:
        self._pre_submit(cloudlet, current_time)
        if cloudlet.pes_required > len(self.current_share):
            raise SchedulerError(
                f"cloudlet {cloudlet.id!r} needs {cloudlet.pes_required} PEs, "
                f"guest grants {len(self.current_share)}"
            )
        # A newcomer may only start if nobody is already waiting, so a
        # narrow cloudlet can never slip past a wide one at the head.
        if not self.wait_list and self._fits(
            cloudlet, len(self._free_pes()), len(self.exec_list)
        ):
            self._admit(cloudlet, current_time)
            return self._estimate_finish(cloudlet, current_time, self.current_share)
        cloudlet.status = CloudletStatus.PAUSED
        self.wait_list.append(cloudlet)
        return self._queue_estimate(cloudlet, current_time)

    def _queue_estimate(self, cloudlet: Cloudlet, current_time: float) -> float:
        """Rough completion estimate for a queued cloudlet: drain what is
        running, then the queue ahead of it in order, then itself."""
        if not self.current_share:
            return NO_NEXT_EVENT
        per_pe = sum(self.current_share) / len(self.current_share)
        t = current_time
        for running in self.exec_list:
            alloc = self.allocated_mips_for(running, current_time, self.current_share)
            rem = running.remaining_work_mi()
            if alloc > 0 and math.isfinite(rem):
                t += rem / alloc
        for queued in self.wait_list:
            rate = min(queued.pes_required, len(self.current_share)) * per_pe
            rem = queued.remaining_work_mi()
            if rate > 0 and math.isfinite(rem):
                t += rem / rate
            if queued is cloudlet:
                break
        return t
