"""Workload orchestration: workflows, arrivals, broker and datacenter.

A workflow is a DAG of compute tasks whose edges carry payloads. The
broker releases one activation of the workflow per arrival, submitting
every task of the activation at the same instant; data dependencies are
enforced by the receive stages themselves, which block their task until
the upstream payload is delivered. The datacenter entity owns the
guests and drives their schedulers, handing outgoing payloads to the
flow manager and feeding deliveries back into the schedulers.
"""

from __future__ import annotations

import logging
import math
import random
import statistics
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .engine import SimEntity, Simulation
from .network import DeadlineOutcome, FlowManager, NetworkTopology, check_deadline
from .resources import Guest, Host
from .scheduling import (
    NO_NEXT_EVENT,
    NetworkCloudlet,
    SchedulerContext,
    Stage,
)

log = logging.getLogger(__name__)

__all__ = [
    "ActivationRecord",
    "ArrivalKind",
    "ArrivalProcess",
    "Broker",
    "Datacenter",
    "EdgeSpec",
    "TaskSpec",
    "WorkflowDag",
    "WorkflowError",
    "collect_results",
    "sample_arrivals",
    "uncontended_makespan",
]


class WorkflowError(ValueError):
    """The workflow definition is not a usable DAG."""


@dataclass(frozen=True)
class TaskSpec:
    id: str
    length_mi: float
    pes_required: int = 1

    def __post_init__(self) -> None:
        if self.length_mi < 0:
            raise ValueError(f"task {self.id!r}: length_mi must be non-negative")
        if self.pes_required < 1:
            raise ValueError(f"task {self.id!r}: pes_required must be at least 1")


@dataclass(frozen=True)
class EdgeSpec:
    src: str
    dst: str
    payload_bytes: int

    def __post_init__(self) -> None:
        if self.payload_bytes < 0:
            raise ValueError(f"edge {self.src!r}->{self.dst!r}: payload_bytes must be non-negative")


class WorkflowDag:
    """Validated task DAG that stamps out cloudlets per activation.

    Each task becomes a staged cloudlet: receive stages for incoming
    edges, one execution stage, send stages for outgoing edges. Send
    and receive stages of an edge name each other's cloudlet, so every
    payload is addressed within its own activation.
    """

    def __init__(
        self,
        tasks: Sequence[TaskSpec],
        edges: Sequence[EdgeSpec] = (),
        deadline_s: float | None = None,
    ) -> None:
        self.tasks = list(tasks)
        self.edges = list(edges)
        if deadline_s is not None and deadline_s < 0:
            raise WorkflowError("deadline_s must be non-negative")
        self.deadline_s = deadline_s
        ids = [t.id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise WorkflowError("duplicate task ids")
        if not self.tasks:
            raise WorkflowError("a workflow needs at least one task")
        known = set(ids)
        for edge in self.edges:
            if edge.src not in known or edge.dst not in known:
                raise WorkflowError(f"edge {edge.src!r}->{edge.dst!r} references an unknown task")
            if edge.src == edge.dst:
                raise WorkflowError(f"task {edge.src!r} cannot depend on itself")
        self._check_acyclic()

    def _check_acyclic(self) -> None:
        indegree = {t.id: 0 for t in self.tasks}
        for edge in self.edges:
            indegree[edge.dst] += 1
        ready = [tid for tid, deg in indegree.items() if deg == 0]
        settled = 0
        while ready:
            tid = ready.pop()
            settled += 1
            for edge in self.edges:
                if edge.src == tid:
                    indegree[edge.dst] -= 1
                    if indegree[edge.dst] == 0:
                        ready.append(edge.dst)
        if settled != len(self.tasks):
            raise WorkflowError("workflow contains a dependency cycle")

    @staticmethod
    def cloudlet_id(activation_id: int, task_id: str) -> str:
        return f"a{activation_id}.{task_id}"

    def build_cloudlets(self, activation_id: int) -> dict[str, NetworkCloudlet]:
        """Fresh cloudlets for one activation, keyed by task id."""
        out: dict[str, NetworkCloudlet] = {}
        for task in self.tasks:
            stages: list[Stage] = []
            for edge in self.edges:
                if edge.dst == task.id:
                    stages.append(Stage.receive(self.cloudlet_id(activation_id, edge.src)))
            stages.append(Stage.execution(task.length_mi))
            for edge in self.edges:
                if edge.src == task.id:
                    stages.append(
                        Stage.send(edge.payload_bytes, self.cloudlet_id(activation_id, edge.dst))
                    )
            out[task.id] = NetworkCloudlet(
                self.cloudlet_id(activation_id, task.id),
                stages,
                pes_required=task.pes_required,
                deadline_s=self.deadline_s,
            )
        return out


class ArrivalKind(Enum):
    FIXED = "fixed"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class ArrivalProcess:
    """Release-time generator. ``scale_s`` is the fixed spacing for FIXED
    arrivals and the mean inter-arrival time for EXPONENTIAL ones."""

    kind: ArrivalKind
    scale_s: float
    count: int
    seed: int = 1

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError(f"count must be at least 1, got {self.count!r}")
        if self.scale_s < 0:
            raise ValueError(f"scale_s must be non-negative, got {self.scale_s!r}")


def sample_arrivals(process: ArrivalProcess) -> list[float]:
    """Non-decreasing release times; the first activation releases at 0.

    Exponential gaps come from inverse-transform sampling on a seeded
    uniform generator, so a seed fully determines the trace.
    """
    if process.kind is ArrivalKind.FIXED:
        return [k * process.scale_s for k in range(process.count)]
    rng = random.Random(process.seed)
    releases = [0.0]
    while len(releases) < process.count:
        gap = -process.scale_s * math.log(1.0 - rng.random())
        if gap <= 0.0:
            continue  # u == 0 draw; inter-arrival times must be positive
        releases.append(releases[-1] + gap)
    return releases


def uncontended_makespan(
    lengths_mi: Sequence[float],
    mips: float,
    overhead_s: float,
    switch_count: int,
    payload_bytes: int,
    bw_bps: float,
) -> float:
    """Closed-form makespan of one isolated activation of a task chain.

    Each task contributes its runtime plus one stack overhead charge,
    the latter only when the route crosses at least one switch; every
    switching layer crossed adds one full serialization of the payload
    per task at the guest bandwidth. This is the analytic counterpart
    of the simulated pipeline and the two must agree on uncontended
    runs.
    """
    if mips <= 0:
        raise ValueError(f"mips must be positive, got {mips!r}")
    if bw_bps <= 0:
        raise ValueError(f"bw_bps must be positive, got {bw_bps!r}")
    if switch_count < 0:
        raise ValueError(f"switch_count must be non-negative, got {switch_count!r}")
    charge = overhead_s if switch_count > 0 else 0.0
    total = sum(length / mips + charge for length in lengths_mi)
    per_task_serialization = 8 * payload_bytes / bw_bps
    total += switch_count * len(lengths_mi) * per_task_serialization
    return total


@dataclass
class ActivationRecord:
    """Outcome of one workflow activation."""

    activation_id: int
    release_s: float
    finish_s: float | None = None
    deadline_s: float | None = None
    outcome: DeadlineOutcome = DeadlineOutcome.NOT_APPLICABLE

    @property
    def makespan_s(self) -> float:
        if self.finish_s is None:
            raise ValueError(f"activation {self.activation_id} has not finished")
        return self.finish_s - self.release_s


def collect_results(records: Sequence[ActivationRecord]) -> dict:
    """Aggregate finished activations into a summary.

    Returns min, median and max makespans plus the empirical CDF as
    (makespan, cumulative fraction) points. An empty run produces an
    empty summary with a zero count.
    """
    finished = sorted(
        (r for r in records if r.finish_s is not None), key=lambda r: r.release_s
    )
    if not finished:
        return {"count": 0}
    makespans = sorted(r.makespan_s for r in finished)
    n = len(makespans)
    return {
        "count": n,
        "min_makespan_s": makespans[0],
        "median_makespan_s": statistics.median(makespans),
        "max_makespan_s": makespans[-1],
        "ecdf": [(m, (i + 1) / n) for i, m in enumerate(makespans)],
        "missed": sum(1 for r in finished if r.outcome is DeadlineOutcome.MISSED),
    }


class Datacenter(SimEntity):
    """Owns hosts and guests; drives schedulers and the flow manager.

    Every state change (submission, completion estimate coming due,
    payload delivery) funnels through one full scheduler sweep, after
    which the earliest estimated completion across guests becomes the
    next self-scheduled update. Stale update events are harmless: a
    sweep at an unchanged time settles zero elapsed work.
    """

    def __init__(
        self,
        sim: Simulation,
        hosts: Sequence[Host],
        topology: NetworkTopology,
        name: str = "datacenter",
    ) -> None:
        super().__init__(name)
        sim.add_entity(self)
        submit, update = sim.tags.register_namespace(
            "datacenter", ["SUBMIT_CLOUDLETS", "SCHED_UPDATE"]
        )
        self.submit_tag = submit
        self._update_tag = update
        self.hosts = list(hosts)
        self.flows = FlowManager(topology)
        self.flows.attach(sim)
        self.flows.deliver_callback = self._on_deliver
        self.guests: list[Guest] = []
        self.broker_id: int | None = None
        self.return_tag = None
        self._cloudlets: dict[str, tuple[NetworkCloudlet, Guest]] = {}
        self._next_update_at: float | None = None

    def register_guest(self, guest: Guest) -> None:
        if guest.scheduler is None:
            raise ValueError(f"guest {guest.id!r} has no cloudlet scheduler")
        guest.physical_host()  # raises when the guest is not placed
        guest.scheduler.set_share(guest.mips_share())
        self.guests.append(guest)

    def process_event(self, event) -> None:
        if event.tag == self.submit_tag:
            now = event.time
            self._sweep(now)  # settle accrued work before the exec sets change
            for cloudlet, guest in event.payload:
                self._cloudlets[cloudlet.id] = (cloudlet, guest)
                guest.scheduler.submit(cloudlet, now)
            self._sweep(now)
        elif event.tag == self._update_tag:
            self._next_update_at = None
            self._sweep(event.time)
        else:
            raise ValueError(f"unexpected event tag {event.tag}")

    def _sweep(self, now: float) -> None:
        next_time = math.inf
        for guest in self.guests:
            ctx = SchedulerContext(time=now, guest=guest, on_send=self._on_send)
            est = guest.scheduler.update_processing(now, guest.mips_share(), ctx)
            for done in guest.scheduler.pop_finished():
                if self.broker_id is not None and self.return_tag is not None:
                    self.schedule(0.0, self.broker_id, self.return_tag, done)
            if not guest.scheduler.is_idle and est < next_time:
                est = max(est, now)
                next_time = est
        if math.isfinite(next_time):
            self._request_update(next_time, now)

    def _request_update(self, at: float, now: float) -> None:
        if self._next_update_at is not None and self._next_update_at <= at:
            return
        self._next_update_at = at
        self.schedule(at - now, self.id, self._update_tag, None)

    def _on_send(self, cloudlet: NetworkCloudlet, stage: Stage) -> None:
        src_entry = self._cloudlets.get(cloudlet.id)
        dst_entry = self._cloudlets.get(stage.peer_id)
        if src_entry is None or dst_entry is None:
            raise ValueError(
                f"transfer {cloudlet.id!r} -> {stage.peer_id!r} references an unsubmitted cloudlet"
            )
        self.flows.start_transfer(
            src_entry[1], dst_entry[1], stage.payload_bytes, cloudlet.id, stage.peer_id
        )

    def _on_deliver(self, transfer) -> None:
        entry = self._cloudlets.get(transfer.dst_cloudlet_id)
        if entry is None:
            log.warning("dropping delivery for unknown cloudlet %r", transfer.dst_cloudlet_id)
            return
        cloudlet, _ = entry
        cloudlet.deliver_payload(transfer.src_cloudlet_id)
        self._sweep(self.sim.clock())


class Broker(SimEntity):
    """Releases workflow activations and collects their records."""

    def __init__(
        self,
        sim: Simulation,
        datacenter: Datacenter,
        workflow: WorkflowDag,
        placement: dict[str, Guest],
        release_times: Sequence[float],
        name: str = "broker",
    ) -> None:
        super().__init__(name)
        sim.add_entity(self)
        release, returned = sim.tags.register_namespace(
            "broker", ["ACTIVATION_RELEASE", "CLOUDLET_RETURN"]
        )
        self._release_tag = release
        self._return_tag = returned
        self.datacenter = datacenter
        datacenter.broker_id = self.id
        datacenter.return_tag = returned
        missing = [t.id for t in workflow.tasks if t.id not in placement]
        if missing:
            raise WorkflowError(f"tasks without a placed guest: {missing}")
        for guest in placement.values():
            guest.physical_host()  # every mapped guest must be placed
        self.workflow = workflow
        self.placement = dict(placement)
        self.release_times = list(release_times)
        self.records: list[ActivationRecord] = []
        self._open: dict[int, dict] = {}
        self._owner: dict[str, int] = {}

    def start(self) -> None:
        for activation_id, release in enumerate(self.release_times):
            self.schedule(release, self.id, self._release_tag, activation_id)

    def process_event(self, event) -> None:
        if event.tag == self._release_tag:
            self._release(event.payload, event.time)
        elif event.tag == self._return_tag:
            self._returned(event.payload)
        else:
            raise ValueError(f"unexpected event tag {event.tag}")

    def _release(self, activation_id: int, now: float) -> None:
        cloudlets = self.workflow.build_cloudlets(activation_id)
        pairs = [(cloudlets[task.id], self.placement[task.id]) for task in self.workflow.tasks]
        self._open[activation_id] = {
            "release": now,
            "pending": {cl.id for cl in cloudlets.values()},
            "finish": 0.0,
        }
        for cloudlet in cloudlets.values():
            self._owner[cloudlet.id] = activation_id
        self.schedule(0.0, self.datacenter.id, self.datacenter.submit_tag, pairs)

    def _returned(self, cloudlet) -> None:
        activation_id = self._owner.get(cloudlet.id)
        if activation_id is None or activation_id not in self._open:
            log.warning("return for unknown cloudlet %r", cloudlet.id)
            return
        state = self._open[activation_id]
        state["pending"].discard(cloudlet.id)
        state["finish"] = max(state["finish"], cloudlet.finish_time)
        if state["pending"]:
            return
        del self._open[activation_id]
        record = ActivationRecord(
            activation_id=activation_id,
            release_s=state["release"],
            finish_s=state["finish"],
            deadline_s=self.workflow.deadline_s,
        )
        if record.deadline_s is not None:
            record.outcome = check_deadline(record)
        self.records.append(record)
