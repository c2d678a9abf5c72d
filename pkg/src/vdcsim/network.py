"""Rack-level network: topology, routing, transfers, deadlines.

The topology is an undirected graph of hosts and switches joined by
links. A payload travels store-and-forward: it fully serializes onto
each link of its route in turn, and transfers sharing a link split its
bandwidth equally, with shares recomputed whenever a transfer joins or
leaves the link. Virtualization overhead is charged twice per transfer
that actually touches the network, once at the sender's stack before
the first link and once at the receiver's stack after the last one;
transfers that never leave the host pay neither. Switches are physical
components and charge no virtualization overhead themselves.

Payload sizes are byte counts and links are rated in bits per second,
so every transfer serializes 8 * payload_bytes bits per link.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from enum import Enum

from .engine import SimEntity
from .resources import Guest, stack_overhead

log = logging.getLogger(__name__)

__all__ = [
    "DeadlineOutcome",
    "FlowManager",
    "Link",
    "NetworkTopology",
    "RoutingError",
    "Switch",
    "SwitchLevel",
    "Transfer",
    "check_deadline",
    "fair_share",
]

BITS_PER_BYTE = 8

# A hop is considered complete once fewer than this many bits remain;
# it absorbs float rounding from repeated share recomputations.
_BITS_EPS = 1e-3


class RoutingError(RuntimeError):
    """The topology cannot connect the requested endpoints."""


class SwitchLevel(Enum):
    TOR = "tor"
    AGGREGATE = "aggregate"


@dataclass(frozen=True)
class Switch:
    id: str
    level: SwitchLevel
    forwarding_delay_s: float = 0.0

    def __post_init__(self) -> None:
        if self.forwarding_delay_s < 0:
            raise ValueError("forwarding_delay_s must be non-negative")


@dataclass(frozen=True)
class Link:
    a: str
    b: str
    bandwidth_bps: float

    def __post_init__(self) -> None:
        if self.bandwidth_bps <= 0:
            raise ValueError(f"link bandwidth must be positive, got {self.bandwidth_bps!r}")
        if self.a == self.b:
            raise ValueError(f"link endpoints must differ, got {self.a!r} twice")

    def other_end(self, node_id: str) -> str:
        if node_id == self.a:
            return self.b
        if node_id == self.b:
            return self.a
        raise ValueError(f"{node_id!r} is not an endpoint of this link")


class NetworkTopology:
    """Host and switch graph with deterministic shortest-path routing."""

    def __init__(self, host_ids, switches, links) -> None:
        self.host_ids = list(host_ids)
        self.switches = {sw.id: sw for sw in switches}
        self.links = list(links)
        if len(self.switches) != len(list(switches)):
            raise ValueError("duplicate switch ids")
        overlap = set(self.host_ids) & set(self.switches)
        if overlap:
            raise ValueError(f"ids used for both hosts and switches: {sorted(overlap)}")
        self._adjacency: dict[str, list[tuple[str, Link]]] = {
            node: [] for node in [*self.host_ids, *self.switches]
        }
        for link in self.links:
            for end in (link.a, link.b):
                if end not in self._adjacency:
                    raise ValueError(f"link references unknown node {end!r}")
            self._adjacency[link.a].append((link.b, link))
            self._adjacency[link.b].append((link.a, link))

    def is_connected(self) -> bool:
        nodes = list(self._adjacency)
        if len(nodes) <= 1:
            return True
        seen = {nodes[0]}
        frontier = deque([nodes[0]])
        while frontier:
            here = frontier.popleft()
            for neighbor, _ in self._adjacency[here]:
                if neighbor not in seen:
                    seen.add(neighbor)
                    frontier.append(neighbor)
        return len(seen) == len(nodes)

    def rack_of(self, host_id: str) -> str | None:
        """Rack label for a host: the ToR switch it connects to."""
        for neighbor, _ in self._adjacency.get(host_id, ()):
            switch = self.switches.get(neighbor)
            if switch is not None and switch.level is SwitchLevel.TOR:
                return switch.id
        return None

    def route(self, src_host_id: str, dst_host_id: str) -> tuple[list[Link], int]:
        """Links along the path plus the number of switching layers crossed.

        Traffic staying on one host takes no links and crosses nothing.
        A route through a ToR switch counts one layer; climbing through
        the aggregate layer as well counts two, which is the measure the
        overhead gate and the closed-form makespan estimate key on.
        """
        for end in (src_host_id, dst_host_id):
            if end not in self._adjacency or end in self.switches:
                raise RoutingError(f"{end!r} is not a host in this topology")
        if src_host_id == dst_host_id:
            return [], 0
        parents: dict[str, tuple[str, Link]] = {}
        seen = {src_host_id}
        frontier = deque([src_host_id])
        while frontier:
            here = frontier.popleft()
            if here == dst_host_id:
                break
            for neighbor, link in self._adjacency[here]:
                if neighbor not in seen:
                    seen.add(neighbor)
                    parents[neighbor] = (here, link)
                    frontier.append(neighbor)
        if dst_host_id not in parents:
            raise RoutingError(f"no path from {src_host_id!r} to {dst_host_id!r}")
        links: list[Link] = []
        levels: set[SwitchLevel] = set()
        node = dst_host_id
        while node != src_host_id:
            prev, link = parents[node]
            links.append(link)
            switch = self.switches.get(node)
            if switch is not None:
                levels.add(switch.level)
            node = prev
        links.reverse()
        return links, len(levels)

    def switch_between(self, first: Link, second: Link) -> Switch | None:
        shared = {first.a, first.b} & {second.a, second.b}
        for node in shared:
            if node in self.switches:
                return self.switches[node]
        return None


def fair_share(bandwidth_bps: float, active_transfers: int) -> float:
    """Per-transfer share of a link: equal split among active transfers."""
    if active_transfers < 1:
        raise ValueError("a share needs at least one active transfer")
    return bandwidth_bps / active_transfers


class Transfer:
    """One payload moving between two guests."""

    def __init__(
        self,
        transfer_id: int,
        src_guest: Guest,
        dst_guest: Guest,
        payload_bytes: int,
        src_cloudlet_id: str,
        dst_cloudlet_id: str,
        route: list[Link],
        hop_count: int,
        started_at: float,
    ) -> None:
        if payload_bytes < 0:
            raise ValueError(f"payload_bytes must be non-negative, got {payload_bytes!r}")
        self.id = transfer_id
        self.src_guest = src_guest
        self.dst_guest = dst_guest
        self.payload_bytes = payload_bytes
        self.size_bits = BITS_PER_BYTE * payload_bytes
        self.src_cloudlet_id = src_cloudlet_id
        self.dst_cloudlet_id = dst_cloudlet_id
        self.route = route
        self.hop_count = hop_count
        self.started_at = started_at
        self.link_index: int | None = None
        self.bits_remaining = 0.0
        self.hop_version = 0
        self.delivered_at: float | None = None

    def __repr__(self) -> str:
        return f"Transfer({self.id}, {self.src_cloudlet_id!r} -> {self.dst_cloudlet_id!r})"


class _LinkState:
    """Active transfers on a link plus their common fair share."""

    def __init__(self, link: Link) -> None:
        self.link = link
        self.active: list[Transfer] = []
        self.share = link.bandwidth_bps
        self.last_time = 0.0

    def elapse(self, now: float) -> None:
        dt = now - self.last_time
        if dt > 0:
            for transfer in self.active:
                transfer.bits_remaining = max(0.0, transfer.bits_remaining - self.share * dt)
        self.last_time = now


class FlowManager(SimEntity):
    """Event-driven engine entity that moves transfers across the topology.

    Share changes invalidate previously scheduled hop completions, so
    every (re)computed completion carries a version token and stale
    events are ignored on dispatch rather than cancelled in the queue.
    """

    def __init__(self, topology: NetworkTopology, name: str = "network-flows") -> None:
        super().__init__(name)
        self.topology = topology
        self.deliver_callback = None
        self.transfers: dict[int, Transfer] = {}
        self._next_id = 0
        self._link_states: dict[Link, _LinkState] = {}
        self._tags: dict[str, object] = {}

    def attach(self, sim) -> None:
        sim.add_entity(self)
        enter, hop_done, deliver = sim.tags.register_namespace(
            "net", ["ENTER_LINK", "HOP_DONE", "DELIVER"]
        )
        self._tags = {"enter": enter, "hop_done": hop_done, "deliver": deliver}

    def _link_state(self, link: Link) -> _LinkState:
        state = self._link_states.get(link)
        if state is None:
            state = _LinkState(link)
            self._link_states[link] = state
        return state

    def link_share(self, link: Link) -> float:
        """Current per-transfer share on ``link`` (full bandwidth if idle)."""
        state = self._link_states.get(link)
        if state is None or not state.active:
            return link.bandwidth_bps
        return state.share

    # -- transfer lifecycle ---------------------------------------------

    def start_transfer(
        self,
        src_guest: Guest,
        dst_guest: Guest,
        payload_bytes: int,
        src_cloudlet_id: str,
        dst_cloudlet_id: str,
    ) -> Transfer:
        """Begin moving a payload from one guest's cloudlet to another's.

        Routing runs between the physical hosts under the two guests.
        When the route crosses at least one switch the sender's stack
        overhead delays entry onto the first link and the receiver's
        stack overhead delays the final delivery; a route that never
        leaves the host delivers immediately and pays no overhead.
        """
        src_host = src_guest.physical_host()
        dst_host = dst_guest.physical_host()
        links, hops = self.topology.route(src_host.id, dst_host.id)
        now = self.sim.clock()
        transfer = Transfer(
            self._next_id, src_guest, dst_guest, payload_bytes,
            src_cloudlet_id, dst_cloudlet_id, links, hops, now,
        )
        self._next_id += 1
        self.transfers[transfer.id] = transfer
        if hops == 0:
            self.schedule(0.0, self.id, self._tags["deliver"], transfer.id)
        else:
            delay = stack_overhead(src_guest)
            self.schedule(delay, self.id, self._tags["enter"], (transfer.id, 0))
        return transfer

    def process_event(self, event) -> None:
        tag = event.tag
        if tag == self._tags["enter"]:
            transfer_id, link_index = event.payload
            self._enter_link(self.transfers[transfer_id], link_index, event.time)
        elif tag == self._tags["hop_done"]:
            transfer_id, version = event.payload
            self._hop_done(self.transfers[transfer_id], version, event.time)
        elif tag == self._tags["deliver"]:
            transfer = self.transfers[event.payload]
            transfer.delivered_at = event.time
            if self.deliver_callback is not None:
                self.deliver_callback(transfer)
        else:
            raise ValueError(f"unexpected event tag {tag}")

    def _enter_link(self, transfer: Transfer, link_index: int, now: float) -> None:
        transfer.link_index = link_index
        transfer.bits_remaining = float(transfer.size_bits)
        state = self._link_state(transfer.route[link_index])
        state.elapse(now)
        state.active.append(transfer)
        self._reshare(state, now)

    def _reshare(self, state: _LinkState, now: float) -> None:
        # Shares change only through here, right after an elapse to now,
        # so every active transfer's residue is current.
        if not state.active:
            state.share = state.link.bandwidth_bps
            return
        state.share = fair_share(state.link.bandwidth_bps, len(state.active))
        for transfer in state.active:
            transfer.hop_version += 1
            eta = now + transfer.bits_remaining / state.share
            delay = max(0.0, eta - now)
            self.schedule(delay, self.id, self._tags["hop_done"], (transfer.id, transfer.hop_version))

    def _hop_done(self, transfer: Transfer, version: int, now: float) -> None:
        if version != transfer.hop_version:
            return  # superseded by a share recomputation
        state = self._link_state(transfer.route[transfer.link_index])
        state.elapse(now)
        if transfer.bits_remaining > _BITS_EPS:
            eta = now + transfer.bits_remaining / state.share
            if eta > now:
                transfer.hop_version += 1
                self.schedule(eta - now, self.id, self._tags["hop_done"], (transfer.id, transfer.hop_version))
                return
            # Residue too small to move the clock: finish the hop now.
        transfer.bits_remaining = 0.0
        state.active.remove(transfer)
        self._reshare(state, now)
        last = transfer.link_index == len(transfer.route) - 1
        if last:
            delay = stack_overhead(transfer.dst_guest)
            self.schedule(delay, self.id, self._tags["deliver"], transfer.id)
        else:
            next_index = transfer.link_index + 1
            switch = self.topology.switch_between(
                transfer.route[transfer.link_index], transfer.route[next_index]
            )
            delay = switch.forwarding_delay_s if switch is not None else 0.0
            self.schedule(delay, self.id, self._tags["enter"], (transfer.id, next_index))


class DeadlineOutcome(Enum):
    MET = "MET"
    MISSED = "MISSED"
    NOT_APPLICABLE = "N/A"


def check_deadline(record) -> DeadlineOutcome:
    """Classify a finished activation against its deadline.

    The comparison is inclusive: a makespan exactly equal to the
    deadline still meets it.
    """
    if record.finish_s is None:
        raise ValueError(f"activation {record.activation_id!r} has not finished")
    if record.deadline_s is None:
        raise ValueError(f"activation {record.activation_id!r} has no deadline configured")
    if record.makespan_s <= record.deadline_s:
        return DeadlineOutcome.MET
    return DeadlineOutcome.MISSED
