"""Capacity-bearing infrastructure: physical hosts, guests, nesting, power.

Hosts and guests share one hosting model. A guest (VM or container) can
itself host further guests, which is how container-in-VM or VM-in-VM
stacks are expressed: the role an entity plays comes from where it sits
in the chain, not from its class. Every hosting entity keeps one ledger
per capacity dimension and placement debits all of them atomically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

__all__ = [
    "CapacityError",
    "CoreAttributes",
    "Guest",
    "GuestKind",
    "GuestSpec",
    "Host",
    "HostSpec",
    "Ledger",
    "NestingError",
    "PlacementStateError",
    "PowerModel",
    "energy_between",
    "mips_from_clock",
    "place_guest",
    "remove_guest",
    "stack_overhead",
]


class CapacityError(RuntimeError):
    """Placement rejected; ``dimension`` names the capacity that ran out."""

    def __init__(self, dimension: str, message: str) -> None:
        super().__init__(message)
        self.dimension = dimension


class NestingError(RuntimeError):
    """Placement would create a cycle in the hosting chain."""


class PlacementStateError(RuntimeError):
    """Operation requires a different placement state (placed or not)."""


def mips_from_clock(clk_rate_hz: float, ipc: float) -> float:
    """Per-core MIPS rating of a processor clocked at ``clk_rate_hz``
    executing ``ipc`` instructions per cycle.

    A 2.6 GHz core retiring 3 instructions per cycle rates 7800 MIPS.
    """
    if clk_rate_hz <= 0:
        raise ValueError(f"clock rate must be positive, got {clk_rate_hz!r}")
    if ipc <= 0:
        raise ValueError(f"instructions per cycle must be positive, got {ipc!r}")
    return clk_rate_hz * ipc / 1e6


class GuestKind(Enum):
    VM = "vm"
    CONTAINER = "container"


@dataclass(frozen=True)
class CoreAttributes:
    """Compute, memory and network capacities shared by hosts and guests."""

    num_pes: int
    mips_per_pe: float
    ram_mb: float
    bw_bps: float

    def __post_init__(self) -> None:
        if self.num_pes < 1:
            raise ValueError(f"num_pes must be at least 1, got {self.num_pes!r}")
        if self.mips_per_pe <= 0:
            raise ValueError(f"mips_per_pe must be positive, got {self.mips_per_pe!r}")
        if self.ram_mb < 0 or self.bw_bps < 0:
            raise ValueError("ram_mb and bw_bps must be non-negative")

    @property
    def total_mips(self) -> float:
        return self.num_pes * self.mips_per_pe


@dataclass(frozen=True)
class HostSpec:
    id: str
    clk_rate_hz: float
    ipc: float
    core: CoreAttributes

    @classmethod
    def from_clock(
        cls,
        host_id: str,
        clk_rate_hz: float,
        ipc: float,
        num_pes: int,
        ram_mb: float,
        bw_bps: float,
    ) -> "HostSpec":
        """Build a spec whose per-PE MIPS is derived from clock and IPC."""
        core = CoreAttributes(num_pes, mips_from_clock(clk_rate_hz, ipc), ram_mb, bw_bps)
        return cls(host_id, clk_rate_hz, ipc, core)


@dataclass(frozen=True)
class GuestSpec:
    id: str
    kind: GuestKind
    core: CoreAttributes
    virt_overhead_s: float = 0.0

    def __post_init__(self) -> None:
        if self.virt_overhead_s < 0:
            raise ValueError(f"virt_overhead_s must be non-negative, got {self.virt_overhead_s!r}")


class Ledger:
    """Single-dimension capacity ledger.

    ``free + sum(allocations) == total`` holds after every operation;
    debits that would overdraw the dimension are rejected whole.
    """

    def __init__(self, dimension: str, total: float) -> None:
        if total < 0:
            raise ValueError(f"total {dimension} capacity must be non-negative")
        self.dimension = dimension
        self.total = total
        self.allocations: dict[str, float] = {}

    @property
    def allocated(self) -> float:
        return sum(self.allocations.values())

    @property
    def free(self) -> float:
        return self.total - self.allocated

    def can_fit(self, amount: float) -> bool:
        return amount <= self.free

    def debit(self, owner: str, amount: float) -> None:
        if owner in self.allocations:
            raise PlacementStateError(f"{owner!r} already holds a {self.dimension} allocation")
        if not self.can_fit(amount):
            raise CapacityError(
                self.dimension,
                f"insufficient {self.dimension}: requested {amount!r}, free {self.free!r}",
            )
        self.allocations[owner] = amount

    def credit(self, owner: str) -> float:
        if owner not in self.allocations:
            raise PlacementStateError(f"{owner!r} holds no {self.dimension} allocation")
        return self.allocations.pop(owner)


_DIMENSIONS = ("pe_mips", "ram_mb", "bw_bps")


class _HostingMixin:
    """Ledger bookkeeping and the guest list, shared by hosts and guests."""

    def _init_hosting(self, core: CoreAttributes) -> None:
        self.guests: list["Guest"] = []
        self.ledgers = {
            "pe_mips": Ledger("pe_mips", core.total_mips),
            "ram_mb": Ledger("ram_mb", core.ram_mb),
            "bw_bps": Ledger("bw_bps", core.bw_bps),
        }

    def capacity_shortfall(self, core: CoreAttributes) -> str | None:
        """Name of the first dimension that cannot fit ``core``, or None."""
        demands = _demands(core)
        for dim in _DIMENSIONS:
            if not self.ledgers[dim].can_fit(demands[dim]):
                return dim
        return None


def _demands(core: CoreAttributes) -> dict[str, float]:
    return {"pe_mips": core.total_mips, "ram_mb": core.ram_mb, "bw_bps": core.bw_bps}


class Host(_HostingMixin):
    """A physical machine: root of every hosting chain."""

    def __init__(self, spec: HostSpec, rack: str | None = None, power_model: "PowerModel | None" = None) -> None:
        self.spec = spec
        self.rack = rack
        self.power_model = power_model
        self._init_hosting(spec.core)

    @property
    def id(self) -> str:
        return self.spec.id

    def __repr__(self) -> str:
        return f"Host({self.spec.id!r})"


class Guest(_HostingMixin):
    """A VM or container.

    Guests run cloudlets through their scheduler and may also host
    nested guests out of their own capacity. ``host_ref`` points at
    whatever the guest is placed on (a Host or another Guest).
    """

    def __init__(self, spec: GuestSpec, scheduler=None) -> None:
        self.spec = spec
        self.scheduler = scheduler
        self.host_ref: Host | Guest | None = None
        self._init_hosting(spec.core)

    @property
    def id(self) -> str:
        return self.spec.id

    @property
    def kind(self) -> GuestKind:
        return self.spec.kind

    def mips_share(self) -> tuple[float, ...]:
        """Per-PE processing power granted to this guest's cloudlets."""
        return (self.spec.core.mips_per_pe,) * self.spec.core.num_pes

    def physical_host(self) -> Host:
        """Walk the hosting chain down to the physical machine."""
        node: Host | Guest | None = self.host_ref
        while isinstance(node, Guest):
            node = node.host_ref
        if node is None:
            raise PlacementStateError(f"guest {self.id!r} is not placed on any host")
        return node

    def __repr__(self) -> str:
        return f"Guest({self.spec.id!r}, {self.spec.kind.value})"


def place_guest(host: Host | Guest, guest: Guest) -> None:
    """Place ``guest`` on ``host``, debiting every capacity dimension.

    The placement is atomic: if any dimension cannot fit the request,
    nothing is debited and the ledgers are left exactly as they were.
    Placing an entity inside itself, or anywhere under itself, is a
    nesting error.
    """
    if guest.host_ref is not None:
        raise PlacementStateError(f"guest {guest.id!r} is already placed")
    node: Host | Guest | None = host
    while isinstance(node, Guest):
        if node is guest:
            raise NestingError(f"placing {guest.id!r} on {host.id!r} would create a hosting cycle")
        node = node.host_ref
    shortfall = host.capacity_shortfall(guest.spec.core)
    if shortfall is not None:
        demand = _demands(guest.spec.core)[shortfall]
        raise CapacityError(
            shortfall,
            f"host {host.id!r} cannot fit guest {guest.id!r}: "
            f"{shortfall} demand {demand!r} exceeds free {host.ledgers[shortfall].free!r}",
        )
    for dim, amount in _demands(guest.spec.core).items():
        host.ledgers[dim].debit(guest.id, amount)
    host.guests.append(guest)
    guest.host_ref = host


def remove_guest(guest: Guest) -> None:
    """Undo a placement, crediting the hosting entity's ledgers."""
    host = guest.host_ref
    if host is None:
        raise PlacementStateError(f"guest {guest.id!r} is not placed")
    if guest.guests:
        raise PlacementStateError(f"guest {guest.id!r} still hosts nested guests")
    for dim in _DIMENSIONS:
        host.ledgers[dim].credit(guest.id)
    host.guests.remove(guest)
    guest.host_ref = None


def stack_overhead(guest: Guest) -> float:
    """Total virtualization overhead along the chain above ``guest``.

    Sums the per-layer overhead of the guest itself and every guest it
    is nested inside, stopping at the physical host (which charges
    nothing). A container with 3 s of overhead inside a VM with 5 s
    yields 8 s.
    """
    total = 0.0
    node: Host | Guest | None = guest
    while isinstance(node, Guest):
        total += node.spec.virt_overhead_s
        node = node.host_ref
    if node is None:
        raise PlacementStateError(f"guest {guest.id!r} is not placed on any host")
    return total


@dataclass(frozen=True)
class PowerModel:
    """Linear utilization-to-power model."""

    idle_watts: float
    max_watts: float

    def __post_init__(self) -> None:
        if self.idle_watts < 0:
            raise ValueError("idle_watts must be non-negative")
        if self.max_watts < self.idle_watts:
            raise ValueError("max_watts must be at least idle_watts")

    def power(self, utilization: float) -> float:
        """Instantaneous draw in watts at the given utilization in [0, 1]."""
        if not 0.0 <= utilization <= 1.0:
            raise ValueError(f"utilization must be within [0, 1], got {utilization!r}")
        return self.idle_watts + (self.max_watts - self.idle_watts) * utilization


def energy_between(
    model: PowerModel,
    t0: float,
    t1: float,
    utilization_samples,
) -> float:
    """Energy in joules consumed over [t0, t1].

    ``utilization_samples`` is an iterable of (start, end, utilization)
    segments describing a piecewise-constant utilization trace. The
    samples must cover [t0, t1] without gaps; portions outside the
    window are ignored. Energy is the sum of power(u) * duration over
    the covered pieces.
    """
    if t1 < t0:
        raise ValueError(f"t1 must not precede t0 ({t0!r} > {t1!r})")
    if t1 == t0:
        return 0.0
    cursor = t0
    total = 0.0
    for start, end, utilization in sorted(utilization_samples, key=lambda seg: seg[0]):
        if end < start:
            raise ValueError(f"segment ends before it starts: ({start!r}, {end!r})")
        if end <= cursor:
            continue
        if start > cursor:
            raise ValueError(f"utilization trace has a gap at t={cursor!r}")
        hi = min(end, t1)
        if hi > cursor:
            total += model.power(utilization) * (hi - cursor)
            cursor = hi
        if cursor >= t1:
            break
    if cursor < t1:
        raise ValueError(f"utilization trace does not cover [{t0!r}, {t1!r}] (stops at {cursor!r})")
    return total
