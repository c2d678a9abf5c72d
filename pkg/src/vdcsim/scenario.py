"""Scenario files: loading, validation, and simulation assembly.

A scenario is a JSON document with these sections:

  name              optional run label
  hosts             homogeneous physical fleet: count, pes, clk_rate_hz,
                    ipc, ram_mb, bw_bps, optional power_idle_w and
                    power_max_w, optional guest_scheduler
  network           switches (id, level, optional forwarding_delay_s)
                    and links (a, b, bandwidth_bps); hosts are named
                    host-0 .. host-(count-1)
  guest_defaults    pes, mips_per_pe (null derives it from the host
                    clock), ram_mb, bw_bps, vm_overhead_s,
                    container_overhead_s, cloudlet_scheduler,
                    strict_serial
  deployment        shorthand {virt_config: V|C|N, placement_config:
                    I|II|III}, expanded against the host fleet; XOR
  guests+placement  explicit guest list (id, kind, host or parent, and
                    per-guest capacity overrides) plus a task-to-guest
                    map
  workflow          tasks (id, length_mi, pes_required), edges (src,
                    dst, payload_bytes), optional deadline_s
  arrivals          kind fixed (scale_s) or exponential (mean_s or
                    rate_per_s), count, optional seed
  overhead_enabled  when false every guest's stack overhead is zero
  oracle_payload_bytes   payload grid for the closed-form oracle table

Placement shorthand semantics: I runs every task on a single guest
stack, II spreads tasks over two stacks on distinct hosts in the same
rack, III over two stacks in different racks. Virtualization shorthand:
V is a VM on the host, C a container on the host, N a container nested
inside a VM. The exponential arrival scale is the mean inter-arrival
time; a rate_per_s value is converted to its reciprocal and the chosen
interpretation is echoed in run metadata.

Validation is collecting: ``load_scenario`` reports every problem it
finds in one exception rather than stopping at the first.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

from .engine import Simulation
from .network import Link, NetworkTopology, Switch, SwitchLevel
from .orchestration import (
    ArrivalKind,
    ArrivalProcess,
    Broker,
    Datacenter,
    EdgeSpec,
    TaskSpec,
    WorkflowDag,
    WorkflowError,
    sample_arrivals,
    uncontended_makespan,
)
from .resources import (
    Guest,
    GuestKind,
    GuestSpec,
    CoreAttributes,
    Host,
    HostSpec,
    PowerModel,
    mips_from_clock,
    place_guest,
)
from .scheduling import SpaceSharedScheduler, TimeSharedScheduler

__all__ = [
    "BuiltSimulation",
    "GuestConf",
    "HostFleet",
    "Scenario",
    "ScenarioParseError",
    "ScenarioValidationError",
    "build_simulation",
    "load_scenario",
    "oracle_rows",
    "scenario_from_dict",
    "scenario_to_dict",
]

VIRT_CONFIGS = ("V", "C", "N")
PLACEMENT_CONFIGS = ("I", "II", "III")
DEFAULT_ORACLE_PAYLOADS = (1, 1_000_000_000)


class ScenarioParseError(ValueError):
    """The scenario file is not well-formed JSON."""


class ScenarioValidationError(ValueError):
    """The scenario is well-formed but semantically invalid; ``errors``
    lists every problem found."""

    def __init__(self, errors: list[str]) -> None:
        super().__init__("; ".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class HostFleet:
    count: int
    pes: int
    clk_rate_hz: float
    ipc: float
    ram_mb: float
    bw_bps: float
    power_idle_w: float | None = None
    power_max_w: float | None = None
    guest_scheduler: str = "time_shared"

    def host_ids(self) -> list[str]:
        return [f"host-{i}" for i in range(self.count)]

    @property
    def mips_per_pe(self) -> float:
        return mips_from_clock(self.clk_rate_hz, self.ipc)


@dataclass(frozen=True)
class GuestDefaults:
    pes: int = 1
    mips_per_pe: float | None = None
    ram_mb: float = 4096
    bw_bps: float = 1e9
    vm_overhead_s: float = 0.0
    container_overhead_s: float = 0.0
    cloudlet_scheduler: str = "time_shared"
    strict_serial: bool = False


@dataclass(frozen=True)
class GuestConf:
    id: str
    kind: str
    host: str | None = None
    parent: str | None = None
    pes: int | None = None
    mips_per_pe: float | None = None
    ram_mb: float | None = None
    bw_bps: float | None = None
    overhead_s: float | None = None
    cloudlet_scheduler: str | None = None


@dataclass(frozen=True)
class ArrivalsConf:
    kind: str
    scale_s: float
    count: int
    seed: int | None = None
    interpretation: str = "scale_s is the mean inter-arrival time"


@dataclass(frozen=True)
class Scenario:
    name: str
    hosts: HostFleet
    switches: tuple[Switch, ...]
    links: tuple[Link, ...]
    guest_defaults: GuestDefaults
    tasks: tuple[TaskSpec, ...]
    edges: tuple[EdgeSpec, ...]
    deadline_s: float | None
    arrivals: ArrivalsConf
    overhead_enabled: bool
    deployment: tuple[str, str] | None = None  # (virt_config, placement_config)
    guests: tuple[GuestConf, ...] = ()
    placement: tuple[tuple[str, str], ...] = ()  # (task_id, guest_id)
    oracle_payload_bytes: tuple[int, ...] = DEFAULT_ORACLE_PAYLOADS
    source_digest: str | None = field(default=None, compare=False)

    @property
    def total_payload_bytes(self) -> int:
        return sum(edge.payload_bytes for edge in self.edges)

    def workflow(self) -> WorkflowDag:
        return WorkflowDag(list(self.tasks), list(self.edges), self.deadline_s)


# ---------------------------------------------------------------------------
# parsing helpers


def _section(data: dict, key: str, errors: list[str], required: bool = True) -> dict | None:
    value = data.get(key)
    if value is None:
        if required:
            errors.append(f"missing section {key!r}")
        return None
    if not isinstance(value, dict):
        errors.append(f"section {key!r} must be an object")
        return None
    return value


def _num(
    section: dict,
    key: str,
    errors: list[str],
    where: str,
    required: bool = True,
    default: float | None = None,
    minimum: float | None = None,
    positive: bool = False,
) -> float | None:
    if key not in section or section[key] is None:
        if required:
            errors.append(f"{where}: missing {key!r}")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append(f"{where}: {key!r} must be a number, got {value!r}")
        return default
    value = float(value)
    if positive and value <= 0:
        errors.append(f"{where}: {key!r} must be positive, got {value!r}")
        return default
    if minimum is not None and value < minimum:
        errors.append(f"{where}: {key!r} must be at least {minimum}, got {value!r}")
        return default
    return value


def _int(
    section: dict,
    key: str,
    errors: list[str],
    where: str,
    required: bool = True,
    default: int | None = None,
    minimum: int | None = None,
) -> int | None:
    if key not in section or section[key] is None:
        if required:
            errors.append(f"{where}: missing {key!r}")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, int):
        errors.append(f"{where}: {key!r} must be an integer, got {value!r}")
        return default
    if minimum is not None and value < minimum:
        errors.append(f"{where}: {key!r} must be at least {minimum}, got {value!r}")
        return default
    return value


def _str(
    section: dict,
    key: str,
    errors: list[str],
    where: str,
    required: bool = True,
    default: str | None = None,
    choices: Sequence[str] | None = None,
) -> str | None:
    if key not in section or section[key] is None:
        if required:
            errors.append(f"{where}: missing {key!r}")
        return default
    value = section[key]
    if not isinstance(value, str):
        errors.append(f"{where}: {key!r} must be a string, got {value!r}")
        return default
    if choices is not None and value not in choices:
        errors.append(f"{where}: {key!r} must be one of {list(choices)}, got {value!r}")
        return default
    return value


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a scenario file.

    Raises ScenarioParseError for malformed JSON (with line and column)
    and ScenarioValidationError carrying every semantic problem found.
    """
    raw = Path(path).read_bytes()
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None
    if not isinstance(data, dict):
        raise ScenarioParseError(f"{path}: scenario root must be an object")
    scenario = scenario_from_dict(data)
    return replace(scenario, source_digest=hashlib.sha256(raw).hexdigest())


def scenario_from_dict(data: dict) -> Scenario:
    """Validate a scenario dictionary; collects every error before raising."""
    errors: list[str] = []
    name = _str(data, "name", errors, "scenario", required=False, default="scenario") or "scenario"

    fleet = None
    hosts = _section(data, "hosts", errors)
    if hosts is not None:
        count = _int(hosts, "count", errors, "hosts", minimum=1)
        pes = _int(hosts, "pes", errors, "hosts", required=False, default=1, minimum=1)
        clk = _num(hosts, "clk_rate_hz", errors, "hosts", positive=True)
        ipc = _num(hosts, "ipc", errors, "hosts", positive=True)
        ram = _num(hosts, "ram_mb", errors, "hosts", required=False, default=16384, minimum=0)
        bw = _num(hosts, "bw_bps", errors, "hosts", required=False, default=1e9, minimum=0)
        idle = _num(hosts, "power_idle_w", errors, "hosts", required=False, minimum=0)
        peak = _num(hosts, "power_max_w", errors, "hosts", required=False, minimum=0)
        sched = _str(hosts, "guest_scheduler", errors, "hosts", required=False,
                     default="time_shared", choices=("time_shared",))
        if idle is not None and peak is not None and peak < idle:
            errors.append("hosts: power_max_w must be at least power_idle_w")
        if None not in (count, pes, clk, ipc, ram, bw):
            fleet = HostFleet(count, pes, clk, ipc, ram, bw, idle, peak, sched or "time_shared")

    switches: list[Switch] = []
    links: list[Link] = []
    network = _section(data, "network", errors)
    if network is not None:
        raw_switches = network.get("switches")
        if not isinstance(raw_switches, list):
            errors.append("network: 'switches' must be a list")
            raw_switches = []
        for i, sw in enumerate(raw_switches):
            where = f"network.switches[{i}]"
            if not isinstance(sw, dict):
                errors.append(f"{where}: must be an object")
                continue
            sw_id = _str(sw, "id", errors, where)
            level = _str(sw, "level", errors, where, choices=("tor", "aggregate"))
            delay = _num(sw, "forwarding_delay_s", errors, where, required=False,
                         default=0.0, minimum=0)
            if sw_id is not None and level is not None:
                switches.append(Switch(sw_id, SwitchLevel(level), delay or 0.0))
        raw_links = network.get("links")
        if not isinstance(raw_links, list):
            errors.append("network: 'links' must be a list")
            raw_links = []
        for i, ln in enumerate(raw_links):
            where = f"network.links[{i}]"
            if not isinstance(ln, dict):
                errors.append(f"{where}: must be an object")
                continue
            a = _str(ln, "a", errors, where)
            b = _str(ln, "b", errors, where)
            bw_link = _num(ln, "bandwidth_bps", errors, where, positive=True)
            if None not in (a, b, bw_link):
                if a == b:
                    errors.append(f"{where}: endpoints must differ")
                else:
                    links.append(Link(a, b, bw_link))

    defaults = GuestDefaults()
    raw_defaults = _section(data, "guest_defaults", errors, required=False)
    if raw_defaults is not None:
        defaults = GuestDefaults(
            pes=_int(raw_defaults, "pes", errors, "guest_defaults", required=False,
                     default=1, minimum=1) or 1,
            mips_per_pe=_num(raw_defaults, "mips_per_pe", errors, "guest_defaults",
                             required=False, positive=True),
            ram_mb=_num(raw_defaults, "ram_mb", errors, "guest_defaults", required=False,
                        default=4096, minimum=0) or 0.0,
            bw_bps=_num(raw_defaults, "bw_bps", errors, "guest_defaults", required=False,
                        default=1e9, minimum=0) or 0.0,
            vm_overhead_s=_num(raw_defaults, "vm_overhead_s", errors, "guest_defaults",
                               required=False, default=0.0, minimum=0) or 0.0,
            container_overhead_s=_num(raw_defaults, "container_overhead_s", errors,
                                      "guest_defaults", required=False, default=0.0,
                                      minimum=0) or 0.0,
            cloudlet_scheduler=_str(raw_defaults, "cloudlet_scheduler", errors,
                                    "guest_defaults", required=False, default="time_shared",
                                    choices=("time_shared", "space_shared")) or "time_shared",
            strict_serial=bool(raw_defaults.get("strict_serial", False)),
        )

    tasks: list[TaskSpec] = []
    edges: list[EdgeSpec] = []
    deadline = None
    workflow = _section(data, "workflow", errors)
    if workflow is not None:
        raw_tasks = workflow.get("tasks")
        if not isinstance(raw_tasks, list) or not raw_tasks:
            errors.append("workflow: 'tasks' must be a non-empty list")
            raw_tasks = []
        for i, task in enumerate(raw_tasks):
            where = f"workflow.tasks[{i}]"
            if not isinstance(task, dict):
                errors.append(f"{where}: must be an object")
                continue
            tid = _str(task, "id", errors, where)
            length = _num(task, "length_mi", errors, where, minimum=0)
            pes_req = _int(task, "pes_required", errors, where, required=False,
                           default=1, minimum=1)
            if tid is not None and length is not None:
                tasks.append(TaskSpec(tid, length, pes_req or 1))
        raw_edges = workflow.get("edges", [])
        if not isinstance(raw_edges, list):
            errors.append("workflow: 'edges' must be a list")
            raw_edges = []
        for i, edge in enumerate(raw_edges):
            where = f"workflow.edges[{i}]"
            if not isinstance(edge, dict):
                errors.append(f"{where}: must be an object")
                continue
            src = _str(edge, "src", errors, where)
            dst = _str(edge, "dst", errors, where)
            payload = _int(edge, "payload_bytes", errors, where, minimum=0)
            if None not in (src, dst, payload):
                edges.append(EdgeSpec(src, dst, payload))
        deadline = _num(workflow, "deadline_s", errors, "workflow", required=False, minimum=0)
        if tasks:
            try:
                WorkflowDag(tasks, edges, deadline)
            except WorkflowError as exc:
                errors.append(f"workflow: {exc}")

    arrivals = None
    raw_arrivals = _section(data, "arrivals", errors)
    if raw_arrivals is not None:
        kind = _str(raw_arrivals, "kind", errors, "arrivals", choices=("fixed", "exponential"))
        count = _int(raw_arrivals, "count", errors, "arrivals", minimum=0)
        seed = _int(raw_arrivals, "seed", errors, "arrivals", required=False)
        scale = None
        interpretation = "scale_s is the mean inter-arrival time"
        if kind == "fixed":
            scale = _num(raw_arrivals, "scale_s", errors, "arrivals", minimum=0)
            interpretation = "scale_s is the fixed inter-arrival time"
        elif kind == "exponential":
            mean = _num(raw_arrivals, "mean_s", errors, "arrivals", required=False, positive=True)
            rate = _num(raw_arrivals, "rate_per_s", errors, "arrivals", required=False, positive=True)
            if mean is not None and rate is not None:
                errors.append("arrivals: give either 'mean_s' or 'rate_per_s', not both")
            elif mean is not None:
                scale = mean
            elif rate is not None:
                scale = 1.0 / rate
                interpretation = "scale_s converted from rate_per_s (mean = 1/rate)"
            else:
                errors.append("arrivals: exponential arrivals need 'mean_s' or 'rate_per_s'")
        if kind is not None and count is not None and scale is not None:
            arrivals = ArrivalsConf(kind, scale, count, seed, interpretation)

    overhead_enabled = data.get("overhead_enabled", False)
    if not isinstance(overhead_enabled, bool):
        errors.append("'overhead_enabled' must be a boolean")
        overhead_enabled = False

    raw_oracle = data.get("oracle_payload_bytes", list(DEFAULT_ORACLE_PAYLOADS))
    oracle_payloads: list[int] = []
    if not isinstance(raw_oracle, list) or not all(
        isinstance(p, int) and not isinstance(p, bool) and p >= 0 for p in raw_oracle
    ):
        errors.append("'oracle_payload_bytes' must be a list of non-negative integers")
    else:
        oracle_payloads = raw_oracle

    deployment = None
    raw_deploy = _section(data, "deployment", errors, required=False)
    guests_conf: list[GuestConf] = []
    placement_pairs: list[tuple[str, str]] = []
    explicit = "guests" in data or "placement" in data
    if raw_deploy is not None and explicit:
        errors.append("give either 'deployment' or explicit 'guests'+'placement', not both")
    elif raw_deploy is not None:
        virt = _str(raw_deploy, "virt_config", errors, "deployment", choices=VIRT_CONFIGS)
        placement_cfg = _str(raw_deploy, "placement_config", errors, "deployment",
                             choices=PLACEMENT_CONFIGS)
        if virt is not None and placement_cfg is not None:
            deployment = (virt, placement_cfg)
    elif explicit:
        raw_guests = data.get("guests")
        if not isinstance(raw_guests, list) or not raw_guests:
            errors.append("'guests' must be a non-empty list")
            raw_guests = []
        for i, g in enumerate(raw_guests):
            where = f"guests[{i}]"
            if not isinstance(g, dict):
                errors.append(f"{where}: must be an object")
                continue
            gid = _str(g, "id", errors, where)
            kind = _str(g, "kind", errors, where, choices=("vm", "container"))
            host = _str(g, "host", errors, where, required=False)
            parent = _str(g, "parent", errors, where, required=False)
            if host is None and parent is None:
                errors.append(f"{where}: needs a 'host' or a 'parent'")
            if host is not None and parent is not None:
                errors.append(f"{where}: give 'host' or 'parent', not both")
            conf = GuestConf(
                id=gid or f"guest-{i}",
                kind=kind or "vm",
                host=host,
                parent=parent,
                pes=_int(g, "pes", errors, where, required=False, minimum=1),
                mips_per_pe=_num(g, "mips_per_pe", errors, where, required=False, positive=True),
                ram_mb=_num(g, "ram_mb", errors, where, required=False, minimum=0),
                bw_bps=_num(g, "bw_bps", errors, where, required=False, minimum=0),
                overhead_s=_num(g, "overhead_s", errors, where, required=False, minimum=0),
                cloudlet_scheduler=_str(g, "cloudlet_scheduler", errors, where, required=False,
                                        choices=("time_shared", "space_shared")),
            )
            if gid is not None and kind is not None:
                guests_conf.append(conf)
        raw_placement = data.get("placement")
        if not isinstance(raw_placement, dict) or not raw_placement:
            errors.append("'placement' must map every task id to a guest id")
        else:
            for task_id, guest_id in raw_placement.items():
                if not isinstance(guest_id, str):
                    errors.append(f"placement[{task_id!r}]: guest id must be a string")
                else:
                    placement_pairs.append((task_id, guest_id))
    else:
        errors.append("scenario needs a 'deployment' shorthand or explicit 'guests'+'placement'")

    # cross-section referential checks, only meaningful once pieces exist
    if fleet is not None and switches is not None:
        host_ids = set(fleet.host_ids())
        switch_ids = {sw.id for sw in switches}
        if len(switch_ids) != len(switches):
            errors.append("network: duplicate switch ids")
        for link in links:
            for end in (link.a, link.b):
                if end not in host_ids and end not in switch_ids:
                    errors.append(f"network: link endpoint {end!r} is not a host or switch")
        if not errors:
            topology = NetworkTopology(fleet.host_ids(), switches, links)
            if not topology.is_connected():
                errors.append("network: topology is not connected")
            elif deployment is not None:
                try:
                    _hosts_for_config(deployment[1], fleet.host_ids(), topology)
                except ScenarioValidationError as exc:
                    errors.extend(exc.errors)
    if guests_conf:
        guest_ids = {g.id for g in guests_conf}
        if len(guest_ids) != len(guests_conf):
            errors.append("guests: duplicate guest ids")
        host_ids = set(fleet.host_ids()) if fleet is not None else set()
        for g in guests_conf:
            if g.host is not None and g.host not in host_ids:
                errors.append(f"guests[{g.id}]: unknown host {g.host!r}")
            if g.parent is not None and g.parent not in guest_ids:
                errors.append(f"guests[{g.id}]: unknown parent guest {g.parent!r}")
            if g.parent == g.id:
                errors.append(f"guests[{g.id}]: cannot be its own parent")
        task_ids = {t.id for t in tasks}
        mapped = {task_id for task_id, _ in placement_pairs}
        for task_id, guest_id in placement_pairs:
            if task_id not in task_ids:
                errors.append(f"placement: unknown task {task_id!r}")
            if guest_id not in guest_ids:
                errors.append(f"placement: unknown guest {guest_id!r}")
        for task_id in sorted(task_ids - mapped):
            errors.append(f"placement: task {task_id!r} is not mapped to a guest")

    if errors:
        raise ScenarioValidationError(errors)

    return Scenario(
        name=name,
        hosts=fleet,
        switches=tuple(switches),
        links=tuple(links),
        guest_defaults=defaults,
        tasks=tuple(tasks),
        edges=tuple(edges),
        deadline_s=deadline,
        arrivals=arrivals,
        overhead_enabled=overhead_enabled,
        deployment=deployment,
        guests=tuple(guests_conf),
        placement=tuple(placement_pairs),
        oracle_payload_bytes=tuple(oracle_payloads),
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    """Inverse of scenario_from_dict, suitable for JSON dumping."""
    data: dict[str, Any] = {
        "name": scenario.name,
        "hosts": {
            "count": scenario.hosts.count,
            "pes": scenario.hosts.pes,
            "clk_rate_hz": scenario.hosts.clk_rate_hz,
            "ipc": scenario.hosts.ipc,
            "ram_mb": scenario.hosts.ram_mb,
            "bw_bps": scenario.hosts.bw_bps,
            "guest_scheduler": scenario.hosts.guest_scheduler,
        },
        "network": {
            "switches": [
                {"id": sw.id, "level": sw.level.value, "forwarding_delay_s": sw.forwarding_delay_s}
                for sw in scenario.switches
            ],
            "links": [
                {"a": ln.a, "b": ln.b, "bandwidth_bps": ln.bandwidth_bps} for ln in scenario.links
            ],
        },
        "guest_defaults": {
            "pes": scenario.guest_defaults.pes,
            "mips_per_pe": scenario.guest_defaults.mips_per_pe,
            "ram_mb": scenario.guest_defaults.ram_mb,
            "bw_bps": scenario.guest_defaults.bw_bps,
            "vm_overhead_s": scenario.guest_defaults.vm_overhead_s,
            "container_overhead_s": scenario.guest_defaults.container_overhead_s,
            "cloudlet_scheduler": scenario.guest_defaults.cloudlet_scheduler,
            "strict_serial": scenario.guest_defaults.strict_serial,
        },
        "workflow": {
            "tasks": [
                {"id": t.id, "length_mi": t.length_mi, "pes_required": t.pes_required}
                for t in scenario.tasks
            ],
            "edges": [
                {"src": e.src, "dst": e.dst, "payload_bytes": e.payload_bytes}
                for e in scenario.edges
            ],
            "deadline_s": scenario.deadline_s,
        },
        "arrivals": {
            "kind": scenario.arrivals.kind,
            "count": scenario.arrivals.count,
        },
        "overhead_enabled": scenario.overhead_enabled,
        "oracle_payload_bytes": list(scenario.oracle_payload_bytes),
    }
    if scenario.hosts.power_idle_w is not None:
        data["hosts"]["power_idle_w"] = scenario.hosts.power_idle_w
    if scenario.hosts.power_max_w is not None:
        data["hosts"]["power_max_w"] = scenario.hosts.power_max_w
    if scenario.arrivals.kind == "fixed":
        data["arrivals"]["scale_s"] = scenario.arrivals.scale_s
    else:
        data["arrivals"]["mean_s"] = scenario.arrivals.scale_s
    if scenario.arrivals.seed is not None:
        data["arrivals"]["seed"] = scenario.arrivals.seed
    if scenario.deployment is not None:
        data["deployment"] = {
            "virt_config": scenario.deployment[0],
            "placement_config": scenario.deployment[1],
        }
    if scenario.guests:
        data["guests"] = []
        for g in scenario.guests:
            entry: dict[str, Any] = {"id": g.id, "kind": g.kind}
            for key in ("host", "parent", "pes", "mips_per_pe", "ram_mb", "bw_bps",
                        "overhead_s", "cloudlet_scheduler"):
                value = getattr(g, key)
                if value is not None:
                    entry[key] = value
            data["guests"].append(entry)
        data["placement"] = {task_id: guest_id for task_id, guest_id in scenario.placement}
    return data


# ---------------------------------------------------------------------------
# assembly


@dataclass
class BuiltSimulation:
    sim: Simulation
    datacenter: Datacenter
    broker: Broker
    hosts: list[Host]
    guests: dict[str, Guest]
    topology: NetworkTopology
    metadata: dict


def _hosts_for_config(
    placement_cfg: str, host_ids: list[str], topology: NetworkTopology
) -> list[str]:
    """Hosts backing each guest stack for a placement shorthand."""
    if placement_cfg == "I":
        return [host_ids[0]]
    racks = {hid: topology.rack_of(hid) for hid in host_ids}
    if placement_cfg == "II":
        for i, first in enumerate(host_ids):
            for second in host_ids[i + 1:]:
                if racks[first] is not None and racks[first] == racks[second]:
                    return [first, second]
        raise ScenarioValidationError(
            ["deployment: placement II needs two hosts sharing a rack"]
        )
    for i, first in enumerate(host_ids):
        for second in host_ids[i + 1:]:
            if None not in (racks[first], racks[second]) and racks[first] != racks[second]:
                return [first, second]
    raise ScenarioValidationError(
        ["deployment: placement III needs two hosts in different racks"]
    )


def _make_scheduler(name: str, strict_serial: bool):
    if name == "space_shared":
        return SpaceSharedScheduler(strict_serial=strict_serial)
    return TimeSharedScheduler()


def _guest_core(defaults: GuestDefaults, fleet: HostFleet) -> CoreAttributes:
    mips = defaults.mips_per_pe if defaults.mips_per_pe is not None else fleet.mips_per_pe
    return CoreAttributes(defaults.pes, mips, defaults.ram_mb, defaults.bw_bps)


def _expand_deployment(
    scenario: Scenario, hosts_by_id: dict[str, Host], topology: NetworkTopology
) -> tuple[dict[str, Guest], dict[str, Guest]]:
    """Build and place guest stacks for a deployment shorthand.

    Returns (all guests by id, task placement map). Tasks are spread
    round-robin over the stack leaves in task order.
    """
    virt, placement_cfg = scenario.deployment
    defaults = scenario.guest_defaults
    core = _guest_core(defaults, scenario.hosts)
    vm_overhead = defaults.vm_overhead_s if scenario.overhead_enabled else 0.0
    ct_overhead = defaults.container_overhead_s if scenario.overhead_enabled else 0.0
    stack_hosts = _hosts_for_config(placement_cfg, scenario.hosts.host_ids(), topology)
    guests: dict[str, Guest] = {}
    leaves: list[Guest] = []
    for i, host_id in enumerate(stack_hosts):
        host = hosts_by_id[host_id]
        if virt == "V":
            leaf = Guest(
                GuestSpec(f"vm-{i}", GuestKind.VM, core, vm_overhead),
                scheduler=_make_scheduler(defaults.cloudlet_scheduler, defaults.strict_serial),
            )
            place_guest(host, leaf)
            guests[leaf.id] = leaf
        elif virt == "C":
            leaf = Guest(
                GuestSpec(f"ct-{i}", GuestKind.CONTAINER, core, ct_overhead),
                scheduler=_make_scheduler(defaults.cloudlet_scheduler, defaults.strict_serial),
            )
            place_guest(host, leaf)
            guests[leaf.id] = leaf
        else:  # N: container nested inside a VM
            vm = Guest(
                GuestSpec(f"vm-{i}", GuestKind.VM, core, vm_overhead),
                scheduler=_make_scheduler(defaults.cloudlet_scheduler, defaults.strict_serial),
            )
            place_guest(host, vm)
            guests[vm.id] = vm
            leaf = Guest(
                GuestSpec(f"ct-{i}", GuestKind.CONTAINER, core, ct_overhead),
                scheduler=_make_scheduler(defaults.cloudlet_scheduler, defaults.strict_serial),
            )
            place_guest(vm, leaf)
            guests[leaf.id] = leaf
        leaves.append(leaf)
    placement = {
        task.id: leaves[i % len(leaves)] for i, task in enumerate(scenario.tasks)
    }
    return guests, placement


def _build_explicit_guests(
    scenario: Scenario, hosts_by_id: dict[str, Host]
) -> tuple[dict[str, Guest], dict[str, Guest]]:
    defaults = scenario.guest_defaults
    guests: dict[str, Guest] = {}
    for conf in scenario.guests:
        pes = conf.pes if conf.pes is not None else defaults.pes
        mips = conf.mips_per_pe
        if mips is None:
            mips = defaults.mips_per_pe
        if mips is None:
            mips = scenario.hosts.mips_per_pe
        ram = conf.ram_mb if conf.ram_mb is not None else defaults.ram_mb
        bw = conf.bw_bps if conf.bw_bps is not None else defaults.bw_bps
        if conf.overhead_s is not None:
            overhead = conf.overhead_s
        elif conf.kind == "vm":
            overhead = defaults.vm_overhead_s
        else:
            overhead = defaults.container_overhead_s
        if not scenario.overhead_enabled:
            overhead = 0.0
        scheduler_name = conf.cloudlet_scheduler or defaults.cloudlet_scheduler
        guests[conf.id] = Guest(
            GuestSpec(conf.id, GuestKind(conf.kind), CoreAttributes(pes, mips, ram, bw), overhead),
            scheduler=_make_scheduler(scheduler_name, defaults.strict_serial),
        )
    # place hosts-first, then nested guests in declaration order
    for conf in scenario.guests:
        if conf.host is not None:
            place_guest(hosts_by_id[conf.host], guests[conf.id])
    remaining = [c for c in scenario.guests if c.parent is not None]
    while remaining:
        progressed = []
        for conf in remaining:
            if guests[conf.parent].host_ref is not None:
                place_guest(guests[conf.parent], guests[conf.id])
                progressed.append(conf)
        if not progressed:
            unplaced = [c.id for c in remaining]
            raise ScenarioValidationError(
                [f"guests: nesting never reaches a host for {unplaced}"]
            )
        remaining = [c for c in remaining if c not in progressed]
    placement = {task_id: guests[guest_id] for task_id, guest_id in scenario.placement}
    return guests, placement


def build_simulation(scenario: Scenario, seed: int | None = None) -> BuiltSimulation:
    """Assemble a ready-to-run simulation from a validated scenario.

    ``seed`` overrides the scenario's arrival seed; when neither is set
    the seed defaults to 1. The arrival trace depends only on the
    arrival parameters and the effective seed, so different deployments
    under the same seed face the identical workload.
    """
    effective_seed = seed
    if effective_seed is None:
        effective_seed = scenario.arrivals.seed if scenario.arrivals.seed is not None else 1
    fleet = scenario.hosts
    sim = Simulation()
    topology = NetworkTopology(fleet.host_ids(), scenario.switches, scenario.links)
    power = None
    if fleet.power_idle_w is not None and fleet.power_max_w is not None:
        power = PowerModel(fleet.power_idle_w, fleet.power_max_w)
    hosts = [
        Host(
            HostSpec.from_clock(host_id, fleet.clk_rate_hz, fleet.ipc, fleet.pes,
                                fleet.ram_mb, fleet.bw_bps),
            rack=topology.rack_of(host_id),
            power_model=power,
        )
        for host_id in fleet.host_ids()
    ]
    hosts_by_id = {host.id: host for host in hosts}
    datacenter = Datacenter(sim, hosts, topology)
    if scenario.deployment is not None:
        guests, placement = _expand_deployment(scenario, hosts_by_id, topology)
        virt_label, placement_label = scenario.deployment
    else:
        guests, placement = _build_explicit_guests(scenario, hosts_by_id)
        virt_label, placement_label = "explicit", "explicit"
    for guest in guests.values():
        datacenter.register_guest(guest)
    process = ArrivalProcess(
        kind=ArrivalKind(scenario.arrivals.kind),
        scale_s=scenario.arrivals.scale_s,
        count=scenario.arrivals.count,
        seed=effective_seed,
    ) if scenario.arrivals.count > 0 else None
    release_times = sample_arrivals(process) if process is not None else []
    broker = Broker(sim, datacenter, scenario.workflow(), placement, release_times)
    metadata = {
        "scenario_name": scenario.name,
        "scenario_sha256": scenario.source_digest,
        "seed": effective_seed,
        "placement_config": placement_label,
        "virt_config": virt_label,
        "overhead_enabled": scenario.overhead_enabled,
        "payload_bytes": scenario.total_payload_bytes,
        "deadline_s": scenario.deadline_s,
        "arrivals": {
            "kind": scenario.arrivals.kind,
            "scale_s": scenario.arrivals.scale_s,
            "count": scenario.arrivals.count,
            "interpretation": scenario.arrivals.interpretation,
        },
    }
    return BuiltSimulation(sim, datacenter, broker, hosts, guests, topology, metadata)


def oracle_rows(scenario: Scenario) -> list[dict]:
    """Closed-form makespan for every (virt, placement, payload) cell.

    Evaluates the canonical deployment grid against the scenario's
    fleet, workflow and overhead setting without running a simulation.
    Switch counts come from routing between the hosts each placement
    shorthand would use.
    """
    fleet = scenario.hosts
    topology = NetworkTopology(fleet.host_ids(), scenario.switches, scenario.links)
    defaults = scenario.guest_defaults
    mips = defaults.mips_per_pe if defaults.mips_per_pe is not None else fleet.mips_per_pe
    lengths = [task.length_mi for task in scenario.tasks]
    overheads = {
        "V": defaults.vm_overhead_s,
        "C": defaults.container_overhead_s,
        "N": defaults.vm_overhead_s + defaults.container_overhead_s,
    }
    rows = []
    for virt in VIRT_CONFIGS:
        overhead = overheads[virt] if scenario.overhead_enabled else 0.0
        for placement_cfg in PLACEMENT_CONFIGS:
            stack_hosts = _hosts_for_config(placement_cfg, fleet.host_ids(), topology)
            if len(stack_hosts) == 1:
                switch_count = 0
            else:
                _, switch_count = topology.route(stack_hosts[0], stack_hosts[1])
            for payload in scenario.oracle_payload_bytes:
                rows.append({
                    "virt_config": virt,
                    "placement_config": placement_cfg,
                    "payload_bytes": payload,
                    "switch_count": switch_count,
                    "makespan_s": uncontended_makespan(
                        lengths, mips, overhead, switch_count, payload, defaults.bw_bps
                    ),
                })
    return rows
