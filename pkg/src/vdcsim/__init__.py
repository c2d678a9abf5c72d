"""vdcsim: a deterministic discrete-event simulator for virtualized
datacenter workloads.

The package models physical hosts, nested guests (VMs and containers),
CPU scheduling of cloudlets, a switched datacenter network with fair
bandwidth sharing, and workflow activations released by a broker. Runs
are reproducible: the same scenario and seed always produce the same
event trace and the same results.
"""

from .engine import (
    Event,
    EventTag,
    FutureEventQueue,
    SchedulingError,
    SimEntity,
    Simulation,
    SimulationStateError,
    TagCollisionError,
    TagRegistry,
)
from .network import (
    DeadlineOutcome,
    FlowManager,
    Link,
    NetworkTopology,
    RoutingError,
    Switch,
    SwitchLevel,
    check_deadline,
    fair_share,
)
from .orchestration import (
    ActivationRecord,
    ArrivalKind,
    ArrivalProcess,
    Broker,
    Datacenter,
    EdgeSpec,
    TaskSpec,
    WorkflowDag,
    WorkflowError,
    collect_results,
    sample_arrivals,
    uncontended_makespan,
)
from .placement import (
    AllocationError,
    AllocationPolicy,
    FirstFit,
    LeastDemanding,
    MostDemanding,
    SeededRandom,
    SelectionPolicy,
    select_for_migration,
)
from .resources import (
    CapacityError,
    CoreAttributes,
    Guest,
    GuestKind,
    GuestSpec,
    Host,
    HostSpec,
    NestingError,
    PlacementStateError,
    PowerModel,
    energy_between,
    mips_from_clock,
    place_guest,
    remove_guest,
    stack_overhead,
)
from .scenario import (
    BuiltSimulation,
    Scenario,
    ScenarioParseError,
    ScenarioValidationError,
    build_simulation,
    load_scenario,
    oracle_rows,
    scenario_from_dict,
    scenario_to_dict,
)
from .scheduling import (
    NO_NEXT_EVENT,
    Cloudlet,
    CloudletScheduler,
    CloudletStatus,
    NetworkCloudlet,
    SchedulerContext,
    SchedulerError,
    SpaceSharedScheduler,
    Stage,
    StageKind,
    TimeSharedScheduler,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationRecord",
    "AllocationError",
    "AllocationPolicy",
    "ArrivalKind",
    "ArrivalProcess",
    "Broker",
    "BuiltSimulation",
    "CapacityError",
    "Cloudlet",
    "CloudletScheduler",
    "CloudletStatus",
    "CoreAttributes",
    "Datacenter",
    "DeadlineOutcome",
    "EdgeSpec",
    "Event",
    "EventTag",
    "FirstFit",
    "FlowManager",
    "FutureEventQueue",
    "Guest",
    "GuestKind",
    "GuestSpec",
    "Host",
    "HostSpec",
    "LeastDemanding",
    "Link",
    "MostDemanding",
    "NetworkCloudlet",
    "NetworkTopology",
    "NestingError",
    "NO_NEXT_EVENT",
    "PlacementStateError",
    "PowerModel",
    "RoutingError",
    "Scenario",
    "ScenarioParseError",
    "ScenarioValidationError",
    "SchedulerContext",
    "SchedulerError",
    "SchedulingError",
    "SeededRandom",
    "SelectionPolicy",
    "SimEntity",
    "Simulation",
    "SimulationStateError",
    "SpaceSharedScheduler",
    "Stage",
    "StageKind",
    "Switch",
    "SwitchLevel",
    "TagCollisionError",
    "TagRegistry",
    "TaskSpec",
    "TimeSharedScheduler",
    "WorkflowDag",
    "WorkflowError",
    "build_simulation",
    "check_deadline",
    "collect_results",
    "energy_between",
    "fair_share",
    "load_scenario",
    "mips_from_clock",
    "oracle_rows",
    "place_guest",
    "remove_guest",
    "sample_arrivals",
    "scenario_from_dict",
    "scenario_to_dict",
    "select_for_migration",
    "stack_overhead",
    "uncontended_makespan",
]
