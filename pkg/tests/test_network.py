"""Topology, routing, bandwidth sharing, and deadline tests."""

import pytest

from vdcsim import (
    ActivationRecord,
    CoreAttributes,
    DeadlineOutcome,
    FlowManager,
    Guest,
    GuestKind,
    GuestSpec,
    Host,
    HostSpec,
    Link,
    NetworkTopology,
    RoutingError,
    SimEntity,
    Simulation,
    Switch,
    SwitchLevel,
    check_deadline,
    fair_share,
    place_guest,
)

GB = 1_000_000_000  # bytes; 8e9 bits takes 8 s at 1 Gbit/s


def _tree(tor_delay=0.0):
    """Two racks of two hosts under one aggregation switch."""
    switches = [
        Switch("tor-a", SwitchLevel.TOR, tor_delay),
        Switch("tor-b", SwitchLevel.TOR, tor_delay),
        Switch("agg", SwitchLevel.AGGREGATE),
    ]
    links = [
        Link("host-0", "tor-a", 1e9),
        Link("host-1", "tor-a", 1e9),
        Link("host-2", "tor-b", 1e9),
        Link("host-3", "tor-b", 1e9),
        Link("tor-a", "agg", 1e9),
        Link("tor-b", "agg", 1e9),
    ]
    return NetworkTopology([f"host-{i}" for i in range(4)], switches, links)


def test_route_stays_on_host():
    links, hops = _tree().route("host-0", "host-0")
    assert links == [] and hops == 0


def test_route_inside_a_rack_crosses_one_switch_level():
    links, hops = _tree().route("host-0", "host-1")
    assert hops == 1
    assert len(links) == 2
    assert "host-0" in (links[0].a, links[0].b)
    assert "host-1" in (links[-1].a, links[-1].b)


def test_route_across_racks_crosses_two_switch_levels():
    links, hops = _tree().route("host-0", "host-2")
    assert hops == 2
    assert len(links) == 4


def test_rack_lookup():
    topo = _tree()
    assert topo.rack_of("host-0") == "tor-a"
    assert topo.rack_of("host-3") == "tor-b"


def test_routing_rejects_non_hosts_and_unknowns():
    topo = _tree()
    with pytest.raises(RoutingError):
        topo.route("host-0", "tor-a")
    with pytest.raises(RoutingError):
        topo.route("host-0", "host-9")


def test_disconnected_topology_is_detected():
    switches = [Switch("tor-a", SwitchLevel.TOR), Switch("tor-b", SwitchLevel.TOR)]
    links = [Link("host-0", "tor-a", 1e9), Link("host-1", "tor-b", 1e9)]
    topo = NetworkTopology(["host-0", "host-1"], switches, links)
    assert not topo.is_connected()
    with pytest.raises(RoutingError):
        topo.route("host-0", "host-1")


def test_link_endpoints_must_exist():
    with pytest.raises(ValueError):
        NetworkTopology(["host-0"], [], [Link("host-0", "ghost", 1e9)])


def test_fair_share_splits_evenly():
    assert fair_share(1e9, 1) == 1e9
    assert fair_share(1e9, 2) == 5e8
    assert fair_share(1e9, 4) == 2.5e8
    with pytest.raises(ValueError):
        fair_share(1e9, 0)


class _Driver(SimEntity):
    """Starts planned transfers at fixed times inside a simulation."""

    def __init__(self, flows, plan):
        super().__init__("driver")
        self.flows = flows
        self.plan = plan

    def start(self):
        (self.go,) = self.sim.tags.register_namespace("driver", ["GO"])
        for index, item in enumerate(self.plan):
            self.schedule(item[0], self.id, self.go, index)

    def process_event(self, event):
        _, src, dst, payload = self.plan[event.payload]
        self.flows.start_transfer(src, dst, payload, f"tx-{event.payload}",
                                  f"rx-{event.payload}")


def _run_plan(plan, topology=None, overhead_s=0.0):
    """Run transfers and return {plan index: delivery time}."""
    topology = topology or _tree()
    sim = Simulation()
    hosts = {
        host_id: Host(HostSpec(host_id, 2.6e9, 3.0, CoreAttributes(1, 7800.0, 16384, 1e9)))
        for host_id in topology.host_ids
    }
    guests = {}
    for host_id, host in hosts.items():
        guest = Guest(GuestSpec(f"vm-{host_id}", GuestKind.VM,
                                CoreAttributes(1, 7800.0, 4096, 1e9), overhead_s))
        place_guest(host, guest)
        guests[host_id] = guest
    flows = FlowManager(topology)
    flows.attach(sim)
    deliveries = {}
    flows.deliver_callback = lambda tr: deliveries.__setitem__(
        int(tr.src_cloudlet_id.split("-")[1]), tr.delivered_at)
    resolved = [(t, guests[src], guests[dst], payload) for t, src, dst, payload in plan]
    sim.add_entity(_Driver(flows, resolved))
    sim.run()
    return deliveries


def test_gigabyte_inside_rack_takes_sixteen_seconds():
    deliveries = _run_plan([(0.0, "host-0", "host-1", GB)])
    assert deliveries[0] == pytest.approx(16.0, abs=1e-9)


def test_gigabyte_across_racks_takes_thirty_two_seconds():
    deliveries = _run_plan([(0.0, "host-0", "host-2", GB)])
    assert deliveries[0] == pytest.approx(32.0, abs=1e-9)


def test_payload_sized_in_bytes_not_bits():
    # 1000 bytes = 8000 bits; two links at 1 gbit make 16 microseconds
    deliveries = _run_plan([(0.0, "host-0", "host-1", 1000)])
    assert deliveries[0] == pytest.approx(1.6e-5, rel=1e-9)


def test_same_host_transfer_is_immediate_and_free_of_overhead():
    deliveries = _run_plan([(1.5, "host-0", "host-0", GB)], overhead_s=5.0)
    assert deliveries[0] == pytest.approx(1.5, abs=0.0)


def test_stack_overhead_charged_once_per_endpoint():
    # 5 s to leave the sender's stack, 16 s on the wire, 5 s to land
    deliveries = _run_plan([(0.0, "host-0", "host-1", GB)], overhead_s=5.0)
    assert deliveries[0] == pytest.approx(26.0, abs=1e-9)


def test_switch_forwarding_delay_applies_between_links():
    deliveries = _run_plan([(0.0, "host-0", "host-1", GB)],
                           topology=_tree(tor_delay=0.5))
    assert deliveries[0] == pytest.approx(16.5, abs=1e-9)


def test_concurrent_transfers_halve_the_link_rate():
    """Two identical flows over the same path finish in double time."""
    deliveries = _run_plan([
        (0.0, "host-0", "host-1", GB),
        (0.0, "host-0", "host-1", GB),
    ])
    assert deliveries[0] == pytest.approx(32.0, abs=1e-6)
    assert deliveries[1] == pytest.approx(32.0, abs=1e-6)


def test_share_recomputes_when_flows_come_and_go():
    """A late second flow slows the first, then speeds back up.

    Flow A moves 1 GB from host-0 to host-1. Flow B starts 4 s later on
    the same path. Working through the share changes link by link puts
    A's delivery at 24 s and B's at 28 s.
    """
    deliveries = _run_plan([
        (0.0, "host-0", "host-1", GB),
        (4.0, "host-0", "host-1", GB),
    ])
    assert deliveries[0] == pytest.approx(24.0, abs=1e-6)
    assert deliveries[1] == pytest.approx(28.0, abs=1e-6)


def test_deadline_comparison_is_inclusive():
    met = ActivationRecord(0, release_s=0.0, finish_s=44.564, deadline_s=90.0)
    assert check_deadline(met) is DeadlineOutcome.MET
    exact = ActivationRecord(1, release_s=10.0, finish_s=100.0, deadline_s=90.0)
    assert check_deadline(exact) is DeadlineOutcome.MET  # makespan == deadline
    late = ActivationRecord(2, release_s=0.0, finish_s=90.000001, deadline_s=90.0)
    assert check_deadline(late) is DeadlineOutcome.MISSED


def test_deadline_needs_a_finished_record_and_a_deadline():
    with pytest.raises(ValueError):
        check_deadline(ActivationRecord(0, release_s=0.0, deadline_s=90.0))
    with pytest.raises(ValueError):
        check_deadline(ActivationRecord(0, release_s=0.0, finish_s=5.0))
