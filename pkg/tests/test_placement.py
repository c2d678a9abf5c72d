"""Selection and allocation policy tests."""

import pytest

from vdcsim import (
    AllocationError,
    AllocationPolicy,
    CoreAttributes,
    FirstFit,
    Guest,
    GuestKind,
    GuestSpec,
    Host,
    HostSpec,
    LeastDemanding,
    MostDemanding,
    SeededRandom,
    place_guest,
    select_for_migration,
)


def _host(host_id, mips=7800.0, pes=1, ram=16384, bw=1e9, rack=None):
    spec = HostSpec(host_id, 2.6e9, 3.0, CoreAttributes(pes, mips, ram, bw))
    return Host(spec, rack=rack)


def _guest(guest_id, mips=1000.0, ram=1024, bw=1e8):
    return Guest(GuestSpec(guest_id, GuestKind.VM, CoreAttributes(1, mips, ram, bw)))


def test_first_fit_takes_the_first_host_with_room():
    hosts = [_host("host-0", ram=512), _host("host-1"), _host("host-2")]
    policy = AllocationPolicy(FirstFit(), hosts)
    chosen = policy.allocate(_guest("vm-0"))  # host-0 lacks ram
    assert chosen.id == "host-1"
    chosen = policy.allocate(_guest("vm-1"))
    assert chosen.id == "host-1"  # still fits, still first


def test_allocation_fails_when_nothing_fits():
    hosts = [_host("host-0", ram=512)]
    policy = AllocationPolicy(FirstFit(), hosts)
    with pytest.raises(AllocationError):
        policy.allocate(_guest("vm-0", ram=1024))


def test_seeded_random_is_reproducible():
    hosts_a = [_host(f"host-{i}") for i in range(8)]
    hosts_b = [_host(f"host-{i}") for i in range(8)]
    picks_a = [AllocationPolicy(SeededRandom(99), hosts_a).allocate(_guest(f"vm-{i}")).id
               for i in range(4)]
    picks_b = [AllocationPolicy(SeededRandom(99), hosts_b).allocate(_guest(f"vm-{i}")).id
               for i in range(4)]
    assert picks_a == picks_b
    assert AllocationPolicy(SeededRandom(7), hosts_a).allocate(_guest("vm-x")).id \
        != "" # a pick always lands somewhere


def test_demand_policies_rank_by_capacity_with_id_tiebreak():
    small = _host("b-small", mips=1000.0)
    big = _host("a-big", mips=9000.0)
    twin = _host("c-small", mips=1000.0)
    hosts = [small, big, twin]
    assert AllocationPolicy(MostDemanding(), hosts).allocate(_guest("vm-0")).id == "a-big"
    # both smalls tie; the lexically lowest id wins
    assert AllocationPolicy(LeastDemanding(), hosts).allocate(_guest("vm-1")).id == "b-small"


def test_exclusion_and_constraint_narrow_the_pool():
    rack_a = [_host("host-0", rack="rack-a"), _host("host-1", rack="rack-a")]
    rack_b = [_host("host-2", rack="rack-b")]
    hosts = rack_a + rack_b
    policy = AllocationPolicy(FirstFit(), hosts)
    first = policy.allocate(_guest("vm-0"))
    assert first.id == "host-0"
    # anti-affinity: refuse the sibling's host
    second = policy.allocate(_guest("vm-1"), excluded=(first,))
    assert second.id == "host-1"
    # constraint: only hosts outside rack-a are admissible
    third = policy.allocate(_guest("vm-2"), constraint=lambda h: h.rack != "rack-a")
    assert third.id == "host-2"
    with pytest.raises(AllocationError):
        policy.allocate(_guest("vm-3"), constraint=lambda h: h.rack == "rack-a",
                        excluded=tuple(rack_a))


def test_allocation_and_migration_share_one_selection_path():
    """Both flows go through select, visible in the shared call counter."""
    selection = MostDemanding()
    host = _host("host-0", pes=4, mips=7800.0)
    policy = AllocationPolicy(selection, [host])
    policy.allocate(_guest("vm-0", mips=2000.0))
    policy.allocate(_guest("vm-1", mips=500.0))
    assert selection.select_calls == 2
    victim = select_for_migration(selection, host)
    assert victim.id == "vm-0"  # the most demanding guest moves first
    assert selection.select_calls == 3
    other = select_for_migration(selection, host, excluded=(victim,))
    assert other.id == "vm-1"
    assert selection.select_calls == 4


def test_migration_from_empty_host_returns_none():
    selection = FirstFit()
    host = _host("host-0")
    assert select_for_migration(selection, host) is None
    guest = _guest("vm-0")
    place_guest(host, guest)
    assert select_for_migration(selection, host, excluded=(guest,)) is None
