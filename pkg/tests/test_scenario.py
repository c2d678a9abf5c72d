"""Scenario loading, validation, expansion, and assembly tests."""

import json
from pathlib import Path

import pytest

from vdcsim import (
    GuestKind,
    ScenarioParseError,
    ScenarioValidationError,
    build_simulation,
    load_scenario,
    oracle_rows,
    scenario_from_dict,
    scenario_to_dict,
    stack_overhead,
)

CASE_STUDY = Path(__file__).resolve().parent.parent / "scenarios" / "case_study.json"


def _case_study_dict():
    return json.loads(CASE_STUDY.read_text())


def test_shipped_scenario_loads():
    scenario = load_scenario(CASE_STUDY)
    assert scenario.name == "two-task-chain"
    assert scenario.hosts.count == 4
    assert scenario.hosts.mips_per_pe == 7800.0
    assert len(scenario.switches) == 3
    assert len(scenario.links) == 6
    assert scenario.deployment == ("V", "I")
    assert scenario.arrivals.count == 20
    assert scenario.source_digest is not None


def test_scenario_round_trips_through_its_dict_form():
    scenario = load_scenario(CASE_STUDY)
    assert scenario_from_dict(scenario_to_dict(scenario)) == scenario


def test_malformed_json_reports_line_and_column(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x",\n  "hosts": }\n')
    with pytest.raises(ScenarioParseError, match=r"line 2 column"):
        load_scenario(bad)
    empty = tmp_path / "empty.json"
    empty.write_text("")
    with pytest.raises(ScenarioParseError):
        load_scenario(empty)


def test_validation_collects_every_problem_at_once():
    data = _case_study_dict()
    data["hosts"]["count"] = 0                      # bad count
    data["hosts"]["ipc"] = -1                       # bad ipc
    data["workflow"]["tasks"] = []                  # no tasks
    data["arrivals"] = {"kind": "exponential", "count": 5}  # no mean or rate
    with pytest.raises(ScenarioValidationError) as err:
        scenario_from_dict(data)
    text = "\n".join(err.value.errors)
    assert len(err.value.errors) >= 4
    assert "count" in text and "ipc" in text
    assert "tasks" in text
    assert "mean_s" in text


def test_unknown_link_endpoint_is_reported():
    data = _case_study_dict()
    data["network"]["links"][0]["a"] = "host-99"
    with pytest.raises(ScenarioValidationError, match="host-99"):
        scenario_from_dict(data)


def test_deployment_and_explicit_guests_are_mutually_exclusive():
    data = _case_study_dict()
    data["guests"] = [{"id": "vm-0", "kind": "vm", "host": "host-0"}]
    data["placement"] = {"T0": "vm-0", "T1": "vm-0"}
    with pytest.raises(ScenarioValidationError, match="not both"):
        scenario_from_dict(data)


def test_placement_must_cover_every_task():
    data = _case_study_dict()
    del data["deployment"]
    data["guests"] = [{"id": "vm-0", "kind": "vm", "host": "host-0"}]
    data["placement"] = {"T0": "vm-0"}
    with pytest.raises(ScenarioValidationError, match="T1"):
        scenario_from_dict(data)


def test_rate_per_s_converts_to_a_mean():
    data = _case_study_dict()
    data["arrivals"] = {"kind": "exponential", "rate_per_s": 0.5, "count": 3}
    scenario = scenario_from_dict(data)
    assert scenario.arrivals.scale_s == pytest.approx(2.0)
    assert "rate_per_s" in scenario.arrivals.interpretation
    data["arrivals"]["mean_s"] = 2.0
    with pytest.raises(ScenarioValidationError, match="not both"):
        scenario_from_dict(data)


def _built(virt, placement_cfg, overhead=False):
    data = _case_study_dict()
    data["deployment"] = {"virt_config": virt, "placement_config": placement_cfg}
    data["overhead_enabled"] = overhead
    return build_simulation(scenario_from_dict(data), seed=1)


def test_single_stack_expansion_colocates_all_tasks():
    built = _built("V", "I")
    assert set(built.guests) == {"vm-0"}
    vm = built.guests["vm-0"]
    assert vm.kind is GuestKind.VM
    assert vm.physical_host().id == "host-0"


def test_same_rack_expansion_uses_rack_siblings():
    built = _built("C", "II")
    assert set(built.guests) == {"ct-0", "ct-1"}
    assert built.guests["ct-0"].physical_host().id == "host-0"
    assert built.guests["ct-1"].physical_host().id == "host-1"
    assert all(g.kind is GuestKind.CONTAINER for g in built.guests.values())


def test_cross_rack_expansion_spans_racks():
    built = _built("V", "III")
    hosts = {g.physical_host().id for g in built.guests.values()}
    assert hosts == {"host-0", "host-2"}


def test_nested_expansion_stacks_container_inside_vm():
    built = _built("N", "III", overhead=True)
    assert set(built.guests) == {"vm-0", "ct-0", "vm-1", "ct-1"}
    ct = built.guests["ct-0"]
    assert ct.host_ref is built.guests["vm-0"]
    assert stack_overhead(ct) == 8.0  # 3 for the container, 5 for the vm


def test_overhead_toggle_zeroes_the_stack():
    built = _built("N", "III", overhead=False)
    assert stack_overhead(built.guests["ct-0"]) == 0.0


def test_seed_override_beats_the_file_seed():
    scenario = load_scenario(CASE_STUDY)
    assert build_simulation(scenario).metadata["seed"] == 1  # from the file
    assert build_simulation(scenario, seed=9).metadata["seed"] == 9


def test_metadata_describes_the_run():
    built = _built("V", "II")
    meta = built.metadata
    assert meta["placement_config"] == "II"
    assert meta["virt_config"] == "V"
    assert meta["payload_bytes"] == 1_000_000_000
    assert meta["arrivals"]["kind"] == "exponential"
    assert "mean" in meta["arrivals"]["interpretation"]


def test_explicit_guest_mode_builds_and_runs():
    data = _case_study_dict()
    del data["deployment"]
    data["guests"] = [
        {"id": "outer", "kind": "vm", "host": "host-3", "ram_mb": 8192},
        {"id": "inner", "kind": "container", "parent": "outer", "ram_mb": 1024,
         "bw_bps": 1e8},
    ]
    data["placement"] = {"T0": "inner", "T1": "inner"}
    data["arrivals"] = {"kind": "fixed", "scale_s": 0.0, "count": 1}
    built = build_simulation(scenario_from_dict(data))
    built.sim.run()
    (record,) = built.broker.records
    assert record.makespan_s == pytest.approx(2 * 10_000.0 / 7800.0, abs=1e-9)
    assert built.metadata["placement_config"] == "explicit"


def test_oracle_grid_covers_the_full_matrix():
    scenario = load_scenario(CASE_STUDY)
    rows = oracle_rows(scenario)
    assert len(rows) == 3 * 3 * 2
    cell = {
        (r["virt_config"], r["placement_config"], r["payload_bytes"]): r for r in rows
    }
    assert cell[("V", "III", 1_000_000_000)]["switch_count"] == 2
    assert cell[("V", "III", 1_000_000_000)]["makespan_s"] == pytest.approx(34.564103, abs=1e-3)
    assert cell[("V", "I", 1)]["switch_count"] == 0
