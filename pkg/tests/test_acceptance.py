"""Acceptance suite: eleven checks that pin the simulator's behavior.

Each test prints one PASS/FAIL line (visible with ``pytest -v -s`` or in
the captured output of a failing run) and asserts the same condition.
"""

import json
import math
import random
import statistics
import time
from pathlib import Path

import pytest

from vdcsim import (
    Cloudlet,
    Event,
    EventTag,
    FutureEventQueue,
    PowerModel,
    SpaceSharedScheduler,
    TimeSharedScheduler,
    build_simulation,
    energy_between,
    mips_from_clock,
    scenario_from_dict,
    uncontended_makespan,
)
from vdcsim.cli import main as cli_main

CASE_STUDY = Path(__file__).resolve().parent.parent / "scenarios" / "case_study.json"
MIPS = 7800.0
GB = 1_000_000_000


def _report(number, ok, detail):
    print(f"ACCEPTANCE {number:02d} {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


def _base_dict():
    return json.loads(CASE_STUDY.read_text())


def _run_once(virt, placement, overhead, payload, seed=1, count=1, mean_s=None):
    """Makespans for one deployment cell of the standard scenario."""
    data = _base_dict()
    data["deployment"] = {"virt_config": virt, "placement_config": placement}
    data["overhead_enabled"] = overhead
    data["workflow"]["edges"][0]["payload_bytes"] = payload
    if count == 1:
        data["arrivals"] = {"kind": "fixed", "scale_s": 0.0, "count": 1}
    else:
        data["arrivals"] = {"kind": "exponential", "mean_s": mean_s,
                            "count": count, "seed": seed}
    built = build_simulation(scenario_from_dict(data), seed=seed)
    built.sim.run()
    records = sorted(built.broker.records, key=lambda r: r.activation_id)
    assert len(records) == count
    return [r.makespan_s for r in records]


def test_criterion_01_mips_value_is_exact():
    value = mips_from_clock(2.6e9, 3)
    _report(1, value == 7800.0, f"mips(2.6 GHz, ipc 3) == {value!r}, expected 7800.0 exactly")


def test_criterion_02_single_activation_grid_without_overhead():
    expected = {"I": 2.564, "II": 18.564, "III": 34.564}
    got = {cfg: _run_once("V", cfg, False, GB)[0] for cfg in expected}
    ok = all(abs(got[cfg] - expected[cfg]) <= 1e-3 for cfg in expected)
    _report(2, ok, "no-overhead 1 GB makespans I/II/III = "
            + "/".join(f"{got[c]:.6f}" for c in ("I", "II", "III"))
            + " vs 2.564/18.564/34.564 (tol 1e-3)")


def test_criterion_03_negligible_payload_overhead_grid():
    expected = {"V": 12.564, "C": 8.564, "N": 18.564}
    results = {}
    ok = True
    for virt, target in expected.items():
        for cfg in ("II", "III"):
            value = _run_once(virt, cfg, True, 1)[0]
            results[f"{virt}/{cfg}"] = value
            ok = ok and abs(value - target) <= 1e-3
    unchanged = _run_once("V", "I", True, 1)[0]
    ok = ok and abs(unchanged - 2.564) <= 1e-3
    _report(3, ok, "1 B overhead-on makespans "
            + ", ".join(f"{k}={v:.6f}" for k, v in results.items())
            + f", I={unchanged:.6f} (tol 1e-3)")


def test_criterion_04_full_payload_overhead_grid():
    expected = {("V", "II"): 28.564, ("V", "III"): 44.564,
                ("C", "II"): 24.564, ("C", "III"): 40.564,
                ("N", "II"): 34.564, ("N", "III"): 50.564}
    got = {key: _run_once(key[0], key[1], True, GB)[0] for key in expected}
    ok = all(abs(got[key] - expected[key]) <= 1e-3 for key in expected)
    _report(4, ok, "1 GB overhead-on grid "
            + ", ".join(f"{v}/{c}={got[(v, c)]:.3f}" for v, c in expected))


def test_criterion_05_simulation_matches_closed_form_everywhere():
    overheads = {"V": 5.0, "C": 3.0, "N": 8.0}
    switches = {"I": 0, "II": 1, "III": 2}
    worst = 0.0
    cells = 0
    for overhead_on in (False, True):
        for payload in (1, GB):
            for virt in ("V", "C", "N"):
                for cfg in ("I", "II", "III"):
                    simulated = _run_once(virt, cfg, overhead_on, payload)[0]
                    o = overheads[virt] if overhead_on else 0.0
                    predicted = uncontended_makespan(
                        [10_000.0, 10_000.0], MIPS, o, switches[cfg], payload, 1e9)
                    worst = max(worst, abs(simulated - predicted))
                    cells += 1
    ok = worst <= 1e-3
    _report(5, ok, f"simulated vs closed-form across {cells} cells, "
            f"max |diff| = {worst:.3e} (tol 1e-3)")


def test_criterion_06_contention_raises_the_colocated_median():
    # Known red, kept honest rather than tuned to pass. One activation
    # demands 2.564 s of CPU from the co-located guest while arrivals are
    # spaced 2.564 s apart on average, so Configuration I runs at critical
    # utilization and its queue grows over the run. Across 100 seeds the
    # median excess is ~170% (minimum 36%, only 2 seeds at or below 40%),
    # so the 10-40% target band cannot be met by any seed selection. The
    # qualitative property, contention raising the co-located median on
    # every seed, does hold. Full analysis lives outside the repo in the
    # build notes.
    seeds = range(1, 16)
    excesses = []
    per_seed_ok = True
    for seed in seeds:
        shared = dict(seed=seed, count=20, mean_s=2.564)
        median_one = statistics.median(_run_once("V", "I", False, 0, **shared))
        median_two = statistics.median(_run_once("V", "II", False, 0, **shared))
        median_three = statistics.median(_run_once("V", "III", False, 0, **shared))
        per_seed_ok = (per_seed_ok and median_one > median_two
                       and median_one > median_three)
        excesses.append(median_one / median_two - 1.0)
    middle = statistics.median(excesses)
    ok = per_seed_ok and 0.10 <= middle <= 0.40
    _report(6, ok, f"colocated median exceeds spread-out medians on all "
            f"{len(excesses)} seeds: {per_seed_ok}; median excess "
            f"{middle:.1%} within [10%, 40%]: {0.10 <= middle <= 0.40} "
            f"(colocated guest runs at critical load, see test comment)")


def test_criterion_07_network_configs_agree_under_negligible_payload():
    identical = True
    for seed in (1, 2, 3):
        shared = dict(seed=seed, count=20, mean_s=2.564)
        two = _run_once("V", "II", False, 0, **shared)
        three = _run_once("V", "III", False, 0, **shared)
        identical = identical and two == three
    # with a 1-byte payload the distinction is nanoseconds, not zero
    near_two = _run_once("V", "II", False, 1, seed=1, count=20, mean_s=2.564)
    near_three = _run_once("V", "III", False, 1, seed=1, count=20, mean_s=2.564)
    nearly = max(abs(a - b) for a, b in zip(near_two, near_three)) <= 1e-6
    ok = identical and nearly
    _report(7, ok, f"per-activation makespans II == III exactly at zero payload "
            f"over 3 seeds: {identical}; within 1e-6 at 1 byte: {nearly}")


# -- criterion 8: independent time-stepped oracle ----------------------------


def _oracle_finish_times(policy, pe_mips, jobs, dt=1e-3):
    """Brute-force fluid schedule, integrated step by step.

    Re-derives both policies with flat lists and no event queue. Within
    each dt window the integrator splits at completions, so its error
    against the true fluid model is rounding-level while the code path
    stays simulator-free.
    """
    n = len(jobs)
    remaining = [length for length, _ in jobs]
    finish = [math.inf] * n
    queue = list(range(n))
    running = {}
    free = sorted(range(len(pe_mips)))

    def admit():
        while queue:
            need = jobs[queue[0]][1]
            if policy == "space" and need <= len(free):
                job = queue.pop(0)
                running[job] = [free.pop(0) for _ in range(need)]
            elif policy == "time":
                running[queue.pop(0)] = None
            else:
                break

    def alloc(job):
        if policy == "space":
            return sum(pe_mips[p] for p in running[job])
        share = sum(pe_mips) / len(running)
        return min(share, jobs[job][1] * max(pe_mips))

    admit()
    t = 0.0
    while running:
        window = dt
        while window > 1e-15 and running:
            rates = {job: alloc(job) for job in running}
            horizon = min(remaining[job] / rates[job] for job in running)
            step = min(window, horizon)
            for job, rate in rates.items():
                remaining[job] -= rate * step
            t += step
            window -= step
            done = [job for job in running if remaining[job] <= 1e-12]
            for job in done:
                finish[job] = t
                pes = running.pop(job)
                if pes is not None:
                    free.extend(pes)
            if done:
                free.sort()
                admit()
    return finish


def test_criterion_08_event_driven_matches_time_stepped_oracle():
    rng = random.Random(1234)
    worst = 0.0
    for _ in range(200):
        policy = rng.choice(["time", "space"])
        pe_mips = tuple(rng.uniform(5.0, 20.0) for _ in range(rng.randint(1, 3)))
        jobs = [
            (rng.uniform(0.5, 30.0), rng.randint(1, len(pe_mips)))
            for _ in range(rng.randint(1, 5))
        ]
        sched = TimeSharedScheduler() if policy == "time" else SpaceSharedScheduler()
        sched.set_share(pe_mips)
        cloudlets = [Cloudlet(f"c{i}", length, pes_required=need)
                     for i, (length, need) in enumerate(jobs)]
        for cl in cloudlets:
            sched.submit(cl, 0.0)
        t = 0.0
        for _ in range(10_000):
            est = sched.update_processing(t, pe_mips)
            if est == 0.0:
                break
            t = est
        else:
            raise AssertionError("event-driven schedule never drained")
        event_driven = [cl.finish_time for cl in cloudlets]
        oracle = _oracle_finish_times(policy, pe_mips, jobs)
        worst = max(worst, max(abs(a - b) for a, b in zip(event_driven, oracle)))
    ok = worst <= 2e-3
    _report(8, ok, f"200 randomized instances, max |finish diff| = {worst:.3e} "
            "(tol 2e-3)")


def test_criterion_09_queue_orders_hundred_thousand_events():
    def drain(seed):
        queue = FutureEventQueue()
        rng = random.Random(seed)
        tag = EventTag("bench", "TICK")
        for seq in range(100_000):
            # coarse times force plenty of exact ties
            queue.push(Event(time=rng.randint(0, 999) / 10.0, seq=seq,
                             source=0, dest=0, tag=tag))
        popped = [queue.pop() for _ in range(100_000)]
        return [(event.time, event.seq) for event in popped]

    first = drain(42)
    ordered = all(a <= b for a, b in zip(first, first[1:]))
    fifo = all(a[1] < b[1] for a, b in zip(first, first[1:]) if a[0] == b[0])
    deterministic = first == drain(42)
    ok = ordered and fifo and deterministic
    _report(9, ok, f"100k events: sorted={ordered}, fifo-on-ties={fifo}, "
            f"repeatable={deterministic}")


def test_criterion_10_cli_output_is_byte_identical(tmp_path):
    outs = []
    for run in (1, 2):
        path = tmp_path / f"run-{run}.csv"
        code = cli_main(["--scenario", str(CASE_STUDY), "--seed", "11",
                         "--output", str(path)])
        assert code == 0
        outs.append(path.read_bytes())
    ok = outs[0] == outs[1]
    _report(10, ok, f"two cli runs, identical bytes: {ok} ({len(outs[0])} bytes)")


def test_criterion_11_energy_matches_the_analytic_integral():
    model = PowerModel(100.0, 250.0)
    rng = random.Random(77)
    bounds = sorted(rng.uniform(0.0, 500.0) for _ in range(41))
    samples = [(a, b, rng.random()) for a, b in zip(bounds, bounds[1:])]
    t0, t1 = bounds[0], bounds[-1]
    measured = energy_between(model, t0, t1, samples)
    # independent form: idle energy for the whole window plus the
    # utilization-weighted dynamic term
    analytic = 100.0 * (t1 - t0) + (250.0 - 100.0) * math.fsum(
        u * (b - a) for a, b, u in samples)
    rel = abs(measured - analytic) / analytic
    ok = rel <= 1e-9
    _report(11, ok, f"energy {measured:.6f} J vs analytic {analytic:.6f} J, "
            f"relative error {rel:.2e} (tol 1e-9)")


def test_case_study_wall_clock_note():
    """Non-binding: the 20-activation case study should be quick."""
    started = time.perf_counter()
    _run_once("V", "III", True, GB, seed=1, count=20, mean_s=2.564)
    elapsed = time.perf_counter() - started
    print(f"NOTE - 20-activation case study simulated in {elapsed:.3f} s "
          "(non-binding, expected well under 1 s)")
