"""Helpers shared across test modules."""

from __future__ import annotations

from vdcsim import NO_NEXT_EVENT, SchedulerContext


def settle(scheduler, mips_share, on_send=None, start=0.0, limit=10_000):
    """Step a scheduler until it goes idle; return the finish time.

    Repeatedly advances the clock to each estimated completion, the way
    the event loop would. Raises if the scheduler blocks forever or
    never settles.
    """
    t = start
    for _ in range(limit):
        ctx = SchedulerContext(time=t, on_send=on_send)
        estimate = scheduler.update_processing(t, mips_share, ctx)
        if estimate == 0.0:
            return t
        if estimate == NO_NEXT_EVENT:
            raise AssertionError(f"scheduler blocked at t={t}")
        t = max(t, estimate)
    raise AssertionError("scheduler did not settle within the step limit")
