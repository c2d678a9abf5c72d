"""Candidate selection and guest-to-host allocation.

One selection primitive serves every placement decision. Picking a host
for a new guest and picking a guest to migrate off a host both funnel
through ``SelectionPolicy.select``, so a policy written once applies to
both directions; the base class counts calls so the unification is
checkable from tests.
"""

from __future__ import annotations

import random
from typing import Callable, Iterable, Sequence

from .resources import Guest, Host, place_guest

__all__ = [
    "AllocationError",
    "AllocationPolicy",
    "FirstFit",
    "LeastDemanding",
    "MostDemanding",
    "SeededRandom",
    "SelectionPolicy",
    "select_for_migration",
]


class AllocationError(RuntimeError):
    """No admissible host could be found for a guest."""


class SelectionPolicy:
    """Deterministic pick among candidates.

    ``select`` filters out excluded candidates, applies the optional
    admissibility predicate carried in ``context``, and delegates the
    final choice to the policy. It returns None only when no candidate
    is admissible, and its result is a pure function of the candidate
    order, the context, the exclusions and the policy configuration.
    """

    name = "base"

    def __init__(self) -> None:
        self.select_calls = 0

    def select(
        self,
        candidates: Sequence,
        context: Callable[[object], bool] | None = None,
        excluded: Iterable = (),
    ):
        self.select_calls += 1
        excluded = set(id(obj) for obj in excluded)
        pool = [c for c in candidates if id(c) not in excluded]
        if context is not None:
            pool = [c for c in pool if context(c)]
        if not pool:
            return None
        return self._choose(pool)

    def _choose(self, pool: list):
        raise NotImplementedError


class FirstFit(SelectionPolicy):
    """First admissible candidate in the given order."""

    name = "first_fit"

    def _choose(self, pool: list):
        return pool[0]


class SeededRandom(SelectionPolicy):
    """Uniform pick driven entirely by the construction seed.

    The generator is reseeded on every call, so the same pool always
    yields the same pick regardless of call history.
    """

    name = "seeded_random"

    def __init__(self, seed: int) -> None:
        super().__init__()
        self.seed = seed

    def _choose(self, pool: list):
        return pool[random.Random(self.seed).randrange(len(pool))]


def _requested_mips(candidate) -> float:
    return candidate.spec.core.total_mips


class _ScoreBased(SelectionPolicy):
    """Best candidate under a score; ties break to the lowest id."""

    def __init__(self, score: Callable[[object], float], prefer_high: bool) -> None:
        super().__init__()
        self._score = score
        self._prefer_high = prefer_high

    def _choose(self, pool: list):
        best = pool[0]
        best_score = self._score(best)
        for candidate in pool[1:]:
            score = self._score(candidate)
            if score == best_score:
                if candidate.id < best.id:
                    best = candidate
            elif (score > best_score) is self._prefer_high:
                best = candidate
                best_score = score
        return best


class MostDemanding(_ScoreBased):
    """Candidate requesting the most MIPS (ties to the lowest id)."""

    name = "most_demanding"

    def __init__(self) -> None:
        super().__init__(_requested_mips, prefer_high=True)


class LeastDemanding(_ScoreBased):
    """Candidate requesting the least MIPS (ties to the lowest id)."""

    name = "least_demanding"

    def __init__(self) -> None:
        super().__init__(_requested_mips, prefer_high=False)


class AllocationPolicy:
    """Places guests on hosts using a selection policy.

    Admissibility for allocation is capacity fit across every ledger
    dimension, optionally narrowed by a caller-supplied constraint
    (anti-affinity and the like). The host pick goes through the same
    ``select`` call used for migration source selection.
    """

    def __init__(self, selection: SelectionPolicy, hosts: Sequence[Host]) -> None:
        self.selection = selection
        self.hosts = list(hosts)

    def allocate(
        self,
        guest: Guest,
        constraint: Callable[[Host], bool] | None = None,
        excluded: Iterable[Host] = (),
    ) -> Host:
        excluded = list(excluded)

        def admissible(host: Host) -> bool:
            if host.capacity_shortfall(guest.spec.core) is not None:
                return False
            return constraint is None or constraint(host)

        host = self.selection.select(self.hosts, context=admissible, excluded=excluded)
        if host is None:
            raise AllocationError(
                f"no admissible host for guest {guest.id!r} "
                f"({len(self.hosts)} candidates, {len(excluded)} excluded)"
            )
        place_guest(host, guest)
        return host


def select_for_migration(
    policy: SelectionPolicy,
    host: Host | Guest,
    excluded: Iterable[Guest] = (),
) -> Guest | None:
    """Pick which guest to migrate off ``host``; None when it hosts none
    outside the exclusions."""
    return policy.select(host.guests, excluded=excluded)
