"""Transmission graphs, sequence routes and the circle timetable.

Participants are numbered ``0..n-1`` and sequences travel in increasing index
direction. A route lists who holds a traveling half in each period; the
sequence is back with its owner in the period after its last hop.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

from .errors import StructuralError


class Kind(enum.Enum):
    COMPLETE = "complete"
    CIRCLE = "circle"
    HALF_CIRCLE = "half-circle"
    TREE = "tree"


@dataclass(frozen=True)
class Route:
    owner: int
    hops: tuple[int, ...]
    label: str

    @property
    def home_period(self) -> int:
        return len(self.hops) + 1

    def holder(self, period: int) -> int:
        if not 1 <= period <= self.home_period:
            raise StructuralError(f"period {period} outside 1..{self.home_period} for {self.label}")
        return self.owner if period == self.home_period else self.hops[period - 1]

    def sender(self, period: int) -> int:
        """Who handed the sequence to the period-``period`` holder."""
        return self.owner if period == 1 else self.hops[period - 2]


@dataclass(frozen=True)
class Topology:
    kind: Kind
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise StructuralError(f"need at least 3 participants, got {self.n}")

    def routes(self) -> list[Route]:
        n = self.n
        if self.kind is Kind.CIRCLE:
            return [Route(i, tuple((i + k) % n for k in range(1, n)), f"S{i}") for i in range(n)]
        if self.kind is Kind.HALF_CIRCLE:
            first, second = half_circle_split(n)
            routes = []
            for i in range(n):
                routes.append(Route(i, tuple((i + k) % n for k in range(1, first + 1)), f"S{i}a"))
                routes.append(Route(i, tuple((i - k) % n for k in range(1, second + 1)), f"S{i}b"))
            return routes
        if self.kind is Kind.COMPLETE:
            # two-way: S_{i->j} visits j once, j encodes, and it comes home
            return [Route(i, (j,), f"S{i}>{j}") for i in range(n) for j in range(n) if j != i]
        raise StructuralError("the tree topology carries GHZ shots, not routed sequences")

    def periods(self) -> int:
        return max(r.home_period for r in self.routes())

    def edges(self) -> set[tuple[int, int]]:
        """Directed quantum-transmission edges."""
        if self.kind is Kind.TREE:
            return {(0, j) for j in range(1, self.n)}
        out = set()
        for route in self.routes():
            stops = (route.owner, *route.hops, route.owner)
            out.update(zip(stops, stops[1:]))
        return out


def half_circle_split(n: int) -> tuple[int, int]:
    """Hop counts of the clockwise and counter-clockwise half sequences."""
    return n // 2, (n - 1) // 2


@dataclass(frozen=True)
class CircleSchedule:
    """Who holds each traveling half in each of the ``n`` circle periods."""

    n: int

    def holder(self, owner: int, period: int) -> int:
        if not 0 <= owner < self.n:
            raise StructuralError(f"owner {owner} out of range")
        if not 1 <= period <= self.n:
            raise StructuralError(f"period {period} outside 1..{self.n}")
        return (owner + period) % self.n

    def held_by(self, participant: int, period: int) -> int:
        """Owner of the sequence ``participant`` holds in ``period``."""
        return (participant - period) % self.n


def holder(schedule: CircleSchedule, owner: int, period: int) -> int:
    return schedule.holder(owner, period)


def validate_positions(n: int, positions: Iterable[int]) -> list[int]:
    positions = list(positions)
    if not positions:
        raise StructuralError("position set is empty")
    if len(set(positions)) != len(positions):
        raise StructuralError(f"duplicate positions in {positions}")
    bad = [p for p in positions if not 0 <= p < n]
    if bad:
        raise StructuralError(f"positions {bad} outside 0..{n - 1}")
    return sorted(positions)


def circular_gaps(n: int, positions: Iterable[int]) -> list[int]:
    """Hop counts from each position to the next one around the circle.

    >>> circular_gaps(7, [1, 5])
    [4, 3]
    """
    ordered = validate_positions(n, positions)
    return [(ordered[(k + 1) % len(ordered)] - p) % n or n for k, p in enumerate(ordered)]


def within_half_circle(n: int, positions: Iterable[int]) -> bool:
    """True when every position fits on one arc of at most ``n/2`` hops.

    This is the discrete "minor arc" test used for the half-circle attack; an
    arc of exactly half the circle counts, because colluders spread over
    such an arc still learn the key too late to steer every owner.
    """
    gaps = circular_gaps(n, positions)
    return 2 * (n - max(gaps)) <= n
