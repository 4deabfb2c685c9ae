"""Collusive attacks on route-based MQKA protocols and the tree protocol.

Key stealing: in period 1 every colluder-owned sequence has its retained half
and initial-state descriptor handed to the first colluder on its route. When
the sequence reaches that colluder it is measured, which yields the XOR of the
honest keys encoded along the way, and a fresh pair is sent on in its place.
Partials travel between colluders instantly; once they cover every honest
participant the colluders know the legal final key.

Key flipping: afterwards, for every honest owner one colluder that still
legitimately receives one of the owner's sequences encodes a forged key in
place of its own. That is an ordinary encoding, so no decoy is disturbed.
"""

from __future__ import annotations

import enum
import itertools
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import FeasibilityError, ProtocolViolation, StructuralError
from .keycore import Key, forged_key, xor_fold
from .protocols import (
    Behavior,
    DetectionEvent,
    GHZRegister,
    RouteEngine,
    RunOutcome,
    Verdict,
    classify,
    random_chooser,
    tree_detection,
    tree_keys,
)
from .toyquantum import generate_pair
from .topology import Kind, Route, Topology, circular_gaps, validate_positions


class Variant(enum.Enum):
    TWO_COLLUDER_CIRCLE = "two-colluder-circle"
    MULTI_COLLUDER_CIRCLE = "multi-colluder-circle"
    HALF_CIRCLE_THREE_COLLUDER = "half-circle-three-colluder"
    TREE_DETECTION_CHOICE = "tree-detection-choice"


class Fallback(enum.Enum):
    ABSTAIN = "abstain"
    BLIND_FLIP = "blind-flip"


@dataclass(frozen=True)
class AttackPlan:
    colluders: tuple[int, ...]
    expected: Key
    variant: Variant

    def __post_init__(self):
        if len(set(self.colluders)) < 2:
            raise StructuralError("a collusive plan needs at least two colluders")
        object.__setattr__(self, "colluders", tuple(sorted(set(self.colluders))))

    @classmethod
    def circle(cls, colluders: Iterable[int], expected: Key) -> AttackPlan:
        colluders = tuple(colluders)
        variant = Variant.TWO_COLLUDER_CIRCLE if len(set(colluders)) == 2 else Variant.MULTI_COLLUDER_CIRCLE
        return cls(colluders, expected, variant)


def feasible(n: int, colluders: Iterable[int]) -> bool:
    """Closed-form gap rule: every arc between adjacent colluders is at most floor((n+1)/2)."""
    return max(circular_gaps(n, colluders)) <= (n + 1) // 2


# --- scheduling ------------------------------------------------------------


def stealers(routes: Sequence[Route], colluders: Iterable[int]) -> dict[int, tuple[int, int]]:
    """For each colluder-owned route: the first colluder it reaches, and when."""
    colluders = set(colluders)
    out = {}
    for seq, route in enumerate(routes):
        if route.owner not in colluders:
            continue
        for period, visitor in enumerate(route.hops, start=1):
            if visitor in colluders:
                out[seq] = (visitor, period)
                break
    return out


def knowledge_period(routes: Sequence[Route], colluders: Iterable[int], n: int) -> int | None:
    """First period in which pooled partials cover every honest participant."""
    colluders = set(colluders)
    honest = set(range(n)) - colluders
    events = sorted(
        (period, seq) for seq, (_, period) in stealers(routes, colluders).items()
    )
    covered: set[int] = set()
    for period, seq in events:
        covered |= set(routes[seq].hops[: period - 1])
        if covered >= honest:
            return period
    return None if honest else 0


def candidate_flips(
    routes: Sequence[Route],
    colluders: Iterable[int],
    steal_period: int,
    policy: str = "earliest",
) -> tuple[dict[int, tuple[int, int]], list[int]]:
    """Pick one legitimate flip per honest owner at or after ``steal_period``.

    Returns ``(plan, uncovered)`` where ``plan`` maps a route index to
    ``(colluder, period)`` and ``uncovered`` lists honest owners with no
    opportunity.
    """
    if policy not in ("earliest", "latest"):
        raise StructuralError(f"unknown flip policy {policy!r}")
    colluders = set(colluders)
    options: dict[int, list[tuple[int, int, int]]] = {}
    for seq, route in enumerate(routes):
        if route.owner in colluders:
            continue
        options.setdefault(route.owner, [])
        for period in range(max(steal_period, 1), route.home_period):
            visitor = route.hops[period - 1]
            if visitor in colluders:
                options[route.owner].append((period, seq, visitor))
    plan, uncovered = {}, []
    for owner in sorted(options):
        found = options[owner]
        if not found:
            uncovered.append(owner)
            continue
        if policy == "earliest":
            period, seq, visitor = min(found)
        else:
            period, seq, visitor = max(found, key=lambda o: (o[0], -o[1]))
        plan[seq] = (visitor, period)
    return plan, uncovered


def plan_flips(
    routes: Sequence[Route], colluders: Iterable[int], steal_period: int, policy: str = "earliest"
) -> dict[int, tuple[int, int]]:
    plan, uncovered = candidate_flips(routes, colluders, steal_period, policy)
    if uncovered:
        raise FeasibilityError(f"no colluder receives the sequences of {uncovered} after period {steal_period}")
    return plan


def flip_schedule(
    n: int, colluders: Iterable[int], steal_period: int, policy: str = "earliest"
) -> dict[int, tuple[int, int]]:
    """Circle flip events keyed by sequence owner.

    Colluder-owned sequences map to ``(owner, n)``: the owner fixes them in
    its own final XOR.
    """
    colluders = validate_positions(n, colluders)
    routes = Topology(Kind.CIRCLE, n).routes()
    plan = plan_flips(routes, colluders, steal_period, policy)
    schedule = {routes[seq].owner: event for seq, event in plan.items()}
    for c in colluders:
        schedule[c] = (c, n)
    return dict(sorted(schedule.items()))


# --- collusion engine ------------------------------------------------------


class Collusion(Behavior):
    """Colluder behaviour for :class:`RouteEngine`."""

    def __init__(
        self,
        colluders: Iterable[int],
        expected: Key,
        policy: str = "earliest",
        fallback: Fallback = Fallback.ABSTAIN,
    ):
        self.colluders = tuple(sorted(set(colluders)))
        self.expected = expected
        self.policy = policy
        self.fallback = Fallback(fallback)
        self.steal: dict[int, tuple[int, int]] = {}
        self.partials: list[Key] = []
        self.covered: set[int] = set()
        self.final: Key | None = None
        self.known_at: int | None = None
        self.flips: dict[int, tuple[int, int]] = {}
        self.intercepts: dict[int, int] = {}
        self.uncovered: list[int] = []
        self.executed = False

    def setup(self, engine: RouteEngine) -> None:
        self.steal = stealers(engine.routes, self.colluders)
        for seq, (colluder, period) in sorted(self.steal.items()):
            engine.pairs[seq].give_home_half(colluder)
            engine.log(0, event="swap", sequence=engine.routes[seq].label, to=colluder)
        if len(self.colluders) == engine.n:
            self._learn(engine, 0)

    def after_receive(self, engine: RouteEngine, period: int, arrivals: list[int]) -> None:
        for seq in arrivals:
            if self.steal.get(seq, (None, None))[1] != period:
                continue
            colluder = self.steal[seq][0]
            route = engine.routes[seq]
            partial = engine.pairs[seq].joint_measure(colluder)
            arc = set(route.hops[: period - 1])
            engine.log(period, event="steal", sequence=route.label, by=colluder, covers=sorted(arc))
            # a fresh pair replaces the measured one so the next honest holder sees nothing odd
            fresh = generate_pair(route.owner, engine.length, engine.rng)
            fresh.holder = fresh.home_holder = colluder
            fresh.descriptor_known_by = {route.owner, colluder}
            engine.pairs[seq] = fresh
            if self.final is None and not (arc & self.covered):
                self.partials.append(partial)
                self.covered |= arc
        honest = set(range(engine.n)) - set(self.colluders)
        if self.final is None and self.covered >= honest:
            self._learn(engine, period)

    def _learn(self, engine: RouteEngine, period: int) -> None:
        own = [engine.keys[c] for c in self.colluders]
        self.final = xor_fold([*self.partials, *own])
        self.known_at = period
        engine.log(period, event="final-key-known", value=self.final.serialize())
        plan, self.uncovered = candidate_flips(engine.routes, self.colluders, period, self.policy)
        if not self.uncovered:
            self.flips = plan
            self.executed = True
        elif self.fallback is Fallback.BLIND_FLIP:
            self.flips = plan
            self.executed = True
            for owner in self.uncovered:
                for seq, route in enumerate(engine.routes):
                    if route.owner == owner and route.home_period > period:
                        self.intercepts[seq] = period
                        break
        for seq, (colluder, when) in sorted(self.flips.items()):
            engine.log(when, event="flip-planned", sequence=engine.routes[seq].label, by=colluder)

    def encoding(self, engine: RouteEngine, period: int, seq: int, holder: int) -> Key:
        if self.flips.get(seq) == (holder, period):
            engine.log(period, event="flip", sequence=engine.routes[seq].label, by=holder)
            return forged_key(engine.keys[holder], self.expected, self.final)
        return engine.keys[holder]

    def in_transit(self, engine: RouteEngine, period: int, seq: int, sender: int, receiver: int) -> None:
        if self.intercepts.get(seq) == period:
            engine.pairs[seq].blind_flip(self.expected ^ self.final)
            engine.log(period, event="blind-flip", sequence=engine.routes[seq].label, edge=[sender, receiver])

    def final_key(self, engine: RouteEngine, participant: int) -> Key | None:
        if participant not in self.colluders:
            return None
        if self.executed:
            return self.expected
        # stolen partials plus home measurements give the colluders the legal key
        return xor_fold(engine.keys)


def run_collusion(
    kind: Kind,
    n: int,
    keys: Sequence[Key],
    colluders: Iterable[int],
    expected: Key,
    decoys: int,
    rng: random.Random,
    policy: str = "earliest",
    fallback: Fallback | str = Fallback.ABSTAIN,
) -> RunOutcome:
    """Run the stealing/flipping attack on any routed topology; never raises on detection."""
    validate_positions(n, colluders)
    behavior = Collusion(colluders, expected, policy, Fallback(fallback))
    engine = RouteEngine(Topology(kind, n), keys, decoys, rng, behavior)
    outcome = engine.run(raise_on_detection=False)
    outcome.info.update(
        {
            "colluders": list(behavior.colluders),
            "final_key_known_at": behavior.known_at,
            "legal_final_key": xor_fold(keys).serialize(),
            "flips": {engine.routes[s].label: list(e) for s, e in sorted(behavior.flips.items())},
            "blind_flips": sorted(engine.routes[s].label for s in behavior.intercepts),
            "unreachable_owners": behavior.uncovered,
            "attack_executed": behavior.executed,
        }
    )
    return outcome


def run_collusive_circle(
    n: int,
    keys: Sequence[Key],
    plan: AttackPlan,
    length: int,
    decoys: int,
    rng: random.Random,
    policy: str = "earliest",
    fallback: Fallback | str = Fallback.ABSTAIN,
    force: bool = False,
) -> RunOutcome:
    """Collusive attack on the circle protocol.

    Infeasible plans raise :class:`FeasibilityError` unless ``force`` is set,
    in which case the colluders apply ``fallback`` to the owners they cannot
    reach in time.
    """
    if plan.variant not in (Variant.TWO_COLLUDER_CIRCLE, Variant.MULTI_COLLUDER_CIRCLE):
        raise StructuralError(f"{plan.variant.value} is not a circle attack")
    if plan.expected.length != length or any(k.length != length for k in keys):
        raise StructuralError(f"keys must be {length} bits long")
    if not force and not feasible(n, plan.colluders):
        raise FeasibilityError(
            f"gaps {circular_gaps(n, plan.colluders)} exceed {(n + 1) // 2} for n={n}"
        )
    return run_collusion(Kind.CIRCLE, n, keys, plan.colluders, plan.expected, decoys, rng, policy, fallback)


def run_halfcircle_attack(
    n: int,
    keys: Sequence[Key],
    plan: AttackPlan,
    rng: random.Random,
    decoys: int = 16,
    policy: str = "earliest",
) -> RunOutcome:
    """Same attack against the two-half-sequence variant; colluders abstain if they are too late."""
    return run_collusion(Kind.HALF_CIRCLE, n, keys, plan.colluders, plan.expected, decoys, rng, policy)


# --- single dishonest participant -----------------------------------------


class LoneAttacker(Behavior):
    """Strategies open to one dishonest participant acting alone.

    ``shift``: encode ``own ^ delta`` into every sequence it is handed.
    ``measure``: try to read every sequence it holds early, then act honestly.
    ``blind``: flip every honest sequence with ``delta`` while it travels
    between two other participants.
    """

    def __init__(self, attacker: int, strategy: str, delta: Key, expected: Key):
        if strategy not in ("shift", "measure", "blind"):
            raise StructuralError(f"unknown strategy {strategy!r}")
        self.attacker = attacker
        self.colluders = (attacker,)
        self.strategy = strategy
        self.delta = delta
        self.expected = expected
        self.readings: list[str] = []
        self.targets: set[int] = set()

    def after_receive(self, engine: RouteEngine, period: int, arrivals: list[int]) -> None:
        if self.strategy != "measure":
            return
        for seq in arrivals:
            route = engine.routes[seq]
            if route.holder(period) != self.attacker or route.owner == self.attacker:
                continue
            try:
                engine.pairs[seq].joint_measure(self.attacker)
                self.readings.append(route.label)
            except ProtocolViolation:
                engine.log(period, event="measure-refused", sequence=route.label, by=self.attacker)

    def encoding(self, engine: RouteEngine, period: int, seq: int, holder: int) -> Key:
        if holder == self.attacker and self.strategy == "shift":
            return engine.keys[holder] ^ self.delta
        return engine.keys[holder]

    def in_transit(self, engine: RouteEngine, period: int, seq: int, sender: int, receiver: int) -> None:
        route = engine.routes[seq]
        if self.strategy != "blind" or route.owner == self.attacker or route.owner in self.targets:
            return
        if self.attacker not in (sender, receiver):
            self.targets.add(route.owner)
            engine.pairs[seq].blind_flip(self.delta)
            engine.log(period, event="blind-flip", sequence=route.label, by=self.attacker)


def run_lone_attack(
    kind: Kind,
    n: int,
    keys: Sequence[Key],
    attacker: int,
    strategy: str,
    delta: Key,
    expected: Key,
    decoys: int,
    rng: random.Random,
) -> RunOutcome:
    behavior = LoneAttacker(attacker, strategy, delta, expected)
    engine = RouteEngine(Topology(kind, n), keys, decoys, rng, behavior)
    outcome = engine.run(raise_on_detection=False)
    outcome.info.update({"attacker": attacker, "strategy": strategy, "delta": delta.serialize(),
                         "early_readings": behavior.readings})
    return outcome


# --- tree type: detection bits chosen --------------------------------------


def choose_discards(
    bits: Sequence[int], count: int, expected: Key, rng: random.Random
) -> list[int]:
    """Indices (into ``bits``) to spend on detection so the leftovers start with ``expected``.

    A uniformly random choice is kept when it already works. Otherwise every
    choice is tried and the closest result wins, ties going to the
    lexicographically smallest index set.
    """
    k = expected.length
    if count < 0 or len(bits) - count < k:
        raise StructuralError(f"{len(bits)} shots minus {count} picks leaves fewer than {k} key bits")

    def result(discard: Sequence[int]) -> int:
        kept = [b for i, b in enumerate(bits) if i not in discard][:k]
        return int("".join(map(str, kept)), 2)

    guess = sorted(rng.sample(range(len(bits)), count))
    if result(guess) == expected.value:
        return guess
    best, best_distance = None, k + 1
    for combo in itertools.combinations(range(len(bits)), count):
        distance = bin(result(combo) ^ expected.value).count("1")
        if distance < best_distance:
            best, best_distance = list(combo), distance
            if distance == 0:
                break
    return best


def run_tree_attack(
    shots: int,
    key_bits: int,
    honest_picks: int,
    colluder_picks: int,
    expected: Key,
    rng: random.Random,
    n_parties: int = 3,
    colluders: Sequence[int] = (0, 2),
    register: GHZRegister | None = None,
    honest_choice: Sequence[int] | None = None,
) -> RunOutcome:
    """Honest parties pick detection shots first; the root then reads every
    remaining shot and the colluders pick theirs to spell ``expected``."""
    colluders = tuple(sorted(set(colluders)))
    if 0 not in colluders:
        raise StructuralError("the detection-choice attack needs the GHZ root among the colluders")
    honest = [p for p in range(n_parties) if p not in colluders]
    if colluder_picks < 1:
        raise StructuralError("colluders need at least one detection pick")
    if expected.length != key_bits:
        raise StructuralError(f"expected key must be {key_bits} bits")
    if shots - honest_picks * len(honest) - colluder_picks < key_bits:
        raise StructuralError(f"{shots} shots are too few for the picks and a {key_bits}-bit key")
    register = register or GHZRegister.prepare(n_parties, shots, rng)

    picks = {p: honest_picks for p in honest}
    share, extra = divmod(colluder_picks, len(colluders))
    for idx, c in enumerate(colluders):
        picks[c] = share + (idx < extra)

    honest_random = random_chooser(rng)
    fixed = list(honest_choice) if honest_choice is not None else None

    def honest_chooser(reg: GHZRegister, party: int, count: int) -> list[int]:
        if fixed is not None:
            return [fixed.pop(0) for _ in range(count)]
        return honest_random(reg, party, count)

    plan: dict[int, list[int]] = {}
    seen: dict[str, object] = {}

    def colluder_chooser(reg: GHZRegister, party: int, count: int) -> list[int]:
        if not plan:
            remaining = reg.undesignated()
            readings = [reg.measure(s, 0) for s in remaining]
            chosen = [remaining[i] for i in choose_discards(readings, colluder_picks, expected, rng)]
            seen["remaining"] = "".join(map(str, readings))
            seen["chosen"] = chosen
            for c in colluders:
                plan[c] = [chosen.pop(0) for _ in range(picks[c])]
        return plan[party]

    choosers = {p: honest_chooser for p in honest}
    choosers.update({c: colluder_chooser for c in colluders})
    order = honest + list(colluders)
    failures = tree_detection(register, order, [picks[p] for p in range(n_parties)], choosers)
    if failures:
        return RunOutcome({}, failures, Verdict.ABORTED, expected=expected)
    keys = tree_keys(register, key_bits)
    verdict = classify(keys, colluders, expected, [])
    outcome = RunOutcome(keys, [], verdict, colluders if verdict is Verdict.CONTROLLED else (), expected)
    outcome.info.update(
        {
            "bits": "".join(map(str, register.bits)),
            "remaining_after_honest": seen.get("remaining"),
            "colluder_detection_shots": sorted(s for c in colluders for s in plan.get(c, [])),
            "detection_shots": [s for s, d in enumerate(register.designation) if d == "detection"],
        }
    )
    return outcome


def tree_control_rate(shots: int, key_bits: int, colluder_picks: int, n_parties: int = 3) -> float:
    """Fraction of (GHZ outcomes, honest pick, target) triples the attack steers exactly.

    Honest parties take all detection picks not left to the colluders, so
    exactly ``key_bits`` shots survive. Everything is enumerated.
    """
    honest = n_parties - 2
    spare = shots - key_bits - colluder_picks
    if honest < 1 or spare < 0 or spare % honest:
        raise StructuralError("honest parties must split the remaining picks evenly")
    per_honest = spare // honest
    hits = total = 0
    for pattern in range(1 << shots):
        bits = [(pattern >> (shots - 1 - s)) & 1 for s in range(shots)]
        # only the union of honest picks matters to the colluders
        for honest_pick in itertools.combinations(range(shots), spare):
            for target in range(1 << key_bits):
                expected = Key(target, key_bits)
                outcome = run_tree_attack(
                    shots, key_bits, per_honest, colluder_picks, expected, random.Random(pattern),
                    n_parties=n_parties, register=GHZRegister(n_parties, list(bits)),
                    honest_choice=list(honest_pick),
                )
                total += 1
                hits += outcome.final_keys[1] == expected
    return hits / total
