"""Honest execution of the three MQKA archetypes.

Circle, half-circle and complete-graph protocols share :class:`RouteEngine`:
every owner prepares entangled sequences whose traveling halves follow fixed
routes. In each period the receiver checks the inbound decoys with the
sender, encodes its personal key, inserts fresh decoys and forwards. In the
last period owners jointly measure their sequences and XOR in their own key.

The tree protocol distributes GHZ shots from a root instead; it is run by
:func:`run_tree`.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import DetectionAbort, StructuralError
from .keycore import Key, xor_fold
from .toyquantum import SequencePair, generate_pair
from .topology import Kind, Route, Topology


class Role(enum.Enum):
    HONEST = "honest"
    COLLUDER = "colluder"


class Verdict(enum.Enum):
    FAIR = "fair"
    CONTROLLED = "controlled"
    ABORTED = "aborted"


@dataclass
class Participant:
    id: int
    personal_key: Key
    role: Role = Role.HONEST
    view: list[dict] = field(default_factory=list)


@dataclass(frozen=True)
class DetectionEvent:
    period: int
    edge: tuple[int, int]
    failed: int
    sequence: str = ""

    def to_dict(self) -> dict:
        return {"period": self.period, "edge": list(self.edge), "failed": self.failed, "sequence": self.sequence}


@dataclass
class RunOutcome:
    final_keys: dict[int, Key]
    detections: list[DetectionEvent]
    verdict: Verdict
    controlled_by: tuple[int, ...] = ()
    expected: Key | None = None
    trace: list[dict] = field(default_factory=list)
    views: dict[int, list[dict]] = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def honest_keys(self, colluders: Sequence[int] = ()) -> dict[int, Key]:
        skip = set(colluders) | set(self.controlled_by)
        return {i: k for i, k in self.final_keys.items() if i not in skip}

    @property
    def unanimous(self) -> bool:
        return len({k for k in self.final_keys.values()}) == 1

    def to_dict(self) -> dict:
        return {
            "final_keys": {str(i): k.serialize() for i, k in sorted(self.final_keys.items())},
            "detections": [d.to_dict() for d in self.detections],
            "verdict": self.verdict.value,
            "controlled_by": list(self.controlled_by),
            "expected": None if self.expected is None else self.expected.serialize(),
            "trace": self.trace,
            "info": self.info,
        }


def classify(
    final_keys: dict[int, Key],
    colluders: Sequence[int],
    expected: Key | None,
    detections: Sequence[DetectionEvent],
) -> Verdict:
    if detections:
        return Verdict.ABORTED
    honest = [k for i, k in final_keys.items() if i not in set(colluders)]
    if colluders and expected is not None and honest and all(k == expected for k in honest):
        return Verdict.CONTROLLED
    return Verdict.FAIR


class Behavior:
    """Honest participant logic. Adversaries subclass and override the hooks."""

    colluders: tuple[int, ...] = ()
    expected: Key | None = None

    def setup(self, engine: RouteEngine) -> None:
        pass

    def after_receive(self, engine: RouteEngine, period: int, arrivals: list[int]) -> None:
        pass

    def encoding(self, engine: RouteEngine, period: int, seq: int, holder: int) -> Key:
        return engine.keys[holder]

    def in_transit(self, engine: RouteEngine, period: int, seq: int, sender: int, receiver: int) -> None:
        pass

    def final_key(self, engine: RouteEngine, participant: int) -> Key | None:
        """Return a key to override the participant's honest computation."""
        return None


class RouteEngine:
    """Discrete-period executor for route-based protocols."""

    def __init__(
        self,
        topology: Topology,
        keys: Sequence[Key],
        decoys: int,
        rng: random.Random,
        behavior: Behavior | None = None,
    ):
        if len(keys) != topology.n:
            raise StructuralError(f"need {topology.n} personal keys, got {len(keys)}")
        if len({k.length for k in keys}) != 1:
            raise StructuralError("personal keys differ in length")
        if decoys < 0:
            raise StructuralError("decoy count must be >= 0")
        self.topology = topology
        self.n = topology.n
        self.keys = list(keys)
        self.length = keys[0].length
        self.decoys = decoys
        self.rng = rng
        self.behavior = behavior or Behavior()
        self.routes: list[Route] = topology.routes()
        self.last_period = max(r.home_period for r in self.routes)
        self.pairs: list[SequencePair] = []
        self.views: dict[int, list[dict]] = {i: [] for i in range(self.n)}
        self.trace: list[dict] = []
        self.detections: list[DetectionEvent] = []

    def log(self, period: int, **event) -> None:
        self.trace.append({"period": period, **event})

    def run(self, raise_on_detection: bool = True) -> RunOutcome:
        for route in self.routes:
            pair = generate_pair(route.owner, self.length, self.rng)
            pair.insert_decoys(self.decoys, self.rng)
            self.pairs.append(pair)
        self.behavior.setup(self)
        for seq, route in enumerate(self.routes):
            self._send(0, seq, route.owner, route.holder(1))

        for period in range(1, self.last_period + 1):
            arrivals = [s for s, r in enumerate(self.routes) if period <= r.home_period]
            failures = self._check_arrivals(period, arrivals)
            if failures:
                self.detections.extend(failures)
                if raise_on_detection:
                    first = failures[0]
                    raise DetectionAbort(first.period, first.edge, first.failed, first.sequence)
                return self._outcome()
            self.behavior.after_receive(self, period, arrivals)
            for seq in arrivals:
                route = self.routes[seq]
                if period == route.home_period:
                    continue
                holder = route.holder(period)
                self.pairs[seq].encode(self.behavior.encoding(self, period, seq, holder), by=holder)
                self.pairs[seq].insert_decoys(self.decoys, self.rng, by=holder)
                self._send(period, seq, holder, route.holder(period + 1))
        return self._finish()

    def _send(self, period: int, seq: int, sender: int, receiver: int) -> None:
        pair = self.pairs[seq]
        self.views[sender].append(
            {"period": period, "event": "send", "to": receiver, "length": pair.register_length}
        )
        self.behavior.in_transit(self, period, seq, sender, receiver)
        pair.hand_over(receiver)

    def _check_arrivals(self, period: int, arrivals: list[int]) -> list[DetectionEvent]:
        failures = []
        for seq in arrivals:
            route = self.routes[seq]
            sender, receiver = route.sender(period), route.holder(period)
            pair = self.pairs[seq]
            length = pair.register_length
            result = pair.reveal_and_verify(receiver)
            entry = {
                "period": period,
                "event": "receive",
                "from": sender,
                "length": length,
                "decoys_checked": result.checked,
                "decoys_failed": result.failed,
            }
            self.views[receiver].append(entry)
            self.log(period, event="check", sequence=route.label, edge=[sender, receiver],
                     checked=result.checked, failed=result.failed)
            if not result.passed:
                failures.append(DetectionEvent(period, (sender, receiver), result.failed, route.label))
        return failures

    def _finish(self) -> RunOutcome:
        final: dict[int, Key] = {}
        for i in range(self.n):
            override = self.behavior.final_key(self, i)
            if override is not None:
                final[i] = override
                continue
            measured = [
                self.pairs[s].joint_measure(i) for s, r in enumerate(self.routes) if r.owner == i
            ]
            final[i] = xor_fold([self.keys[i], *measured])
            self.log(self.last_period, event="measure", participant=i)
        return self._outcome(final)

    def _outcome(self, final: dict[int, Key] | None = None) -> RunOutcome:
        final = final or {}
        colluders = tuple(self.behavior.colluders)
        verdict = classify(final, colluders, self.behavior.expected, self.detections)
        return RunOutcome(
            final_keys=final,
            detections=list(self.detections),
            verdict=verdict,
            controlled_by=colluders if verdict is Verdict.CONTROLLED else (),
            expected=self.behavior.expected,
            trace=self.trace,
            views=self.views,
        )


def _keys_or_random(n: int, keys: Sequence[Key] | None, length: int, rng: random.Random) -> list[Key]:
    if keys is None:
        return [Key.random(length, rng) for _ in range(n)]
    if len(keys) != n:
        raise StructuralError(f"need {n} personal keys, got {len(keys)}")
    if any(k.length != length for k in keys):
        raise StructuralError(f"personal keys must be {length} bits long")
    return list(keys)


def run_routed(
    kind: Kind,
    n: int,
    keys: Sequence[Key] | None,
    length: int,
    decoys: int,
    rng: random.Random,
) -> RunOutcome:
    keys = _keys_or_random(n, keys, length, rng)
    outcome = RouteEngine(Topology(kind, n), keys, decoys, rng).run()
    outcome.info["personal_keys"] = {str(i): k.serialize() for i, k in enumerate(keys)}
    return outcome


def run_cgt(n: int, keys: Sequence[Key] | None, length: int, rng: random.Random, decoys: int = 16) -> RunOutcome:
    """Complete-graph protocol: every pair of participants exchanges keys directly."""
    return run_routed(Kind.COMPLETE, n, keys, length, decoys, rng)


def run_circle(n: int, keys: Sequence[Key] | None, length: int, decoys: int, rng: random.Random) -> RunOutcome:
    return run_routed(Kind.CIRCLE, n, keys, length, decoys, rng)


def run_half_circle(
    n: int, keys: Sequence[Key] | None, length: int, decoys: int, rng: random.Random
) -> RunOutcome:
    return run_routed(Kind.HALF_CIRCLE, n, keys, length, decoys, rng)


# --- tree type -------------------------------------------------------------


@dataclass
class GHZRegister:
    """Outcomes of ``len(bits)`` GHZ shots shared by ``party_count`` parties.

    Every party reading an untampered shot gets the same bit.
    """

    party_count: int
    bits: list[int]
    designation: list[str | None] = field(default_factory=list)
    tampered: set[tuple[int, int]] = field(default_factory=set)

    def __post_init__(self):
        if not self.designation:
            self.designation = [None] * len(self.bits)

    @classmethod
    def prepare(cls, party_count: int, shots: int, rng: random.Random) -> GHZRegister:
        return cls(party_count, [rng.getrandbits(1) for _ in range(shots)])

    @property
    def shots(self) -> int:
        return len(self.bits)

    def measure(self, shot: int, party: int) -> int:
        return self.bits[shot] ^ ((shot, party) in self.tampered)

    def correlated(self, shot: int) -> bool:
        return len({self.measure(shot, p) for p in range(self.party_count)}) == 1

    def undesignated(self) -> list[int]:
        return [s for s, d in enumerate(self.designation) if d is None]

    def survivors(self) -> list[int]:
        return [s for s, d in enumerate(self.designation) if d != "detection"]


Chooser = Callable[[GHZRegister, int, int], list[int]]


def random_chooser(rng: random.Random) -> Chooser:
    def choose(register: GHZRegister, party: int, count: int) -> list[int]:
        return sorted(rng.sample(register.undesignated(), count))

    return choose


def tree_detection(
    register: GHZRegister,
    order: Sequence[int],
    picks: Sequence[int],
    choosers: dict[int, Chooser],
) -> list[DetectionEvent]:
    """Parties pick detection shots in ``order``; every picked shot is checked."""
    failures = []
    for party in order:
        chosen = choosers[party](register, party, picks[party])
        for shot in chosen:
            if register.designation[shot] is not None:
                raise StructuralError(f"shot {shot} picked twice")
            register.designation[shot] = "detection"
        for shot in chosen:
            for other in range(1, register.party_count):
                if register.measure(shot, other) != register.measure(shot, 0):
                    failures.append(DetectionEvent(2, (0, other), 1, f"shot{shot}"))
    return failures


def tree_keys(register: GHZRegister, key_shots: int) -> dict[int, Key]:
    kept = register.survivors()[:key_shots]
    for s in kept:
        register.designation[s] = "key"
    return {
        p: Key.from_bits("".join(str(register.measure(s, p)) for s in kept))
        for p in range(register.party_count)
    }


def run_tree(
    n: int,
    shots: int,
    key_shots: int,
    picks: Sequence[int],
    rng: random.Random,
    order: Sequence[int] | None = None,
    register: GHZRegister | None = None,
    raise_on_detection: bool = True,
) -> RunOutcome:
    """Root 0 distributes GHZ shots; parties pick detection shots; the rest form the key."""
    if len(picks) != n:
        raise StructuralError(f"need a detection pick count for each of {n} parties")
    if key_shots < 1 or shots < key_shots + sum(picks):
        raise StructuralError(f"{shots} shots cannot cover {key_shots} key bits and {sum(picks)} detections")
    register = register or GHZRegister.prepare(n, shots, rng)
    order = list(range(n)) if order is None else list(order)
    chooser = random_chooser(rng)
    failures = tree_detection(register, order, picks, {p: chooser for p in range(n)})
    if failures:
        if raise_on_detection:
            f = failures[0]
            raise DetectionAbort(f.period, f.edge, f.failed, f.sequence)
        return RunOutcome({}, failures, Verdict.ABORTED)
    keys = tree_keys(register, key_shots)
    outcome = RunOutcome(keys, [], Verdict.FAIR)
    outcome.info["bits"] = "".join(map(str, register.bits))
    outcome.info["detection_shots"] = [s for s, d in enumerate(register.designation) if d == "detection"]
    return outcome
