"""Symbolic quantum layer: traveling entangled sequences and BB84 decoys.

States are not simulated as amplitudes. A traveling sequence records the XOR
of every encoding applied to it, which is exactly what a joint measurement of
both halves reveals. Decoys are single-qubit BB84 states: a bit flip turns a
Z eigenstate into its partner and leaves an X eigenstate alone, so a flip is
caught with probability 1/2 per decoy when bases are uniform.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field

from .errors import ProtocolViolation, StructuralError
from .keycore import Key


class Basis(enum.Enum):
    Z = "Z"
    X = "X"


@dataclass
class DecoyState:
    basis: Basis
    eigenvalue: int
    preparer: int
    known_to: set[int] = field(default_factory=set)
    flips: int = 0

    def measure(self, basis: Basis) -> int:
        """Outcome of measuring in ``basis``; only meaningful in the preparation basis."""
        if basis is not self.basis:
            raise ProtocolViolation("decoys are only checked in their preparation basis")
        if self.basis is Basis.Z:
            return self.eigenvalue ^ (self.flips & 1)
        return self.eigenvalue

    @property
    def disturbed(self) -> bool:
        return self.measure(self.basis) != self.eigenvalue

    @classmethod
    def random(cls, preparer: int, rng: random.Random) -> DecoyState:
        basis = Basis.Z if rng.getrandbits(1) else Basis.X
        return cls(basis, rng.getrandbits(1), preparer, {preparer})


@dataclass(frozen=True)
class DetectionResult:
    verifier: int
    preparer: int | None
    checked: int
    failed: int

    @property
    def passed(self) -> bool:
        return self.failed == 0


@dataclass
class SequencePair:
    """One owner's entangled sequence split into a retained and a traveling half.

    ``holder`` holds the traveling half, ``home_holder`` the retained half.
    Only someone holding both halves and knowing the initial-state
    ``descriptor`` can read ``accumulated_flips``.
    """

    owner: int
    length: int
    descriptor: str
    holder: int
    home_holder: int
    descriptor_known_by: set[int]
    accumulated_flips: Key
    decoy_slots: dict[int, DecoyState] = field(default_factory=dict)
    consumed: bool = False

    @property
    def register_length(self) -> int:
        return self.length + len(self.decoy_slots)

    def encode(self, key: Key, by: int | None = None) -> SequencePair:
        """Legitimate encoding by the current holder; decoys are not touched."""
        self._check_live()
        if by is not None and by != self.holder:
            raise ProtocolViolation(f"P{by} cannot encode S{self.owner}: held by P{self.holder}")
        if key.length != self.length:
            raise StructuralError(f"key length {key.length} != sequence length {self.length}")
        self.accumulated_flips = self.accumulated_flips ^ key
        return self

    def insert_decoys(self, count: int, rng: random.Random, by: int | None = None) -> SequencePair:
        self._check_live()
        inserter = self.holder if by is None else by
        if inserter != self.holder:
            raise ProtocolViolation(f"P{inserter} does not hold S{self.owner}")
        old_items = iter([self.decoy_slots.get(p) for p in range(self.register_length)])
        total = self.register_length + count
        new_positions = set(rng.sample(range(total), count))
        relabeled: dict[int, DecoyState] = {}
        for pos in range(total):
            item = DecoyState.random(inserter, rng) if pos in new_positions else next(old_items)
            if item is not None:
                relabeled[pos] = item
        self.decoy_slots = relabeled
        return self

    def reveal_decoys(self, verifier: int) -> SequencePair:
        """The preparers announce decoy positions and bases to ``verifier``."""
        for decoy in self.decoy_slots.values():
            decoy.known_to.add(verifier)
        return self

    def verify_decoys(self, verifier: int) -> DetectionResult:
        """Measure every decoy in its preparation basis, then drop it from the register."""
        self._check_live()
        failed = 0
        preparers = {d.preparer for d in self.decoy_slots.values()}
        for decoy in self.decoy_slots.values():
            if verifier not in decoy.known_to:
                raise ProtocolViolation(f"P{verifier} verifies S{self.owner} before positions are revealed")
            if decoy.measure(decoy.basis) != decoy.eigenvalue:
                failed += 1
        checked = len(self.decoy_slots)
        self.decoy_slots = {}
        preparer = preparers.pop() if len(preparers) == 1 else None
        return DetectionResult(verifier, preparer, checked, failed)

    def reveal_and_verify(self, verifier: int) -> DetectionResult:
        return self.reveal_decoys(verifier).verify_decoys(verifier)

    def blind_flip(self, mask: Key) -> SequencePair:
        """Out-of-turn tampering by someone who cannot locate the decoys.

        The data absorbs ``mask``. A non-zero mask hits every decoy slot,
        because a tamperer who does not know the layout cannot skip them.
        """
        self._check_live()
        if mask.length != self.length:
            raise StructuralError(f"mask length {mask.length} != sequence length {self.length}")
        self.accumulated_flips = self.accumulated_flips ^ mask
        if not mask.is_zero():
            for decoy in self.decoy_slots.values():
                decoy.flips += 1
        return self

    def hand_over(self, to: int) -> SequencePair:
        self._check_live()
        self.holder = to
        return self

    def give_home_half(self, to: int, share_descriptor: bool = True) -> SequencePair:
        """Move the retained half (and optionally the descriptor) to ``to``."""
        self._check_live()
        self.home_holder = to
        if share_descriptor:
            self.descriptor_known_by.add(to)
        return self

    def joint_measure(self, by: int) -> Key:
        """Read the XOR of all encodings. Consumes the pair."""
        self._check_live()
        if by != self.holder or by != self.home_holder:
            raise ProtocolViolation(f"P{by} does not hold both halves of S{self.owner}")
        if by not in self.descriptor_known_by:
            raise ProtocolViolation(f"P{by} does not know the initial state of S{self.owner}")
        self.consumed = True
        return self.accumulated_flips

    def _check_live(self):
        if self.consumed:
            raise ProtocolViolation(f"S{self.owner} has already been measured")


def generate_pair(owner: int, length: int, rng: random.Random) -> SequencePair:
    if length < 1:
        raise StructuralError("sequence length must be >= 1")
    return SequencePair(
        owner=owner,
        length=length,
        descriptor=format(rng.getrandbits(64), "016x"),
        holder=owner,
        home_holder=owner,
        descriptor_known_by={owner},
        accumulated_flips=Key.zeros(length),
    )
