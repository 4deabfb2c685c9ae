"""Fixed-length bitstring keys and the XOR algebra the protocols run on."""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import reduce
from typing import Iterable

from .errors import StructuralError


@dataclass(frozen=True)
class Key:
    """An ``length``-bit key stored as an integer, most significant bit first.

    ``Key(0b101, 3).bits == "101"``.
    """

    value: int
    length: int

    def __post_init__(self):
        if self.length < 1:
            raise StructuralError(f"key length must be >= 1, got {self.length}")
        if self.value < 0 or self.value >> self.length:
            raise StructuralError(f"value {self.value} does not fit in {self.length} bits")

    @classmethod
    def zeros(cls, length: int) -> Key:
        return cls(0, length)

    @classmethod
    def ones(cls, length: int) -> Key:
        return cls((1 << length) - 1, length)

    @classmethod
    def random(cls, length: int, rng: random.Random) -> Key:
        return cls(rng.getrandbits(length), length)

    @classmethod
    def from_bits(cls, bits: str) -> Key:
        if not bits or set(bits) - {"0", "1"}:
            raise StructuralError(f"not a bitstring: {bits!r}")
        return cls(int(bits, 2), len(bits))

    @classmethod
    def parse(cls, text: str, length: int | None = None) -> Key:
        """Inverse of :meth:`serialize`.

        With ``length`` known the format follows from it (hex iff divisible by
        4). Without it, a ``0b`` prefix means binary; pass ``length`` for hex
        keys that happen to start with ``0b``.
        """
        text = text.strip().lower()
        binary = text.startswith("0b") if length is None else length % 4 != 0
        if binary:
            if not text.startswith("0b"):
                raise StructuralError(f"a {length}-bit key is written as 0b<bits>, got {text!r}")
            key = cls.from_bits(text[2:])
        else:
            try:
                value = int(text, 16)
            except ValueError:
                raise StructuralError(f"not a hex key: {text!r}") from None
            key = cls(value, 4 * len(text)) if length is None else cls(value, length)
        if length is not None and key.length != length:
            raise StructuralError(f"expected a {length}-bit key, got {key.length} bits")
        return key

    @property
    def bits(self) -> str:
        return format(self.value, f"0{self.length}b")

    def bit(self, i: int) -> int:
        return (self.value >> (self.length - 1 - i)) & 1

    def serialize(self) -> str:
        """Lowercase hex when the length is a multiple of 4, else ``0b``-binary."""
        if self.length % 4 == 0:
            return format(self.value, f"0{self.length // 4}x")
        return "0b" + self.bits

    def is_zero(self) -> bool:
        return self.value == 0

    def __xor__(self, other: Key) -> Key:
        if not isinstance(other, Key):
            return NotImplemented
        if other.length != self.length:
            raise StructuralError(f"key length mismatch: {self.length} vs {other.length}")
        return Key(self.value ^ other.value, self.length)

    def __str__(self):
        return self.serialize()


def xor_fold(keys: Iterable[Key]) -> Key:
    keys = list(keys)
    if not keys:
        raise StructuralError("cannot fold an empty key list")
    return reduce(lambda a, b: a ^ b, keys)


def forged_key(own: Key, expected: Key, final: Key) -> Key:
    """The substitute a colluder encodes so the final key lands on ``expected``."""
    return own ^ expected ^ final
