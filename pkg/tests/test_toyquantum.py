import itertools
import math
import random

import numpy as np
import pytest

from mqka.errors import ProtocolViolation
from mqka.keycore import Key, xor_fold
from mqka.toyquantum import Basis, DecoyState, generate_pair

KET = {
    (Basis.Z, 0): np.array([1, 0], dtype=complex),
    (Basis.Z, 1): np.array([0, 1], dtype=complex),
    (Basis.X, 0): np.array([1, 1], dtype=complex) / math.sqrt(2),
    (Basis.X, 1): np.array([1, -1], dtype=complex) / math.sqrt(2),
}
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


def amplitude_mismatch_probability(basis, value):
    """Probability that a bit-flipped BB84 state reads wrong in its own basis."""
    flipped = PAULI_X @ KET[(basis, value)]
    return abs(np.vdot(KET[(basis, 1 - value)], flipped)) ** 2


def test_generate_pair_initial_state():
    pair = generate_pair(0, 4, random.Random(1))
    assert pair.accumulated_flips == Key.zeros(4)
    assert pair.decoy_slots == {}
    assert pair.joint_measure(0) == Key.zeros(4)


def test_generate_pair_deterministic():
    a = generate_pair(0, 4, random.Random(9))
    b = generate_pair(0, 4, random.Random(9))
    assert a.descriptor == b.descriptor


def test_encode_accumulates_and_cancels():
    pair = generate_pair(0, 4, random.Random(1))
    pair.encode(Key.from_bits("1010"))
    assert pair.accumulated_flips == Key.from_bits("1010")
    pair.encode(Key.from_bits("1010"))
    assert pair.accumulated_flips == Key.zeros(4)


def test_encode_requires_holding():
    pair = generate_pair(0, 4, random.Random(1))
    pair.hand_over(1)
    with pytest.raises(ProtocolViolation):
        pair.encode(Key.zeros(4), by=2)


def test_joint_measure_is_xor_of_encodings_brute_force():
    rng = random.Random(5)
    for k in range(1, 9):
        pair = generate_pair(0, 6, rng)
        encodings = [Key.random(6, rng) for _ in range(k)]
        for e in encodings:
            pair.encode(e)
        oracle = "".join(str(sum(int(e.bits[i]) for e in encodings) % 2) for i in range(6))
        assert pair.joint_measure(0).bits == oracle


def test_joint_measure_consumes():
    pair = generate_pair(0, 4, random.Random(1))
    pair.encode(Key.from_bits("1100"))
    assert pair.joint_measure(0) == Key.from_bits("1100")
    with pytest.raises(ProtocolViolation):
        pair.joint_measure(0)


def test_joint_measure_needs_both_halves_and_descriptor():
    pair = generate_pair(0, 4, random.Random(1))
    pair.hand_over(3)
    with pytest.raises(ProtocolViolation):
        pair.joint_measure(3)
    pair.give_home_half(3, share_descriptor=False)
    with pytest.raises(ProtocolViolation):
        pair.joint_measure(3)
    pair.descriptor_known_by.add(3)
    assert pair.joint_measure(3) == Key.zeros(4)


def test_other_participants_sum_after_full_circle():
    rng = random.Random(2)
    n = 5
    keys = [Key.random(8, rng) for _ in range(n)]
    pair = generate_pair(0, 8, rng)
    for j in range(1, n):
        pair.hand_over(j).encode(keys[j], by=j)
    pair.hand_over(0)
    assert pair.joint_measure(0) == xor_fold(keys[1:])


def test_decoys_are_disjoint_and_kept_in_order():
    rng = random.Random(3)
    pair = generate_pair(0, 8, rng).insert_decoys(5, rng)
    assert pair.register_length == 13
    first = dict(pair.decoy_slots)
    pair.insert_decoys(3, rng)
    assert pair.register_length == 16
    assert len(pair.decoy_slots) == 8
    old_order = [d for _, d in sorted(first.items())]
    survivors = [d for _, d in sorted(pair.decoy_slots.items()) if any(d is o for o in old_order)]
    assert survivors == old_order


@pytest.mark.parametrize("d", [0, 1, 16])
def test_untampered_decoys_pass(d):
    rng = random.Random(d)
    pair = generate_pair(0, 8, rng).insert_decoys(d, rng)
    pair.encode(Key.ones(8))
    pair.hand_over(1)
    result = pair.reveal_and_verify(1)
    assert result.passed and result.checked == d
    assert pair.register_length == 8


def test_verify_before_reveal_is_violation():
    rng = random.Random(1)
    pair = generate_pair(0, 4, rng).insert_decoys(2, rng)
    with pytest.raises(ProtocolViolation):
        pair.verify_decoys(1)


def test_reveal_adds_verifier():
    rng = random.Random(1)
    pair = generate_pair(0, 4, rng).insert_decoys(3, rng)
    pair.reveal_decoys(7)
    assert all(d.known_to == {0, 7} for d in pair.decoy_slots.values())


def test_blind_flip_zero_mask_disturbs_nothing():
    rng = random.Random(4)
    pair = generate_pair(0, 4, rng).insert_decoys(16, rng)
    pair.blind_flip(Key.zeros(4))
    assert pair.reveal_and_verify(1).failed == 0


def test_blind_flip_hits_every_z_decoy():
    pair = generate_pair(0, 4, random.Random(1))
    for pos in range(6):
        pair.decoy_slots[4 + pos] = DecoyState(Basis.Z, pos % 2, 0, {0})
    pair.blind_flip(Key.ones(4))
    assert pair.reveal_and_verify(1).failed == 6


def test_bb84_flip_detection_matches_amplitudes():
    for basis, value in itertools.product(Basis, (0, 1)):
        decoy = DecoyState(basis, value, 0)
        decoy.flips = 1
        assert float(decoy.disturbed) == pytest.approx(amplitude_mismatch_probability(basis, value))
    mean = np.mean([amplitude_mismatch_probability(b, v) for b, v in itertools.product(Basis, (0, 1))])
    assert mean == pytest.approx(0.5)


def test_blind_flip_failures_average_half_of_decoys():
    rng = random.Random(11)
    d, trials = 16, 10_000
    failures = []
    for _ in range(trials):
        pair = generate_pair(0, 2, rng).insert_decoys(d, rng)
        pair.blind_flip(Key.ones(2))
        failures.append(pair.reveal_and_verify(1).failed)
    mean = sum(failures) / trials
    sigma = math.sqrt(d * 0.25 / trials)
    assert abs(mean - d / 2) < 3 * sigma


def test_decoy_measure_in_wrong_basis_refused():
    with pytest.raises(ProtocolViolation):
        DecoyState(Basis.Z, 0, 0).measure(Basis.X)
