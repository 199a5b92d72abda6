import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdma import qcir, qsim
from hdma.distest import build_pair_circuit
from hdma.encode import Profile
from hdma.qcir import Block, QuantumCircuit
from hdma.qsim import CountsMap, StateVector

from conftest import TABLE1_PAIRS
from helpers import random_circuit

PROFILE = Profile(id_bit_width=2)


def single(instr, n=1):
    return QuantumCircuit(n).append(instr, Block.UNITARY)


def test_x_flips():
    assert np.allclose(qsim.run_statevector(single(qcir.x(0))).amplitudes, [0, 1])


def test_hadamard():
    s = 1 / math.sqrt(2)
    assert np.allclose(qsim.run_statevector(single(qcir.h(0))).amplitudes, [s, s])


def test_u3_centroid_a_angles():
    amps = qsim.run_statevector(single(qcir.u3(0, math.pi / 4, 3 * math.pi / 4, 0))).amplitudes
    assert amps[0] == pytest.approx(0.923880, abs=1e-6)
    assert amps[1] == pytest.approx(complex(-0.270598, 0.270598), abs=1e-6)


def test_qubit_zero_is_least_significant_bit():
    amps = qsim.run_statevector(single(qcir.x(0), n=3)).amplitudes
    assert amps[1] == 1
    amps = qsim.run_statevector(single(qcir.x(2), n=3)).amplitudes
    assert amps[4] == 1


def test_cswap_swaps_only_when_control_set():
    c = QuantumCircuit(3).extend([qcir.x(1)], Block.ENCODING).append(qcir.cswap(0, 1, 2), Block.UNITARY)
    assert qsim.run_statevector(c).amplitudes[0b010] == 1
    c = QuantumCircuit(3).extend([qcir.x(0), qcir.x(1)], Block.ENCODING).append(qcir.cswap(0, 1, 2), Block.UNITARY)
    assert qsim.run_statevector(c).amplitudes[0b101] == 1


def test_measure_is_ignored_by_statevector():
    c = QuantumCircuit(1, 1).append(qcir.h(0), Block.UNITARY).append(qcir.measure(0, 0), Block.MEASUREMENT)
    s = 1 / math.sqrt(2)
    assert np.allclose(qsim.run_statevector(c).amplitudes, [s, s])


def test_too_many_qubits():
    with pytest.raises(qsim.TooManyQubits):
        qsim.run_statevector(QuantumCircuit(25))
    with pytest.raises(qsim.TooManyQubits):
        qsim.bruteforce_statevector(QuantumCircuit(5))


def test_invalid_circuit():
    with pytest.raises(qsim.InvalidCircuit):
        qsim.run_statevector("x 0")


def test_marginal_examples():
    s = 1 / math.sqrt(2)
    plus = StateVector(1, [s, s])
    assert qsim.marginal_probability(plus, [(0, 0)]) == pytest.approx({"0": 0.5, "1": 0.5})
    assert qsim.marginal_probability(StateVector(1, [0, 1]), [(0, 0)]) == {"1": 1.0}


def test_marginal_duplicate_qubit():
    with pytest.raises(qsim.DuplicateQubit):
        qsim.marginal_probability(StateVector.zero(2), [(0, 0), (0, 1)])


def test_marginal_bit_order_highest_clbit_leftmost():
    c = QuantumCircuit(2).append(qcir.x(1), Block.ENCODING)
    p = qsim.marginal_probability(qsim.run_statevector(c), [(1, 1), (0, 0)])
    assert p == {"10": 1.0}
    p = qsim.marginal_probability(qsim.run_statevector(c), [(1, 0), (0, 1)])
    assert p == {"01": 1.0}


def test_marginal_point2_centroid_b():
    c = build_pair_circuit(TABLE1_PAIRS[2, 1], PROFILE)
    p = qsim.marginal_probability(qsim.run_statevector(c), c.measure_map(), c.num_clbits)
    # independent oracle value, see test_distest
    assert sum(v for k, v in p.items() if k[0] == "1") == pytest.approx(0.0014833626302170888, abs=1e-12)


def test_sample_deterministic_outcome():
    c = QuantumCircuit(1, 1).append(qcir.x(0), Block.ENCODING).append(qcir.measure(0, 0), Block.MEASUREMENT)
    counts = qsim.sample_counts(c, 5, seed=1)
    assert counts.counts == {"1": 5} and counts.shots == 5


def test_sample_requires_measurements_and_positive_shots():
    c = QuantumCircuit(1).append(qcir.h(0), Block.UNITARY)
    with pytest.raises(qsim.NoMeasurements):
        qsim.sample_counts(c, 10, seed=0)
    with pytest.raises(ValueError):
        qsim.sample_counts(c, 0, seed=0)


def hadamard_measured():
    return QuantumCircuit(1, 1).append(qcir.h(0), Block.UNITARY).append(qcir.measure(0, 0), Block.MEASUREMENT)


def test_sample_binomial_bound_over_seeds():
    c = hadamard_measured()
    bound = 4 * math.sqrt(250)
    for seed in range(200):
        counts = qsim.sample_counts(c, 1000, seed)
        assert sum(counts.counts.values()) == 1000
        assert abs(counts["1"] - 500) <= bound


def test_sample_same_seed_same_counts():
    c = build_pair_circuit(TABLE1_PAIRS[2, 0], PROFILE)
    assert qsim.sample_counts(c, 1000, 42) == qsim.sample_counts(c, 1000, 42)
    assert qsim.sample_counts(c, 1000, 42) != qsim.sample_counts(c, 1000, 43)


def test_sample_near_pair_bound():
    c = build_pair_circuit(TABLE1_PAIRS[3, 0], PROFILE)
    for seed in range(200):
        counts = qsim.sample_counts(c, 1000, seed)
        assert sum(v for k, v in counts.items() if k[0] == "1") <= 10


@pytest.mark.parametrize("key", sorted(TABLE1_PAIRS))
def test_sampling_converges_to_marginals(key):
    c = build_pair_circuit(TABLE1_PAIRS[key], PROFILE)
    p = qsim.marginal_probability(qsim.run_statevector(c), c.measure_map(), c.num_clbits)
    counts = qsim.sample_counts(c, 100_000, seed=5)
    for outcome in set(p) | set(counts.counts):
        assert abs(counts[outcome] / 100_000 - p.get(outcome, 0.0)) < 0.01


def test_counts_map_validation_and_text():
    with pytest.raises(ValueError):
        CountsMap({"0": 3}, shots=4)
    with pytest.raises(ValueError):
        CountsMap({"0": 1, "10": 1}, shots=2)
    counts = CountsMap({"110": 43, "010": 957}, 1000)
    assert counts.to_text() == "010 957\n110 43\n"
    assert CountsMap.from_text(counts.to_text()) == counts


def test_bruteforce_examples():
    assert np.allclose(qsim.bruteforce_statevector(QuantumCircuit(3)).amplitudes, [1, 0, 0, 0, 0, 0, 0, 0])
    for instr in [qcir.x(1), qcir.h(2), qcir.u3(0, 0.3, 1.1, -0.4), qcir.cswap(2, 0, 1)]:
        c = QuantumCircuit(3).extend([qcir.h(0), qcir.h(1), qcir.h(2)], Block.ENCODING).append(instr, Block.UNITARY)
        diff = qsim.run_statevector(c).amplitudes - qsim.bruteforce_statevector(c).amplitudes
        assert np.max(np.abs(diff)) < 1e-12


def test_u3_identity_and_pi_rotation():
    start = QuantumCircuit(1).append(qcir.h(0), Block.ENCODING)
    s0 = qsim.run_statevector(start).amplitudes
    s1 = qsim.run_statevector(start.append(qcir.u3(0, 0, 0, 0), Block.UNITARY)).amplitudes
    assert np.allclose(s0, s1, atol=1e-15)
    flipped = qsim.run_statevector(single(qcir.u3(0, math.pi, 0, 0))).amplitudes
    assert np.abs(flipped) == pytest.approx([0.0, 1.0], abs=1e-15)


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
@settings(max_examples=60, deadline=None)
def test_norm_preserved_after_every_gate(seed, n):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng, n, 25)
    state = qsim.StateVector.zero(n)
    for instr, _ in c.instructions:
        state = qsim.apply_instruction(state, instr)
        assert abs(state.norm_sq - 1) < 1e-10


@given(st.integers(0, 2**32 - 1), st.integers(3, 5))
@settings(max_examples=60, deadline=None)
def test_involutions(seed, n):
    rng = np.random.default_rng(seed)
    prefix = random_circuit(rng, n, 10)
    before = qsim.run_statevector(prefix).amplitudes
    q = rng.choice(n, size=3, replace=False).tolist()
    for instr in [qcir.x(q[0]), qcir.h(q[0]), qcir.cswap(*q)]:
        twice = prefix.extend([instr, instr], Block.UNITARY)
        assert np.max(np.abs(qsim.run_statevector(twice).amplitudes - before)) < 1e-12


@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
@settings(max_examples=100, deadline=None)
def test_oracle_equivalence_property(seed, n):
    c = random_circuit(np.random.default_rng(seed), n, 20)
    diff = qsim.run_statevector(c).amplitudes - qsim.bruteforce_statevector(c).amplitudes
    assert np.max(np.abs(diff)) < 1e-10
