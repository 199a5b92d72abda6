"""
Seedable statevector simulator for hqc circuits.

Convention: qubit k is bit k of the amplitude index (qubit 0 is the least
significant bit). Counts are keyed by classical bitstrings rendered with the
highest classical bit leftmost, so ``"110"`` reads c[2] c[1] c[0].
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import SimulationError
from .qcir import Gate, Instruction, QuantumCircuit

__all__ = [
    "MAX_QUBITS", "BRUTEFORCE_MAX_QUBITS",
    "StateVector", "CountsMap",
    "TooManyQubits", "InvalidCircuit", "DuplicateQubit", "NoMeasurements",
    "gate_matrix", "apply_instruction", "run_statevector", "marginal_probability", "sample_counts", "bruteforce_statevector",
]

MAX_QUBITS = 24
BRUTEFORCE_MAX_QUBITS = 4
NORM_TOLERANCE = 1e-10


class TooManyQubits(SimulationError):
    pass


class InvalidCircuit(SimulationError):
    pass


class DuplicateQubit(SimulationError, ValueError):
    pass


class NoMeasurements(SimulationError):
    pass


@dataclass(frozen=True, eq=False)
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 1 << self.num_qubits:
            raise ValueError(f"expected {1 << self.num_qubits} amplitudes, got {amps.size}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, num_qubits: int) -> StateVector:
        amps = np.zeros(1 << num_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(num_qubits, amps)

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class CountsMap:
    """Measured outcome counts; keys are bitstrings of length ``num_clbits``."""

    counts: Mapping[str, int]
    shots: int

    def __post_init__(self):
        counts = {k: int(v) for k, v in sorted(self.counts.items()) if int(v) != 0}
        if any(v < 0 for v in counts.values()):
            raise ValueError("counts must be non-negative")
        if sum(counts.values()) != self.shots:
            raise ValueError(f"counts sum to {sum(counts.values())}, expected {self.shots} shots")
        widths = {len(k) for k in counts}
        if len(widths) > 1 or any(set(k) - {"0", "1"} for k in counts):
            raise ValueError(f"inconsistent bitstring keys: {sorted(counts)}")
        object.__setattr__(self, "counts", counts)

    def __getitem__(self, key: str) -> int:
        return self.counts.get(key, 0)

    def __iter__(self):
        return iter(self.counts)

    def items(self):
        return self.counts.items()

    def to_text(self) -> str:
        """``bitstring count`` lines, sorted by bitstring."""
        return "".join(f"{k} {v}\n" for k, v in self.counts.items())

    @classmethod
    def from_text(cls, text: str) -> CountsMap:
        counts: dict[str, int] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2 or not parts[1].isdigit():
                raise ValueError(f"line {lineno}: expected '<bitstring> <count>', got {line!r}")
            counts[parts[0]] = counts.get(parts[0], 0) + int(parts[1])
        return cls(counts, sum(counts.values()))


_SQRT1_2 = 1 / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT1_2


def _u3(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array(
        [[c, -np.exp(1j * lam) * s], [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]],
        dtype=complex,
    )


def gate_matrix(instr: Instruction) -> np.ndarray:
    """2x2 matrix of a single-qubit gate."""
    if instr.gate is Gate.X:
        return _X
    if instr.gate is Gate.H:
        return _H
    if instr.gate is Gate.U3:
        return _u3(*instr.params)
    raise ValueError(f"{instr.gate.value} is not a single-qubit gate")


def _check_circuit(circuit: QuantumCircuit, cap: int) -> None:
    if not isinstance(circuit, QuantumCircuit):
        raise InvalidCircuit(f"expected a QuantumCircuit, got {type(circuit).__name__}")
    if circuit.num_qubits > cap:
        raise TooManyQubits(f"{circuit.num_qubits} qubits exceeds the cap of {cap}")


def _apply_1q(psi: np.ndarray, matrix: np.ndarray, qubit: int, n: int) -> np.ndarray:
    # tensor axis 0 is the most significant qubit
    axis = n - 1 - qubit
    out = np.tensordot(matrix, psi, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def _apply_cswap(psi: np.ndarray, control: int, a: int, b: int, n: int) -> np.ndarray:
    def idx(c, va, vb):
        i = [slice(None)] * n
        i[n - 1 - control], i[n - 1 - a], i[n - 1 - b] = c, va, vb
        return tuple(i)

    out = psi.copy()
    out[idx(1, 0, 1)] = psi[idx(1, 1, 0)]
    out[idx(1, 1, 0)] = psi[idx(1, 0, 1)]
    return out


def apply_instruction(state: StateVector, instr: Instruction) -> StateVector:
    n = state.num_qubits
    psi = state.amplitudes.reshape([2] * n) if n else state.amplitudes
    if instr.gate is Gate.MEASURE:
        return state
    if instr.gate is Gate.CSWAP:
        psi = _apply_cswap(psi, *instr.qubits, n)
    else:
        psi = _apply_1q(psi, gate_matrix(instr), instr.qubits[0], n)
    return StateVector(n, psi.reshape(-1))


def run_statevector(circuit: QuantumCircuit) -> StateVector:
    """Pre-measurement state of ``circuit`` applied to |0...0>."""
    _check_circuit(circuit, MAX_QUBITS)
    state = StateVector.zero(circuit.num_qubits)
    for instr, _ in circuit.instructions:
        state = apply_instruction(state, instr)
    return state


def _outcome_probabilities(
    state: StateVector, measure_map: Iterable[tuple[int, int]], num_clbits: int | None
) -> tuple[np.ndarray, int]:
    pairs = [(int(q), int(c)) for q, c in measure_map]
    qubits = [q for q, _ in pairs]
    if len(set(qubits)) != len(qubits):
        raise DuplicateQubit(f"qubit measured more than once in {pairs}")
    if len({c for _, c in pairs}) != len(pairs):
        raise ValueError(f"classical bit written more than once in {pairs}")
    if any(q >= state.num_qubits for q in qubits):
        raise ValueError(f"measured qubit out of range in {pairs}")
    width = num_clbits if num_clbits is not None else max((c + 1 for _, c in pairs), default=0)
    basis = np.arange(1 << state.num_qubits)
    outcome = np.zeros_like(basis)
    for q, c in pairs:
        outcome |= ((basis >> q) & 1) << c
    probs = np.bincount(outcome, weights=state.probabilities(), minlength=1 << width)
    return probs, width


def marginal_probability(
    state: StateVector, measure_map: Iterable[tuple[int, int]], num_clbits: int | None = None
) -> dict[str, float]:
    """Distribution over classical bitstrings; unmapped qubits are marginalized.

    Only outcomes with non-zero probability are returned.
    """
    probs, width = _outcome_probabilities(state, measure_map, num_clbits)
    return {format(i, f"0{width}b") if width else "": float(p) for i, p in enumerate(probs) if p > 0}


def sample_counts(circuit: QuantumCircuit, shots: int, seed: int | None) -> CountsMap:
    """Draw ``shots`` measurement records with numpy's PCG64 seeded by ``seed``."""
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    mmap = circuit.measure_map()
    if not mmap:
        raise NoMeasurements("circuit has an empty measurement block")
    probs, width = _outcome_probabilities(run_statevector(circuit), mmap, circuit.num_clbits)
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    draws = np.random.default_rng(seed).multinomial(shots, probs)
    return CountsMap({format(i, f"0{width}b"): int(k) for i, k in enumerate(draws) if k}, shots)


def _embed_1q(matrix: np.ndarray, qubit: int, n: int) -> np.ndarray:
    # kron factors run from the most significant qubit down to qubit 0
    full = np.eye(1, dtype=complex)
    for k in reversed(range(n)):
        full = np.kron(full, matrix if k == qubit else np.eye(2, dtype=complex))
    return full


def _cswap_permutation(control: int, a: int, b: int, n: int) -> np.ndarray:
    dim = 1 << n
    perm = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        j = i
        if (i >> control) & 1 and ((i >> a) & 1) != ((i >> b) & 1):
            j = i ^ ((1 << a) | (1 << b))
        perm[j, i] = 1.0
    return perm


def bruteforce_statevector(circuit: QuantumCircuit) -> StateVector:
    """Reference simulation by full 2^n x 2^n matrix products."""
    _check_circuit(circuit, BRUTEFORCE_MAX_QUBITS)
    n = circuit.num_qubits
    total = np.eye(1 << n, dtype=complex)
    for instr, _ in circuit.instructions:
        if instr.gate is Gate.MEASURE:
            continue
        if instr.gate is Gate.CSWAP:
            step = _cswap_permutation(*instr.qubits, n)
        else:
            step = _embed_1q(gate_matrix(instr), instr.qubits[0], n)
        total = step @ total
    return StateVector(n, total[:, 0])

