"""Shared generators and independent oracles for the test suite."""
import cmath
import math

import numpy as np

from hdma import qcir
from hdma.qcir import Block, QuantumCircuit


def random_circuit(rng: np.random.Generator, num_qubits: int, max_gates: int) -> QuantumCircuit:
    """Random unitary circuit over the supported gate set (no measurements)."""
    c = QuantumCircuit(num_qubits)
    kinds = ["u3", "x", "h"] + (["cswap"] if num_qubits >= 3 else [])
    for _ in range(int(rng.integers(1, max_gates + 1))):
        kind = kinds[rng.integers(len(kinds))]
        if kind == "cswap":
            q = rng.choice(num_qubits, size=3, replace=False)
            instr = qcir.cswap(*map(int, q))
        else:
            q = int(rng.integers(num_qubits))
            if kind == "u3":
                instr = qcir.u3(q, *rng.uniform(-2 * math.pi, 2 * math.pi, size=3))
            else:
                instr = getattr(qcir, kind)(q)
        c = c.append(instr, Block.UNITARY)
    return c


def overlap_oracle(f_a, f_b) -> float:
    """|<a|b>|^2 by direct complex arithmetic from raw features (independent of hdma.encode)."""
    def state(f1, f2):
        theta, phi = (f1 + 1) * math.pi / 2, (f2 + 1) * math.pi / 2
        return [math.cos(theta / 2), cmath.exp(1j * phi) * math.sin(theta / 2)]

    a, b = state(*f_a), state(*f_b)
    inner = a[0].conjugate() * b[0] + a[1].conjugate() * b[1]
    return abs(inner) ** 2
