"""
Circuit intermediate representation and its "hqc v1" text format.

A circuit is an ordered list of instructions, each tagged with the block it
belongs to (encoding, unitary transformation, measurement). Blocks must appear
in that order. Circuits are immutable; ``append`` returns a new circuit.

Text format, one statement per line, ``#`` starts a comment::

    hqc 1
    qubits 1
    clbits 1
    block encoding
    x 0
    block measurement
    measure 0 0
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Iterable, Mapping

from .errors import CircuitError

__all__ = [
    "Gate", "Block", "Instruction", "QuantumCircuit",
    "IndexOutOfRange", "BlockOrderViolation", "DuplicateClassicalBit", "MeasurementPlacement",
    "CircuitParseError", "CircuitSyntaxError", "UnknownGate", "ArityMismatch", "HeaderMissing",
    "u3", "x", "h", "cswap", "measure",
    "append", "serialize", "parse", "dimensions",
]

FORMAT_VERSION = 1


class Gate(Enum):
    U3 = "u3"
    X = "x"
    H = "h"
    CSWAP = "cswap"
    MEASURE = "measure"

    @property
    def n_qubits(self) -> int:
        return 3 if self is Gate.CSWAP else 1

    @property
    def n_params(self) -> int:
        return 3 if self is Gate.U3 else 0


class Block(IntEnum):
    ENCODING = 0
    UNITARY = 1
    MEASUREMENT = 2

    @property
    def label(self) -> str:
        return self.name.lower()


class IndexOutOfRange(CircuitError):
    pass


class BlockOrderViolation(CircuitError):
    pass


class DuplicateClassicalBit(CircuitError):
    pass


class MeasurementPlacement(CircuitError):
    """MEASURE outside the measurement block, or a gate inside it."""


@dataclass(frozen=True)
class Instruction:
    gate: Gate
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()
    clbit: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(self.qubits) != self.gate.n_qubits:
            raise CircuitError(f"{self.gate.value} acts on {self.gate.n_qubits} qubit(s), got {len(self.qubits)}")
        if len(self.params) != self.gate.n_params:
            raise CircuitError(f"{self.gate.value} takes {self.gate.n_params} parameter(s), got {len(self.params)}")
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"repeated qubit in {self.gate.value} {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise IndexOutOfRange(f"negative qubit index in {self.qubits}")
        if not all(math.isfinite(p) for p in self.params):
            raise CircuitError(f"non-finite angle in {self.params}")
        if (self.gate is Gate.MEASURE) != (self.clbit is not None):
            raise CircuitError("a classical bit is required for measure and forbidden otherwise")
        if self.clbit is not None and self.clbit < 0:
            raise IndexOutOfRange(f"negative classical bit {self.clbit}")


def u3(q: int, theta: float, phi: float, lam: float = 0.0) -> Instruction:
    return Instruction(Gate.U3, (q,), (theta, phi, lam))


def x(q: int) -> Instruction:
    return Instruction(Gate.X, (q,))


def h(q: int) -> Instruction:
    return Instruction(Gate.H, (q,))


def cswap(control: int, a: int, b: int) -> Instruction:
    return Instruction(Gate.CSWAP, (control, a, b))


def measure(q: int, c: int) -> Instruction:
    return Instruction(Gate.MEASURE, (q,), clbit=c)


_TOKEN = re.compile(r"^[^\s=#]+$")
_VALUE = re.compile(r"^[^\s#]+$")


@dataclass(frozen=True)
class QuantumCircuit:
    num_qubits: int
    num_clbits: int = 0
    instructions: tuple[tuple[Instruction, Block], ...] = ()
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.num_qubits < 0 or self.num_clbits < 0:
            raise CircuitError("register sizes must be non-negative")
        meta = dict(self.metadata)
        for k, v in meta.items():
            if not (isinstance(k, str) and _TOKEN.match(k)) or not (isinstance(v, str) and _VALUE.match(v)):
                raise CircuitError(f"metadata entries must be non-empty tokens without whitespace: {k!r}={v!r}")
        object.__setattr__(self, "metadata", meta)
        instrs = tuple((i, Block(b)) for i, b in self.instructions)
        # validate incrementally so ordering and clbit rules see the prefix
        object.__setattr__(self, "instructions", ())
        for instr, block in instrs:
            self._check(instr, block)
            object.__setattr__(self, "instructions", self.instructions + ((instr, block),))

    def __hash__(self):
        return hash((self.num_qubits, self.num_clbits, self.instructions, tuple(self.metadata.items())))

    def __len__(self) -> int:
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    @property
    def last_block(self) -> Block | None:
        return self.instructions[-1][1] if self.instructions else None

    def block(self, block: Block) -> list[Instruction]:
        return [i for i, b in self.instructions if b == block]

    def measure_map(self) -> list[tuple[int, int]]:
        """(qubit, clbit) pairs in instruction order."""
        return [(i.qubits[0], i.clbit) for i, _ in self.instructions if i.gate is Gate.MEASURE]

    def _check(self, instr: Instruction, block: Block) -> None:
        bad = [q for q in instr.qubits if q >= self.num_qubits]
        if bad:
            raise IndexOutOfRange(f"qubit {bad[0]} out of range for {self.num_qubits}-qubit circuit")
        last = self.last_block
        if last is not None and block < last:
            raise BlockOrderViolation(f"cannot append to {block.label} block after {last.label}")
        if (instr.gate is Gate.MEASURE) != (block is Block.MEASUREMENT):
            raise MeasurementPlacement(f"{instr.gate.value} cannot be placed in the {block.label} block")
        if instr.clbit is not None:
            if instr.clbit >= self.num_clbits:
                raise IndexOutOfRange(f"classical bit {instr.clbit} out of range for {self.num_clbits} clbits")
            if any(i.clbit == instr.clbit for i, _ in self.instructions):
                raise DuplicateClassicalBit(f"classical bit {instr.clbit} already written")

    def append(self, instr: Instruction, block: Block) -> QuantumCircuit:
        block = Block(block)
        self._check(instr, block)
        new = object.__new__(QuantumCircuit)
        object.__setattr__(new, "num_qubits", self.num_qubits)
        object.__setattr__(new, "num_clbits", self.num_clbits)
        object.__setattr__(new, "instructions", self.instructions + ((instr, block),))
        object.__setattr__(new, "metadata", dict(self.metadata))
        return new

    def extend(self, instrs: Iterable[Instruction], block: Block) -> QuantumCircuit:
        circuit = self
        for instr in instrs:
            circuit = circuit.append(instr, block)
        return circuit

    def with_metadata(self, **meta: str) -> QuantumCircuit:
        return QuantumCircuit(self.num_qubits, self.num_clbits, self.instructions, {**self.metadata, **meta})


def append(circuit: QuantumCircuit, instr: Instruction, block: Block) -> QuantumCircuit:
    return circuit.append(instr, block)


def _fmt_angle(value: float) -> str:
    # 17 significant digits round-trip any binary64 exactly
    return "%.17g" % value


def serialize(circuit: QuantumCircuit) -> str:
    lines = [f"hqc {FORMAT_VERSION}", f"qubits {circuit.num_qubits}", f"clbits {circuit.num_clbits}"]
    if circuit.metadata:
        lines.append("meta " + " ".join(f"{k}={v}" for k, v in circuit.metadata.items()))
    current = None
    for instr, block in circuit.instructions:
        if block != current:
            lines.append(f"block {block.label}")
            current = block
        if instr.gate is Gate.MEASURE:
            lines.append(f"measure {instr.qubits[0]} {instr.clbit}")
        else:
            args = [str(q) for q in instr.qubits] + [_fmt_angle(p) for p in instr.params]
            lines.append(" ".join([instr.gate.value, *args]))
    return "\n".join(lines) + "\n"


class CircuitParseError(CircuitError):
    def __init__(self, message: str, lineno: int | None = None, token: str | None = None):
        self.lineno = lineno
        self.token = token
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(where + message + (f" (at {token!r})" if token is not None else ""))


class CircuitSyntaxError(CircuitParseError):
    pass


class UnknownGate(CircuitParseError):
    pass


class ArityMismatch(CircuitParseError):
    pass


class HeaderMissing(CircuitParseError):
    pass


_BLOCKS = {b.label: b for b in Block}
_GATES = {g.value: g for g in Gate}


def _int(token: str, lineno: int) -> int:
    if not re.fullmatch(r"[0-9]+", token):
        raise CircuitSyntaxError("expected a non-negative integer", lineno, token)
    return int(token)


def _angle(token: str, lineno: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise CircuitSyntaxError("expected an angle in radians", lineno, token) from None
    if not math.isfinite(value):
        raise CircuitSyntaxError("angle must be finite", lineno, token)
    return value


def parse(text: str) -> QuantumCircuit:
    statements = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if tokens:
            statements.append((lineno, tokens))

    if not statements or statements[0][1][0] != "hqc":
        lineno = statements[0][0] if statements else 1
        raise HeaderMissing("document must start with 'hqc 1'", lineno)
    lineno, tokens = statements[0]
    if len(tokens) != 2 or tokens[1] != str(FORMAT_VERSION):
        raise CircuitSyntaxError(f"unsupported header, expected 'hqc {FORMAT_VERSION}'", lineno, " ".join(tokens))

    sizes: dict[str, int] = {}
    metadata: dict[str, str] = {}
    circuit: QuantumCircuit | None = None
    block: Block | None = None

    for lineno, tokens in statements[1:]:
        head, args = tokens[0], tokens[1:]
        if head in ("qubits", "clbits"):
            if circuit is not None or head in sizes:
                raise CircuitSyntaxError(f"'{head}' must appear once, before any block", lineno, head)
            if len(args) != 1:
                raise ArityMismatch(f"'{head}' takes one integer", lineno, head)
            sizes[head] = _int(args[0], lineno)
        elif head == "meta":
            if circuit is not None:
                raise CircuitSyntaxError("'meta' must appear before any block", lineno, head)
            for item in args:
                key, sep, value = item.partition("=")
                if not sep or not key or not value:
                    raise CircuitSyntaxError("metadata must be key=value", lineno, item)
                metadata[key] = value
        elif head == "block":
            if len(args) != 1:
                raise ArityMismatch("'block' takes one name", lineno, head)
            if args[0] not in _BLOCKS:
                raise CircuitSyntaxError("unknown block name", lineno, args[0])
            if "qubits" not in sizes:
                raise CircuitSyntaxError("'qubits' must be declared before the first block", lineno, head)
            if circuit is None:
                try:
                    circuit = QuantumCircuit(sizes["qubits"], sizes.get("clbits", 0), (), metadata)
                except CircuitError as exc:
                    raise CircuitSyntaxError(str(exc), lineno) from None
            new_block = _BLOCKS[args[0]]
            if block is not None and new_block < block:
                raise CircuitSyntaxError(f"block {new_block.label} cannot follow {block.label}", lineno, args[0])
            block = new_block
        elif head in _GATES:
            if circuit is None or block is None:
                raise CircuitSyntaxError("instruction outside of a block", lineno, head)
            gate = _GATES[head]
            if gate is Gate.MEASURE:
                if len(args) != 2:
                    raise ArityMismatch("measure takes <qubit> <clbit>", lineno, " ".join(tokens))
                instr_args = dict(qubits=(_int(args[0], lineno),), clbit=_int(args[1], lineno))
            else:
                expected = gate.n_qubits + gate.n_params
                if len(args) != expected:
                    raise ArityMismatch(f"{head} takes {expected} argument(s), got {len(args)}", lineno, " ".join(tokens))
                instr_args = dict(
                    qubits=tuple(_int(a, lineno) for a in args[: gate.n_qubits]),
                    params=tuple(_angle(a, lineno) for a in args[gate.n_qubits:]),
                )
            try:
                circuit = circuit.append(Instruction(gate, **instr_args), block)
            except CircuitError as exc:
                raise CircuitSyntaxError(str(exc), lineno, " ".join(tokens)) from None
        else:
            raise UnknownGate("unknown statement", lineno, head)

    if circuit is None:
        if "qubits" not in sizes:
            raise CircuitSyntaxError("missing 'qubits' declaration", statements[-1][0])
        try:
            circuit = QuantumCircuit(sizes["qubits"], sizes.get("clbits", 0), (), metadata)
        except CircuitError as exc:
            raise CircuitSyntaxError(str(exc), statements[-1][0]) from None
    return circuit


def dimensions(circuit: QuantumCircuit) -> tuple[int, int]:
    """Return (width, depth); instructions sharing a qubit cannot run in parallel."""
    level = [0] * circuit.num_qubits
    for instr, _ in circuit.instructions:
        d = 1 + max(level[q] for q in instr.qubits)
        for q in instr.qubits:
            level[q] = d
    return circuit.num_qubits, max(level, default=0)
