"""
circuit.py - Gate-list circuit IR shared by every part of splitq.

A Circuit is an ordered list of GateOps on n qubits. It is the exchange
format between the simulator, the model graph, the provider daemons (JSON
form) and the attack demo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from settings import MAX_QUBITS


class InvalidCircuit(ValueError):
    """A gate or circuit violates the width / arity rules."""


class Gate(str, Enum):
    H = "h"
    X = "x"
    RX = "rx"
    RY = "ry"
    RZ = "rz"
    CX = "cx"
    CZ = "cz"

    @property
    def n_qubits(self) -> int:
        return 2 if self in (Gate.CX, Gate.CZ) else 1

    @property
    def n_params(self) -> int:
        return 1 if self in ROTATIONS else 0


ROTATIONS = frozenset({Gate.RX, Gate.RY, Gate.RZ})


@dataclass(frozen=True)
class GateOp:
    kind: Gate
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def validate(self, n_qubits: int) -> None:
        if len(self.qubits) != self.kind.n_qubits:
            raise InvalidCircuit(
                f"{self.kind.value} expects {self.kind.n_qubits} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise InvalidCircuit(f"{self.kind.value} repeats a qubit: {self.qubits}")
        for q in self.qubits:
            if not 0 <= q < n_qubits:
                raise InvalidCircuit(
                    f"{self.kind.value} on qubit {q} outside width {n_qubits}")
        if len(self.params) != self.kind.n_params:
            raise InvalidCircuit(
                f"{self.kind.value} expects {self.kind.n_params} param(s), got {len(self.params)}")

    def inverse(self) -> "GateOp":
        if self.kind in ROTATIONS:
            return GateOp(self.kind, self.qubits, (-self.params[0],))
        return self

    def is_inverse_of(self, other: "GateOp", tol: float = 1e-12) -> bool:
        if self.kind != other.kind or self.qubits != other.qubits:
            return False
        if self.kind in ROTATIONS:
            return abs(self.params[0] + other.params[0]) <= tol
        return True

    def to_dict(self) -> dict:
        return {"g": self.kind.value, "q": list(self.qubits), "p": list(self.params)}

    @classmethod
    def from_dict(cls, data: dict) -> "GateOp":
        try:
            kind = Gate(str(data["g"]).lower())
            qubits = tuple(int(q) for q in data["q"])
            params = tuple(float(p) for p in data.get("p", []))
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidCircuit(f"bad gate entry {data!r}: {e}") from e
        return cls(kind, qubits, params)


@dataclass
class Circuit:
    n_qubits: int
    ops: list[GateOp] = field(default_factory=list)

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise InvalidCircuit(f"width {self.n_qubits} outside 1..{MAX_QUBITS}")

    def validate(self) -> "Circuit":
        for op in self.ops:
            op.validate(self.n_qubits)
        return self

    def append(self, kind: Gate, qubits, params=()) -> "Circuit":
        op = GateOp(Gate(kind), tuple(qubits), tuple(float(p) for p in params))
        op.validate(self.n_qubits)
        self.ops.append(op)
        return self

    # Builder shortcuts (chainable)
    def h(self, q):
        return self.append(Gate.H, (q,))

    def x(self, q):
        return self.append(Gate.X, (q,))

    def rx(self, theta, q):
        return self.append(Gate.RX, (q,), (theta,))

    def ry(self, theta, q):
        return self.append(Gate.RY, (q,), (theta,))

    def rz(self, theta, q):
        return self.append(Gate.RZ, (q,), (theta,))

    def cx(self, c, t):
        return self.append(Gate.CX, (c, t))

    def cz(self, a, b):
        return self.append(Gate.CZ, (a, b))

    @property
    def rotation_indices(self) -> list[int]:
        """Op indices carrying a trainable/encoded angle, in op order."""
        return [i for i, op in enumerate(self.ops) if op.kind in ROTATIONS]

    @property
    def n_rotations(self) -> int:
        return len(self.rotation_indices)

    def with_params(self, index: int, theta: float) -> "Circuit":
        """Copy with the angle of op `index` replaced."""
        ops = list(self.ops)
        op = ops[index]
        ops[index] = GateOp(op.kind, op.qubits, (float(theta),))
        return Circuit(self.n_qubits, ops)

    def to_dict(self) -> dict:
        return {"n_qubits": self.n_qubits, "ops": [op.to_dict() for op in self.ops]}

    @classmethod
    def from_dict(cls, data: dict) -> "Circuit":
        try:
            n = int(data["n_qubits"])
            raw_ops = data["ops"]
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidCircuit(f"bad circuit object: {e}") from e
        circuit = cls(n, [GateOp.from_dict(op) for op in raw_ops])
        return circuit.validate()

    def __len__(self):
        return len(self.ops)


def compose(outer: Circuit, inner: Circuit) -> Circuit:
    """Operator product outer·inner: `inner` runs first, then `outer`."""
    if outer.n_qubits != inner.n_qubits:
        raise InvalidCircuit(
            f"width mismatch: {outer.n_qubits} vs {inner.n_qubits}")
    return Circuit(outer.n_qubits, list(inner.ops) + list(outer.ops))


def invert(circuit: Circuit) -> Circuit:
    """Reverse the op order and negate every rotation angle."""
    return Circuit(circuit.n_qubits, [op.inverse() for op in reversed(circuit.ops)])


def simplify(circuit: Circuit, tol: float = 1e-12) -> Circuit:
    """Gate-level peephole pass: cancel adjacent inverse pairs, merge
    adjacent same-axis rotations on one qubit, drop zero rotations.

    Only looks at the top of the stack, so ops on other qubits in between
    block a rewrite. Unitary-preserving up to global phase.
    """
    stack: list[GateOp] = []
    for op in circuit.ops:
        if op.kind in ROTATIONS and abs(op.params[0]) <= tol:
            continue
        if stack:
            top = stack[-1]
            if top.is_inverse_of(op, tol):
                stack.pop()
                continue
            if (op.kind in ROTATIONS and top.kind == op.kind
                    and top.qubits == op.qubits):
                merged = top.params[0] + op.params[0]
                stack.pop()
                if abs(math.remainder(merged, 4 * math.pi)) > tol:
                    stack.append(GateOp(op.kind, op.qubits, (merged,)))
                continue
        stack.append(op)
    return Circuit(circuit.n_qubits, stack)
