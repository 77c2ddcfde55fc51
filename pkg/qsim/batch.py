"""
batch.py - Vectorised pure-state evolution over a batch of inputs.

A batch circuit is a list of BatchOps whose rotation angle is either one
scalar shared by all samples (trainable parameters) or an array with one
angle per sample (encoders). Used by training and exact local inference;
noisy execution stays on the per-circuit density path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qsim.circuit import Circuit, Gate, ROTATIONS
from qsim.simulator import apply_gate, z_expectations
from settings import PARAM_SHIFT


@dataclass(frozen=True)
class BatchOp:
    kind: Gate
    qubits: tuple[int, ...]
    angle: object = None        # float, (B,) array, or None

    def shifted(self, delta: float) -> "BatchOp":
        return BatchOp(self.kind, self.qubits, np.asarray(self.angle) + delta)


def from_circuit(circuit: Circuit) -> list[BatchOp]:
    return [BatchOp(op.kind, op.qubits, op.params[0] if op.kind in ROTATIONS else None)
            for op in circuit.ops]


def _apply(t: np.ndarray, op: BatchOp) -> np.ndarray:
    return apply_gate(t, op.kind, op.qubits, op.angle, offset=1)


def _initial(n_qubits: int, batch: int) -> np.ndarray:
    t = np.zeros((batch, 2 ** n_qubits), dtype=complex)
    t[:, 0] = 1.0
    return t.reshape((batch,) + (2,) * n_qubits)


def _expect(t: np.ndarray, n_qubits: int) -> np.ndarray:
    batch = t.shape[0]
    return z_expectations(np.abs(t.reshape(batch, -1)) ** 2, n_qubits)


def expectations(n_qubits: int, ops: list[BatchOp], batch: int) -> np.ndarray:
    """(B, n) matrix of per-qubit ⟨Z⟩."""
    t = _initial(n_qubits, batch)
    for op in ops:
        t = _apply(t, op)
    return _expect(t, n_qubits)


def expectations_and_jacobian(n_qubits: int, ops: list[BatchOp], batch: int,
                              indices: list[int]) -> tuple[np.ndarray, np.ndarray]:
    """Forward ⟨Z⟩ plus parameter-shift derivatives w.r.t. the angles of
    the ops at `indices`.

    Returns (E, J) with E of shape (B, n) and J of shape (B, n, len(indices)),
    J[b, q, k] = d⟨Z_q⟩/dθ_k for sample b. Prefix states are cached so each
    shifted run only replays the suffix.
    """
    prefix = [_initial(n_qubits, batch)]
    for op in ops:
        prefix.append(_apply(prefix[-1], op))
    values = _expect(prefix[-1], n_qubits)

    jac = np.zeros((batch, n_qubits, len(indices)))
    for col, k in enumerate(indices):
        if ops[k].kind not in ROTATIONS:
            raise ValueError(f"op {k} ({ops[k].kind.value}) has no angle")
        shifted = []
        for delta in (PARAM_SHIFT, -PARAM_SHIFT):
            t = _apply(prefix[k], ops[k].shifted(delta))
            for op in ops[k + 1:]:
                t = _apply(t, op)
            shifted.append(_expect(t, n_qubits))
        jac[:, :, col] = (shifted[0] - shifted[1]) / 2.0
    return values, jac
