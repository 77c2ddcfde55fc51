"""
encoders.py - Angle encoders for raw features and for intermediate node outputs.

Two encoders feed a computing node:

    data encoder        16 features -> 4 rotation layers (RY, RZ, RX, RY),
                        feature f[4*l + q] is the angle of layer l on qubit q
    intermediate        one RY layer per parent, angle pi * <Z_q> of that
                        parent, parents stacked in ascending node id order

Each encoder has a Circuit form (single sample, used for the wire and the
attack demo) and a BatchOp form (one angle array per gate, used by the
vectorised trainer).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from qsim.batch import BatchOp
from qsim.circuit import Circuit, Gate
from settings import DATA_AXES, DATA_FEATURES, INTERMEDIATE_ANGLE_SCALE, NODE_QUBITS

# Expectations computed in floating point may overshoot ±1 by rounding
_RANGE_TOL = 1e-9


class EncodingError(ValueError):
    """Encoder input has the wrong shape or out-of-range values."""


class EncoderKind(str, Enum):
    DATA16 = "data16"
    INTERMEDIATE4 = "intermediate4"


@dataclass(frozen=True)
class EncoderSpec:
    kind: EncoderKind
    axis_schedule: tuple[Gate, ...] = field(default=())

    @property
    def n_inputs(self) -> int:
        return DATA_FEATURES if self.kind is EncoderKind.DATA16 else NODE_QUBITS


DATA_ENCODER = EncoderSpec(EncoderKind.DATA16, tuple(Gate(a) for a in DATA_AXES))
INTERMEDIATE_ENCODER = EncoderSpec(EncoderKind.INTERMEDIATE4, (Gate.RY,))


def _data_angles(features) -> np.ndarray:
    f = np.asarray(features, dtype=float)
    if f.shape[-1:] != (DATA_FEATURES,):
        raise EncodingError(f"data encoder takes {DATA_FEATURES} features, got shape {f.shape}")
    return f


def _intermediate_angles(outputs) -> np.ndarray:
    o = np.asarray(outputs, dtype=float)
    if o.shape[-1:] != (NODE_QUBITS,):
        raise EncodingError(f"intermediate encoder takes {NODE_QUBITS} values, got shape {o.shape}")
    if not np.all(np.isfinite(o)) or np.any(np.abs(o) > 1.0 + _RANGE_TOL):
        raise EncodingError(f"intermediate values must lie in [-1, 1]: {o}")
    return INTERMEDIATE_ANGLE_SCALE * np.clip(o, -1.0, 1.0)


def data_encoder(features: Sequence[float]) -> Circuit:
    """D(X): 4 single-qubit rotation layers over 16 features."""
    f = _data_angles(features)
    if f.ndim != 1:
        raise EncodingError(f"expected one feature vector, got shape {f.shape}")
    c = Circuit(NODE_QUBITS)
    for layer, axis in enumerate(DATA_ENCODER.axis_schedule):
        for q in range(NODE_QUBITS):
            c.append(axis, (q,), (f[NODE_QUBITS * layer + q],))
    return c


def intermediate_encoder(parent_outputs: Sequence[Sequence[float]]) -> Circuit:
    """E(O): one RY layer per parent output vector, in the given order."""
    c = Circuit(NODE_QUBITS)
    for outputs in parent_outputs:
        angles = _intermediate_angles(outputs)
        for q in range(NODE_QUBITS):
            c.ry(angles[q], q)
    return c


def data_encoder_ops(features: np.ndarray) -> list[BatchOp]:
    """Batched D(X) for a (B, 16) feature matrix."""
    f = _data_angles(features)
    if f.ndim != 2:
        raise EncodingError(f"expected a (B, {DATA_FEATURES}) matrix, got shape {f.shape}")
    return [BatchOp(axis, (q,), f[:, NODE_QUBITS * layer + q])
            for layer, axis in enumerate(DATA_ENCODER.axis_schedule)
            for q in range(NODE_QUBITS)]


def intermediate_encoder_ops(parent_outputs: Sequence[np.ndarray]) -> list[BatchOp]:
    """Batched E(O) for a list of (B, 4) parent output matrices."""
    ops = []
    for outputs in parent_outputs:
        angles = _intermediate_angles(outputs)
        ops.extend(BatchOp(Gate.RY, (q,), angles[:, q]) for q in range(NODE_QUBITS))
    return ops
