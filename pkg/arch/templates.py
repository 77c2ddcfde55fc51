"""
templates.py - Catalog of the node architecture templates.

Six options per computing node: id 0 is the empty template (the node is
removed from the model), ids 1-5 are 4-qubit variational blocks that
consume their parameter vector in op order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from qsim.circuit import Circuit, Gate
from settings import N_TEMPLATES, NODE_QUBITS, TEMPLATE_PARAM_COUNTS


class ParamCountError(ValueError):
    """Parameter vector length does not match the template."""


class UnknownTemplate(ValueError):
    """Template id outside the catalog."""


# Ring entanglers: 0→1, 1→2, 2→3, 3→0
_RING = [(q, (q + 1) % NODE_QUBITS) for q in range(NODE_QUBITS)]


def _layer(c: Circuit, kind: Gate, params: Sequence[float]) -> None:
    for q in range(NODE_QUBITS):
        c.append(kind, (q,), (params[q],))


def _ring(c: Circuit, kind: Gate) -> None:
    for a, b in _RING:
        c.append(kind, (a, b))


def _empty(params, c):
    pass


def _ry_cx(params, c):
    _layer(c, Gate.RY, params[0:4])
    _ring(c, Gate.CX)


def _rx_rz_cx(params, c):
    _layer(c, Gate.RX, params[0:4])
    _layer(c, Gate.RZ, params[4:8])
    _ring(c, Gate.CX)


def _ry_cz_ry(params, c):
    _layer(c, Gate.RY, params[0:4])
    _ring(c, Gate.CZ)
    _layer(c, Gate.RY, params[4:8])


def _ry_rz_cx_twice(params, c):
    for block in range(2):
        base = 8 * block
        _layer(c, Gate.RY, params[base:base + 4])
        _layer(c, Gate.RZ, params[base + 4:base + 8])
        _ring(c, Gate.CX)


def _rx_ry_rz_cx(params, c):
    _layer(c, Gate.RX, params[0:4])
    _layer(c, Gate.RY, params[4:8])
    _layer(c, Gate.RZ, params[8:12])
    _ring(c, Gate.CX)


@dataclass(frozen=True)
class ArchTemplate:
    id: int
    n_params: int
    builder: Callable[[Sequence[float], Circuit], None]
    description: str = ""

    def build(self, params: Sequence[float]) -> Circuit:
        if len(params) != self.n_params:
            raise ParamCountError(
                f"template {self.id} takes {self.n_params} params, got {len(params)}")
        c = Circuit(NODE_QUBITS)
        self.builder([float(p) for p in params], c)
        return c

    def signature(self) -> tuple:
        """Gate kinds and qubits with the angles left out."""
        return tuple((op.kind, op.qubits) for op in self.build(np.zeros(self.n_params)).ops)


_CATALOG = (
    ArchTemplate(0, TEMPLATE_PARAM_COUNTS[0], _empty, "empty"),
    ArchTemplate(1, TEMPLATE_PARAM_COUNTS[1], _ry_cx, "RY + CX ring"),
    ArchTemplate(2, TEMPLATE_PARAM_COUNTS[2], _rx_rz_cx, "RX + RZ + CX ring"),
    ArchTemplate(3, TEMPLATE_PARAM_COUNTS[3], _ry_cz_ry, "RY + CZ ring + RY"),
    ArchTemplate(4, TEMPLATE_PARAM_COUNTS[4], _ry_rz_cx_twice, "(RY + RZ + CX ring) x2"),
    ArchTemplate(5, TEMPLATE_PARAM_COUNTS[5], _rx_ry_rz_cx, "RX + RY + RZ + CX ring"),
)
assert len(_CATALOG) == N_TEMPLATES


def catalog() -> tuple[ArchTemplate, ...]:
    return _CATALOG


def get_template(template_id: int) -> ArchTemplate:
    if isinstance(template_id, bool) or not isinstance(template_id, (int, np.integer)) \
            or not 0 <= template_id < N_TEMPLATES:
        raise UnknownTemplate(f"unknown template id {template_id!r}")
    return _CATALOG[int(template_id)]


def n_params(template_id: int) -> int:
    return get_template(template_id).n_params


def instantiate_template(template_id: int, params: Sequence[float]) -> Circuit:
    """Deterministic 4-qubit circuit for a catalog entry."""
    return get_template(template_id).build(params)


def match_template(circuit: Circuit) -> int | None:
    """Catalog id whose gate structure equals `circuit`, ignoring angles.

    The empty template is never returned; an empty circuit gives None.
    """
    structure = tuple((op.kind, op.qubits) for op in circuit.ops)
    for template in _CATALOG[1:]:
        if template.signature() == structure:
            return template.id
    return None
