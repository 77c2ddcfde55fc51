"""
simulator.py - Exact pure-state and noisy density-matrix simulation.

Qubit q maps to tensor axis q (qubit 0 is the most significant bit of a
basis index). Pure states are (2,)*n tensors, density matrices are
(2,)*2n tensors with row axes 0..n-1 and column axes n..2n-1.

Noise model: symmetric depolarizing channel after every gate on the gate's
qubits (p1 for 1-qubit gates, p2 jointly on both qubits of CX/CZ), plus
classical readout bit flips at measurement.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass

import numpy as np

from qsim.circuit import Circuit, Gate, InvalidCircuit, ROTATIONS
from settings import DENSITY_MAX_QUBITS, EXACT, NORM_TOL


class InvalidShots(ValueError):
    """Shot count is neither EXACT nor a positive integer."""


# ──────────────────────────────────────────────
# Gate kernels (shared with qsim/batch.py)
# ──────────────────────────────────────────────
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)


def gate_matrix(kind: Gate, theta=None) -> np.ndarray:
    """2x2 matrix for a 1-qubit gate. `theta` may be an array of angles,
    giving a stack of matrices with shape theta.shape + (2, 2)."""
    if kind is Gate.H:
        return _H
    if kind is Gate.X:
        return _X
    half = np.asarray(theta, dtype=float) / 2
    c, s = np.cos(half), np.sin(half)
    m = np.zeros(half.shape + (2, 2), dtype=complex)
    if kind is Gate.RX:
        m[..., 0, 0] = c
        m[..., 0, 1] = -1j * s
        m[..., 1, 0] = -1j * s
        m[..., 1, 1] = c
    elif kind is Gate.RY:
        m[..., 0, 0] = c
        m[..., 0, 1] = -s
        m[..., 1, 0] = s
        m[..., 1, 1] = c
    elif kind is Gate.RZ:
        m[..., 0, 0] = np.exp(-1j * half)
        m[..., 1, 1] = np.exp(1j * half)
    else:
        raise InvalidCircuit(f"{kind.value} is not a 1-qubit gate")
    return m


def apply_matrix(tensor: np.ndarray, matrix: np.ndarray, axis: int) -> np.ndarray:
    """Contract a 2x2 matrix into one tensor axis. A (B, 2, 2) stack applies
    one matrix per entry of the leading batch axis."""
    moved = np.moveaxis(tensor, axis, -1)
    if matrix.ndim == 3:
        out = np.einsum("bij,b...j->b...i", matrix, moved)
    else:
        out = moved @ matrix.T
    return np.moveaxis(out, -1, axis)


def apply_cx(tensor: np.ndarray, control: int, target: int) -> np.ndarray:
    out = tensor.copy()
    sel = [slice(None)] * tensor.ndim
    sel[control] = 1
    sel = tuple(sel)
    # the control axis disappears from the sliced view
    t_axis = target - 1 if target > control else target
    out[sel] = np.flip(tensor[sel], axis=t_axis)
    return out


def apply_cz(tensor: np.ndarray, a: int, b: int) -> np.ndarray:
    out = tensor.copy()
    sel = [slice(None)] * tensor.ndim
    sel[a] = 1
    sel[b] = 1
    out[tuple(sel)] *= -1
    return out


def apply_gate(tensor, kind: Gate, qubits, theta=None, offset: int = 0,
               conjugate: bool = False) -> np.ndarray:
    """Apply one gate on axes offset+q. `conjugate` applies U* (used on the
    column axes of a density tensor)."""
    if kind is Gate.CX:
        return apply_cx(tensor, offset + qubits[0], offset + qubits[1])
    if kind is Gate.CZ:
        return apply_cz(tensor, offset + qubits[0], offset + qubits[1])
    m = gate_matrix(kind, theta)
    if conjugate:
        m = m.conj()
    return apply_matrix(tensor, m, offset + qubits[0])


def z_expectations(probs: np.ndarray, n_qubits: int) -> np.ndarray:
    """Per-qubit <Z> from basis probabilities; leading axes are kept."""
    lead = probs.shape[:-1]
    p = probs.reshape(lead + (2,) * n_qubits)
    out = np.empty(lead + (n_qubits,))
    for q in range(n_qubits):
        marg = np.moveaxis(p, len(lead) + q, -1).reshape(lead + (-1, 2)).sum(axis=-2)
        out[..., q] = marg[..., 0] - marg[..., 1]
    return out


# ──────────────────────────────────────────────
# States and noise
# ──────────────────────────────────────────────
@dataclass
class PureState:
    amplitudes: np.ndarray

    @property
    def n_qubits(self) -> int:
        return int(round(math.log2(self.amplitudes.size)))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def validate(self, tol: float = NORM_TOL) -> "PureState":
        norm = float(np.sum(self.probabilities()))
        if abs(norm - 1.0) > tol:
            raise ValueError(f"state norm {norm} != 1")
        return self


@dataclass
class MixedState:
    density: np.ndarray

    @property
    def n_qubits(self) -> int:
        return int(round(math.log2(self.density.shape[0])))

    def probabilities(self) -> np.ndarray:
        return np.clip(np.real(np.diag(self.density)), 0.0, None)

    def validate(self, tol: float = NORM_TOL) -> "MixedState":
        rho = self.density
        if np.max(np.abs(rho - rho.conj().T)) > tol:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > tol:
            raise ValueError(f"density trace {tr} != 1")
        if np.min(np.linalg.eigvalsh(rho)) < -tol:
            raise ValueError("density matrix is not positive semidefinite")
        return self


@dataclass(frozen=True)
class NoiseSpec:
    p1: float = 0.0
    p2: float = 0.0
    readout_flip: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p1 <= 1.0 or not 0.0 <= self.p2 <= 1.0:
            raise ValueError(f"depolarizing probabilities out of [0,1]: {self}")
        if not 0.0 <= self.readout_flip <= 0.5:
            raise ValueError(f"readout flip out of [0,0.5]: {self}")

    @property
    def is_ideal(self) -> bool:
        return self.p1 == 0.0 and self.p2 == 0.0 and self.readout_flip == 0.0

    def to_dict(self) -> dict:
        return {"p1": self.p1, "p2": self.p2, "readout_flip": self.readout_flip}


IDEAL = NoiseSpec()


# ──────────────────────────────────────────────
# Simulation
# ──────────────────────────────────────────────
def simulate_pure(circuit: Circuit, initial: PureState | None = None) -> PureState:
    """(∏ gates)|0…0⟩ in op order, or applied to `initial` when given."""
    circuit.validate()
    n = circuit.n_qubits
    if initial is None:
        psi = np.zeros(2 ** n, dtype=complex)
        psi[0] = 1.0
    else:
        if initial.amplitudes.size != 2 ** n:
            raise InvalidCircuit(
                f"initial state has {initial.amplitudes.size} amplitudes, circuit width {n}")
        psi = np.asarray(initial.amplitudes, dtype=complex).copy()
    t = psi.reshape((2,) * n)
    for op in circuit.ops:
        theta = op.params[0] if op.kind in ROTATIONS else None
        t = apply_gate(t, op.kind, op.qubits, theta)
    return PureState(t.reshape(-1))


def _depolarize(t: np.ndarray, qubits, p: float, n: int) -> np.ndarray:
    """(1-p)·ρ + p·Tr_Q(ρ) ⊗ I/2^k on the qubits Q."""
    letters = string.ascii_letters
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    traced = list(cols)
    for q in qubits:
        traced[q] = rows[q]
    kept = [rows[i] for i in range(n) if i not in qubits] + \
           [cols[i] for i in range(n) if i not in qubits]
    reduced = np.einsum("".join(rows + traced) + "->" + "".join(kept), t)
    eyes = [np.eye(2)] * len(qubits)
    spec = ",".join(["".join(kept)] + [rows[q] + cols[q] for q in qubits])
    mixed = np.einsum(spec + "->" + "".join(rows + cols), reduced, *eyes)
    return (1.0 - p) * t + (p / 2 ** len(qubits)) * mixed


def simulate_mixed(circuit: Circuit, noise: NoiseSpec = IDEAL) -> MixedState:
    """Density-matrix evolution with depolarizing noise after each gate.
    Readout error is not part of the state; see simulate_noisy."""
    circuit.validate()
    n = circuit.n_qubits
    if n > DENSITY_MAX_QUBITS:
        raise InvalidCircuit(f"density simulation limited to {DENSITY_MAX_QUBITS} qubits")
    rho = np.zeros((2 ** n, 2 ** n), dtype=complex)
    rho[0, 0] = 1.0
    t = rho.reshape((2,) * (2 * n))
    for op in circuit.ops:
        theta = op.params[0] if op.kind in ROTATIONS else None
        t = apply_gate(t, op.kind, op.qubits, theta)
        t = apply_gate(t, op.kind, op.qubits, theta, offset=n, conjugate=True)
        p = noise.p2 if op.kind.n_qubits == 2 else noise.p1
        if p > 0.0:
            t = _depolarize(t, op.qubits, p, n)
    return MixedState(t.reshape(2 ** n, 2 ** n))


def expectations_z(state: PureState | MixedState) -> np.ndarray:
    """Vector of ⟨Z_i⟩, one entry per qubit."""
    return z_expectations(state.probabilities(), state.n_qubits)


def check_shots(shots) -> None:
    if shots == EXACT:
        return
    if isinstance(shots, bool) or not isinstance(shots, (int, np.integer)) or shots <= 0:
        raise InvalidShots(f"shots must be {EXACT!r} or a positive integer, got {shots!r}")


def sample_expectations(probs: np.ndarray, n_qubits: int, shots: int,
                        readout_flip: float, seed: int) -> np.ndarray:
    """Estimate ⟨Z_i⟩ from `shots` sampled bitstrings with per-bit readout flips."""
    rng = np.random.default_rng(seed)
    p = np.clip(np.asarray(probs, dtype=float), 0.0, None)
    p = p / p.sum()
    outcomes = rng.choice(p.size, size=shots, p=p)
    bits = (outcomes[:, None] >> np.arange(n_qubits - 1, -1, -1)) & 1
    if readout_flip > 0.0:
        bits = bits ^ (rng.random((shots, n_qubits)) < readout_flip)
    return (1.0 - 2.0 * bits).mean(axis=0)


def simulate_noisy(circuit: Circuit, noise: NoiseSpec, shots=EXACT, seed: int = 0) -> np.ndarray:
    """Per-qubit ⟨Z⟩ under `noise`; exact or estimated from seeded shots."""
    check_shots(shots)
    state = simulate_mixed(circuit, noise)
    if shots == EXACT:
        return (1.0 - 2.0 * noise.readout_flip) * expectations_z(state)
    return sample_expectations(state.probabilities(), circuit.n_qubits,
                               int(shots), noise.readout_flip, seed)


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Dense 2^n x 2^n unitary of the circuit."""
    circuit.validate()
    n = circuit.n_qubits
    dim = 2 ** n
    # row k of the batch is the basis state |k>
    t = np.eye(dim, dtype=complex).reshape((dim,) + (2,) * n)
    for op in circuit.ops:
        theta = op.params[0] if op.kind in ROTATIONS else None
        t = apply_gate(t, op.kind, op.qubits, theta, offset=1)
    return t.reshape(dim, dim).T
