"""
gradients.py - Parameter-shift gradients on exact simulation.

Every rotation in the gate set has a generator with eigenvalues ±1/2, so
d⟨Z⟩/dθ = [⟨Z⟩(θ+π/2) - ⟨Z⟩(θ-π/2)] / 2 holds exactly.
"""

import numpy as np

from qsim import batch
from qsim.circuit import Circuit


class InvalidObservable(ValueError):
    """Observable qubit index outside the circuit width."""


def parameter_shift_grad(circuit: Circuit, observable: int) -> np.ndarray:
    """d⟨Z_observable⟩/dθ_k for every rotation angle, in op order."""
    circuit.validate()
    if not 0 <= observable < circuit.n_qubits:
        raise InvalidObservable(
            f"observable qubit {observable} outside width {circuit.n_qubits}")
    indices = circuit.rotation_indices
    if not indices:
        return np.zeros(0)
    _, jac = batch.expectations_and_jacobian(
        circuit.n_qubits, batch.from_circuit(circuit), 1, indices)
    return jac[0, observable, :]
