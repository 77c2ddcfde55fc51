"""
conftest.py - Shared pytest fixtures.

Putting this file at the repository root also puts the root on sys.path,
so tests import packages the same way main.py does.
"""

import numpy as np
import pytest

from qsim.circuit import Circuit, Gate


def make_random_circuit(rng, n_qubits=4, n_ops=20, rotations_only=False):
    """Random circuit over the full gate set."""
    kinds = [Gate.RX, Gate.RY, Gate.RZ] if rotations_only else list(Gate)
    c = Circuit(n_qubits)
    for _ in range(n_ops):
        kind = kinds[rng.integers(len(kinds))]
        if kind.n_qubits == 2:
            if n_qubits < 2:
                continue
            a, b = rng.choice(n_qubits, size=2, replace=False)
            c.append(kind, (int(a), int(b)))
        elif kind.n_params:
            c.append(kind, (int(rng.integers(n_qubits)),), (rng.uniform(-np.pi, np.pi),))
        else:
            c.append(kind, (int(rng.integers(n_qubits)),))
    return c


def make_rotation_circuit(rng, n_qubits=4, n_params=12):
    """Circuit with exactly `n_params` rotations interleaved with CX/CZ/H."""
    c = Circuit(n_qubits)
    for i in range(n_params):
        kind = (Gate.RX, Gate.RY, Gate.RZ)[rng.integers(3)]
        c.append(kind, (int(rng.integers(n_qubits)),), (rng.uniform(-np.pi, np.pi),))
        if i % 3 == 2:
            a, b = rng.choice(n_qubits, size=2, replace=False)
            c.append(Gate.CX if i % 2 else Gate.CZ, (int(a), int(b)))
        if i % 4 == 1:
            c.h(int(rng.integers(n_qubits)))
    return c


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_circuit():
    return make_random_circuit


@pytest.fixture
def rotation_circuit():
    return make_rotation_circuit


@pytest.fixture
def synth2():
    from data.datasets import prepare
    return prepare("synth2", seed=3)


@pytest.fixture
def synth4():
    from data.datasets import prepare
    return prepare("synth4", seed=5)


@pytest.fixture
def loopback_fleet():
    from networking.dispatch import Fleet
    from networking.net_state import default_profiles
    fleet = Fleet.loopback(default_profiles(3))
    yield fleet
    fleet.close()


@pytest.fixture
def ideal_fleet():
    """Three providers with zero noise (transparency checks)."""
    from networking.dispatch import Fleet
    from networking.net_state import ProviderProfile
    from qsim.simulator import IDEAL
    profiles = [ProviderProfile(f"qcp{i}", [(f"b{i}", IDEAL)]) for i in (1, 2, 3)]
    fleet = Fleet.loopback(profiles)
    yield fleet
    fleet.close()
