"""
test_redteam.py - Probe inversion, log recovery and both attack demos.

Uso:
    pytest redteam
"""

import numpy as np
import pytest

from arch.encoders import data_encoder, intermediate_encoder
from arch.templates import instantiate_template, match_template
from model.backbone import build_backbone
from model.design import DATA, EmptyModel, NoDataPath, materialize
from networking.dispatch import Fleet, execute_distributed
from networking.net_state import ProviderProfile, default_profiles
from qsim.circuit import Circuit, InvalidCircuit, compose
from qsim.simulator import IDEAL, NoiseSpec
from redteam.attack import (
    FOREIGN, LoggedJob, RecoveryError, distributed_attack, peel_probe, read_circuit_log,
    recover_provider, single_provider_attack, steal, unitary_fidelity,
)
from settings import TEMPLATE_PARAM_COUNTS

QCP1 = ProviderProfile("qcp1", [("b1", NoiseSpec(0.001, 0.01, 0.02))])


def _random_single_provider_model(seed):
    rng = np.random.default_rng(seed)
    bb = build_backbone(3)
    while True:
        arch = {n: int(rng.integers(0, 6)) for n in bb.nodes}
        try:
            return materialize(bb, arch, {n: "qcp1" for n in bb.nodes}, seed=seed)
        except (EmptyModel, NoDataPath):
            continue


# ── steal / fidelity ──

def test_steal_recovers_random_circuits(rng, random_circuit):
    for _ in range(20):
        secret = random_circuit(rng, 4, 25)
        probe = data_encoder(rng.uniform(0, np.pi, 16))
        stolen = steal(compose(secret, probe), probe)
        assert unitary_fidelity(stolen, secret) > 1 - 1e-9


def test_steal_through_intermediate_probe(rng, rotation_circuit):
    secret = rotation_circuit(rng, 4, 12)
    probe = intermediate_encoder([rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4)])
    assert unitary_fidelity(steal(compose(secret, probe), probe), secret) > 1 - 1e-9


def test_stealing_an_empty_model_gives_identity(rng):
    probe = data_encoder(rng.uniform(0, np.pi, 16))
    stolen = steal(compose(Circuit(4), probe), probe)
    assert len(stolen) == 0
    assert unitary_fidelity(stolen, Circuit(4)) == pytest.approx(1.0, abs=1e-12)


def test_zero_probe_still_recovers(rng):
    secret = instantiate_template(4, rng.uniform(-np.pi, np.pi, 16))
    probe = data_encoder(np.zeros(16))
    assert unitary_fidelity(steal(compose(secret, probe), probe), secret) > 1 - 1e-9


def test_zero_parameter_bodies_keep_their_template():
    probe = data_encoder(np.full(16, 0.3))
    for t in range(1, 6):
        secret = instantiate_template(t, np.zeros(TEMPLATE_PARAM_COUNTS[t]))
        stolen = steal(compose(secret, probe), probe)
        assert stolen.ops == secret.ops
        assert match_template(stolen) == t


def test_zero_parameter_model_is_fully_stolen():
    model = materialize(build_backbone(2), {1: 1, 2: 3, 3: 5}, {n: "qcp1" for n in (1, 2, 3)}, seed=0)
    for n in model.params:
        model.params[n] = np.zeros_like(model.params[n])
    result = single_provider_attack(model, QCP1, np.full(16, 0.3), shots=300)
    assert result.complete
    assert [t.template for t in result.nodes] == [model.template_of(t.node) for t in result.nodes]
    assert result.min_fidelity > 1 - 1e-9


def test_fidelity_examples(rng, random_circuit):
    c = random_circuit(rng, 3, 15)
    assert unitary_fidelity(c, c) == pytest.approx(1.0, abs=1e-12)
    assert unitary_fidelity(Circuit(1).x(0), Circuit(1)) == pytest.approx(0.0, abs=1e-12)


def test_width_mismatch():
    with pytest.raises(InvalidCircuit):
        steal(Circuit(4), Circuit(3))
    with pytest.raises(InvalidCircuit):
        unitary_fidelity(Circuit(2), Circuit(4))
    with pytest.raises(InvalidCircuit):
        unitary_fidelity(Circuit(7), Circuit(7))


# ── Log recovery ──

def test_peel_labels_every_segment(rng):
    z = rng.uniform(0, np.pi, 16)
    own = rng.uniform(-1, 1, 4)
    other = rng.uniform(-1, 1, 4)
    body = instantiate_template(3, rng.uniform(-np.pi, np.pi, 8))
    prefix = compose(intermediate_encoder([own]), compose(intermediate_encoder([other]), data_encoder(z)))
    probe, segments = peel_probe(compose(body, prefix), z, {5: own})
    assert segments == (DATA, FOREIGN, 5)
    assert len(probe) == 24


def test_wrong_query_features_are_rejected(rng):
    z = rng.uniform(0, np.pi, 16)
    compiled = compose(instantiate_template(2, rng.uniform(-np.pi, np.pi, 8)), data_encoder(z))
    with pytest.raises(RecoveryError):
        peel_probe(compiled, z + 0.5, {})


def test_logged_job_needs_a_node_id():
    entry = {"job_id": "query-1", "circuit": Circuit(4).to_dict(), "device": "b1",
             "shots": 10, "seed": 0}
    with pytest.raises(RecoveryError):
        LoggedJob.from_entry(entry)
    entry["job_id"] = "s17-n6"
    assert LoggedJob.from_entry(entry).node == 6


def test_bad_log_line(tmp_path):
    path = tmp_path / "qcp1.jsonl"
    path.write_text('{"job_id": "s1-n1"}\nnot json\n')
    with pytest.raises(RecoveryError):
        read_circuit_log(str(path))


def test_jsonl_log_matches_memory_log(tmp_path, rng):
    model = _random_single_provider_model(3)
    z = rng.uniform(0, np.pi, 16)
    fleet = Fleet.loopback([QCP1], log_dir=str(tmp_path))
    try:
        execute_distributed(model, z, fleet, shots=300, seed=1)
        memory = fleet.circuit_log("qcp1")
    finally:
        fleet.close()
    on_disk = read_circuit_log(str(tmp_path / "qcp1.jsonl"))
    assert on_disk == memory
    a = recover_provider(memory, QCP1, z)
    b = recover_provider(on_disk, QCP1, z)
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]


# ── Demos ──

def test_single_provider_deployment_is_fully_stolen():
    for seed in range(20):
        model = _random_single_provider_model(seed)
        z = np.random.default_rng(100 + seed).uniform(0, np.pi, 16)
        result = single_provider_attack(model, QCP1, z, shots=500, seed=seed)
        assert result.complete
        assert len(result.nodes) == len(model.nodes)
        assert result.min_fidelity > 1 - 1e-9


def test_single_provider_demo_refuses_split_models():
    bb = build_backbone(2)
    model = materialize(bb, {1: 1, 2: 1, 3: 1}, {1: "qcp1", 2: "qcp2", 3: "qcp1"}, seed=0)
    with pytest.raises(ValueError):
        single_provider_attack(model, QCP1, np.zeros(16))


def test_distributed_pieces_score_like_the_security_report(synth2, loopback_fleet):
    _, test_set = synth2
    data = test_set.head(20)
    provider = {n: ("qcp1" if n in (2, 4, 5) else "qcp2") for n in range(1, 8)}
    model = materialize(build_backbone(3), {n: 2 for n in range(1, 8)}, provider, seed=6)
    result = distributed_attack(model, loopback_fleet, data, data.features[0], shots=500, seed=3)

    assert sorted((s.provider, s.nodes) for s in result.submodels) == [
        ("qcp1", (2, 4, 5)), ("qcp2", (1, 3, 6, 7))]
    assert all(s.measured_acc is not None for s in result.submodels)
    assert result.consistent()
    assert result.best_recovered == pytest.approx(result.sec_acc, abs=0.03)


def test_ideal_split_recovery_is_exact(synth2):
    _, test_set = synth2
    data = test_set.head(25)
    profiles = [ProviderProfile(p, [(d, IDEAL)]) for p, d in (("qcp1", "b1"), ("qcp3", "b3"))]
    provider = {n: ("qcp3" if n in (3, 6) else "qcp1") for n in range(1, 8)}
    model = materialize(build_backbone(3), {n: 5 for n in range(1, 8)}, provider, seed=2)
    with Fleet.loopback(profiles) as fleet:
        result = distributed_attack(model, fleet, data, data.features[0], shots=200, seed=0)
    assert all(s.gap == 0.0 for s in result.submodels)


def test_default_fleet_profiles_are_attackable():
    profiles = {p.provider: p for p in default_profiles(3)}
    model = _random_single_provider_model(11)
    result = single_provider_attack(model, profiles["qcp1"], np.full(16, 0.3), shots=400)
    assert result.complete
