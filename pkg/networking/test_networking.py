"""
test_networking.py - Provider daemons, protocol and distributed execution.

Uso:
    pytest networking
"""

import json
import socket
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import make_random_circuit
from model.backbone import build_backbone
from model.design import materialize
from model.inference import DeviceEnv, ExecutionError, forward
from networking.client import LoopbackClient, TransportError, submit
from networking.dispatch import Fleet, execute_distributed
from networking.net_state import (
    FleetConfigError, Job, ProviderProfile, default_profiles, load_fleet,
)
from networking.protocol import LineReader, ProtocolError, pack_job, unpack_job, unpack_result
from networking.server import ProviderServer, ProviderService, bind_address
from qsim.circuit import Circuit
from qsim.simulator import IDEAL, NoiseSpec, simulate_noisy
from server.fleet_manager import LocalFleet
from settings import EXACT, FLEET_HOST

NOISY = NoiseSpec(0.001, 0.01, 0.02)


def _model(depth, seed, providers=("qcp1", "qcp2", "qcp3")):
    rng = np.random.default_rng(seed)
    bb = build_backbone(depth)
    arch = {n: int(rng.integers(1, 6)) for n in bb.nodes}
    prov = {n: providers[int(rng.integers(len(providers)))] for n in bb.nodes}
    return materialize(bb, arch, prov, seed=seed)


@pytest.fixture
def daemon():
    service = ProviderService(ProviderProfile("qcp1", [("b1", NOISY)]))
    server = ProviderServer(service, "127.0.0.1", 0).start()
    yield server
    server.stop()


# ── Fleet configuration ──

def test_default_fleets():
    assert [p.provider for p in default_profiles(2)] == ["qcp1", "qcp3"]
    assert [p.provider for p in default_profiles(3)] == ["qcp1", "qcp2", "qcp3"]
    four = default_profiles(4)
    assert four[-1].noise() == NoiseSpec(0.003, 0.03, 0.04)
    assert [p.endpoint for p in four] == [f"127.0.0.1:{7001 + i}" for i in range(4)]
    with pytest.raises(FleetConfigError):
        default_profiles(5)


def test_profile_rules():
    with pytest.raises(FleetConfigError):
        ProviderProfile("qcp1", [])
    with pytest.raises(FleetConfigError):
        ProviderProfile("qcp1", [("b1", IDEAL), ("b1", NOISY)])
    p = ProviderProfile("qcp1", [("b1", IDEAL), ("b2", NOISY)])
    assert p.default_device == "b1" and p.noise("b2") == NOISY


def test_bind_address_precedence():
    listed = ProviderProfile("qcp1", [("b1", IDEAL)], endpoint="10.0.0.5:7001")
    assert bind_address(listed) == ("10.0.0.5", 7001)
    assert bind_address(listed, port=7100) == ("10.0.0.5", 7100)
    assert bind_address(listed, "0.0.0.0", 0) == ("0.0.0.0", 0)
    assert bind_address(ProviderProfile("qcp2", [("b2", IDEAL)])) == (FLEET_HOST, 0)


def test_load_fleet(tmp_path):
    path = tmp_path / "fleet.json"
    path.write_text(json.dumps([p.to_dict() for p in default_profiles(3)]))
    loaded = load_fleet(str(path))
    assert [p.to_dict() for p in loaded] == [p.to_dict() for p in default_profiles(3)]
    path.write_text("[]")
    with pytest.raises(FleetConfigError):
        load_fleet(str(path))


# ── Protocol ──

def test_unpack_job_reports_its_id():
    line = json.dumps({"job_id": "j1", "device": "b1", "shots": 0,
                       "circuit": Circuit(4).to_dict()})
    with pytest.raises(ProtocolError) as err:
        unpack_job(line)
    assert err.value.job_id == "j1"


def test_line_reader_keeps_partial_lines():
    a, b = socket.socketpair()
    with a, b:
        a.sendall(b'{"x": 1}\n{"y"')
        reader = LineReader(b)
        assert reader.readline() == b'{"x": 1}'
        a.sendall(b': 2}\n')
        assert reader.readline() == b'{"y": 2}'
        a.close()
        assert reader.readline() is None


# ── Provider service ──

def test_empty_circuit_exact():
    service = ProviderService(ProviderProfile("qcp1", [("b1", NOISY)]))
    result = unpack_result(service.handle_line(pack_job(Job("e", Circuit(4), "b1", EXACT))))
    assert result.ok
    # readout flip still applies
    assert_allclose(result.expectations, [1 - 2 * 0.02] * 4, atol=1e-12)
    ideal = ProviderService(ProviderProfile("qcp0", [("b0", IDEAL)]))
    result = unpack_result(ideal.handle_line(pack_job(Job("e", Circuit(4), "b0", EXACT))))
    assert result.expectations == [1.0, 1.0, 1.0, 1.0]


def test_unknown_device_is_an_error_result():
    service = ProviderService(ProviderProfile("qcp1", [("b1", NOISY)]))
    result = unpack_result(service.handle_line(pack_job(Job("x", Circuit(4), "b9"))))
    assert not result.ok and "b9" in result.message
    assert result.expectations is None


def test_service_logs_every_circuit(rng):
    service = ProviderService(ProviderProfile("qcp1", [("b1", NOISY)]))
    circuits = [make_random_circuit(rng) for _ in range(3)]
    for i, c in enumerate(circuits):
        service.execute(Job(f"j{i}", c, "b1", 100, i))
    logged = service.circuit_log
    assert [Circuit.from_dict(e["circuit"]) for e in logged] == circuits
    assert [e["job_id"] for e in logged] == ["j0", "j1", "j2"]


def test_log_file_is_jsonl(tmp_path, rng):
    path = tmp_path / "qcp1.jsonl"
    service = ProviderService(ProviderProfile("qcp1", [("b1", NOISY)]), str(path))
    service.execute(Job("a", make_random_circuit(rng), "b1", 50, 1))
    service.execute(Job("b", make_random_circuit(rng), "b1", 50, 2))
    lines = path.read_text().splitlines()
    assert [json.loads(l)["job_id"] for l in lines] == ["a", "b"]


# ── TCP daemon ──

def test_malformed_line_keeps_connection(daemon, rng):
    host, port = daemon.host, daemon.port
    with socket.create_connection((host, port), timeout=5) as sock:
        reader = LineReader(sock)
        sock.sendall(b"this is not json\n")
        bad = json.loads(reader.readline())
        assert bad["status"] == "error" and bad["message"] == "parse"

        job = Job("after", make_random_circuit(rng), "b1", 200, 3)
        sock.sendall(pack_job(job))
        good = unpack_result(reader.readline())
        assert good.ok and good.job_id == "after"


def test_same_job_twice_is_identical(daemon, rng):
    job = Job("twice", make_random_circuit(rng), "b1", 8092, 7)
    first = submit(daemon.endpoint, job)
    second = submit(daemon.endpoint, job)
    assert first.expectations == second.expectations


def test_roundtrip_matches_in_process(daemon, rng):
    for seed in range(5):
        c = make_random_circuit(rng)
        result = submit(daemon.endpoint, Job(f"r{seed}", c, "b1", 1000, seed))
        assert_allclose(result.expectations, simulate_noisy(c, NOISY, 1000, seed), atol=1e-12)


def test_unreachable_endpoint_times_out():
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    start = time.perf_counter()
    with pytest.raises(TransportError):
        submit(f"127.0.0.1:{port}", Job("lost", Circuit(4), "b1"), timeout=1.0)
    assert time.perf_counter() - start < 1.1


def test_hundred_concurrent_jobs(daemon, rng):
    jobs = [Job(f"job-{i}", make_random_circuit(rng), "b1", 500, i) for i in range(100)]
    with ThreadPoolExecutor(max_workers=16) as pool:
        results = list(pool.map(lambda j: submit(daemon.endpoint, j), jobs))
    for job, result in zip(jobs, results):
        assert result.ok and result.job_id == job.job_id
        assert_allclose(result.expectations, simulate_noisy(job.circuit, NOISY, 500, job.seed), atol=1e-12)


# ── Distributed execution ──

@pytest.mark.parametrize("seed", range(5))
def test_zero_noise_distribution_is_transparent(ideal_fleet, rng, seed):
    model = _model(3, seed)
    x = rng.uniform(0, np.pi, 16)
    got = execute_distributed(model, x, ideal_fleet, shots=EXACT)
    assert_allclose(got, forward(model, x), atol=1e-9)


def test_two_leaves_feeding_a_root_issue_three_jobs(loopback_fleet, rng):
    bb = build_backbone(2)
    model = materialize(bb, {1: 3, 2: 2, 3: 4}, {1: "qcp3", 2: "qcp1", 3: "qcp2"}, seed=0)
    execute_distributed(model, rng.uniform(0, np.pi, 16), loopback_fleet)
    logs = {p: loopback_fleet.circuit_log(p) for p in loopback_fleet.providers}
    assert {p: len(v) for p, v in logs.items()} == {"qcp1": 1, "qcp2": 1, "qcp3": 1}
    assert logs["qcp1"][0]["job_id"].endswith("-n2")
    assert logs["qcp2"][0]["job_id"].endswith("-n3")
    assert logs["qcp3"][0]["job_id"].endswith("-n1")


@pytest.mark.parametrize("seed", range(5))
def test_logs_only_hold_own_nodes(loopback_fleet, rng, seed):
    model = _model(3, 20 + seed)
    for i in range(3):
        execute_distributed(model, rng.uniform(0, np.pi, 16), loopback_fleet, shots=200, sample_index=i)
    total = 0
    for provider in loopback_fleet.providers:
        for entry in loopback_fleet.circuit_log(provider):
            node = int(entry["job_id"].rsplit("-n", 1)[1])
            assert model.provider_of(node) == provider
            total += 1
    assert total == 3 * len(model.nodes)


def test_noisy_runs_are_reproducible(loopback_fleet, rng):
    model = _model(3, 4)
    x = rng.uniform(0, np.pi, 16)
    a = execute_distributed(model, x, loopback_fleet, shots=8092, seed=11)
    b = execute_distributed(model, x, loopback_fleet, shots=8092, seed=11)
    assert np.array_equal(a, b)


def test_single_provider_fleet_matches_device_env(loopback_fleet, rng):
    model = _model(3, 9, providers=("qcp2",))
    x = rng.uniform(0, np.pi, 16)
    noise = loopback_fleet.profiles["qcp2"].noise()
    local = forward(model, x, DeviceEnv(noise, 1000, 5), 2)
    remote = execute_distributed(model, x, loopback_fleet, shots=1000, seed=5, sample_index=2)
    assert np.array_equal(local, remote)


def test_provider_outside_fleet(loopback_fleet):
    model = _model(2, 0, providers=("qcp9",))
    with pytest.raises(ExecutionError) as err:
        execute_distributed(model, np.zeros(16), loopback_fleet)
    assert err.value.node in model.nodes


def test_tcp_fleet_matches_loopback(rng):
    model = _model(3, 6)
    x = rng.uniform(0, np.pi, 16)
    with LocalFleet(default_profiles(3)) as tcp, Fleet.loopback(default_profiles(3)) as loop:
        assert np.array_equal(execute_distributed(model, x, tcp.fleet, shots=500, seed=1),
                              execute_distributed(model, x, loop, shots=500, seed=1))
        assert sum(len(tcp.fleet.circuit_log(p)) for p in tcp.fleet.providers) == len(model.nodes)


def test_dead_provider_aborts_with_node():
    model = _model(2, 0, providers=("qcp2",))
    local = LocalFleet(default_profiles(3), timeout=1.0)
    try:
        local.servers["qcp2"].stop()
        with pytest.raises(ExecutionError) as err:
            execute_distributed(model, np.zeros(16), local.fleet)
        assert model.provider_of(err.value.node) == "qcp2"
    finally:
        local.close()


def test_loopback_client_endpoint():
    service = ProviderService(ProviderProfile("qcp1", [("b1", IDEAL)]))
    client = LoopbackClient(service)
    assert client.endpoint == "loopback:qcp1"
    assert client.submit(Job("z", Circuit(4), "b1", EXACT)).expectations == [1.0] * 4
