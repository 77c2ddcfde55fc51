"""
net_state.py - Data classes ligeras para estado de red.

Provider profiles (devices + noise + endpoint) and the Job / JobResult
records exchanged with provider daemons.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from qsim.circuit import Circuit
from qsim.simulator import NoiseSpec
from settings import (
    DEFAULT_FLEET_SIZE, DEFAULT_NOISE_PROFILES, EXACT, FLEET_BASE_PORT, FLEET_HOST, FLEET_SIZES,
)


class FleetConfigError(ValueError):
    """Fleet description is malformed."""


@dataclass
class ProviderProfile:
    provider: str
    devices: list[tuple[str, NoiseSpec]]
    endpoint: str = ""              # "host:port", empty for loopback-only

    def __post_init__(self):
        if not self.devices:
            raise FleetConfigError(f"provider {self.provider} has no device")
        ids = [d for d, _ in self.devices]
        if len(set(ids)) != len(ids):
            raise FleetConfigError(f"provider {self.provider} repeats a device id: {ids}")
        self._noise = dict(self.devices)

    @property
    def default_device(self) -> str:
        return self.devices[0][0]

    @property
    def device_ids(self) -> list[str]:
        return [d for d, _ in self.devices]

    def has_device(self, device: str) -> bool:
        return device in self._noise

    def noise(self, device: str | None = None) -> NoiseSpec:
        return self._noise[device or self.default_device]

    @property
    def address(self) -> tuple[str, int]:
        host, _, port = self.endpoint.rpartition(":")
        if not host or not port.isdigit():
            raise FleetConfigError(f"provider {self.provider} has no usable endpoint: {self.endpoint!r}")
        return host, int(port)

    def to_dict(self) -> dict:
        return {"provider": self.provider, "endpoint": self.endpoint,
                "devices": [{"device": d, **n.to_dict()} for d, n in self.devices]}

    @classmethod
    def from_dict(cls, data: dict) -> "ProviderProfile":
        try:
            devices = [(str(d["device"]),
                        NoiseSpec(float(d.get("p1", 0.0)), float(d.get("p2", 0.0)),
                                  float(d.get("readout_flip", 0.0))))
                       for d in data["devices"]]
            return cls(str(data["provider"]), devices, str(data.get("endpoint", "")))
        except (KeyError, TypeError, ValueError) as e:
            raise FleetConfigError(f"bad provider entry {data!r}: {e}") from e


def default_profiles(size: int = DEFAULT_FLEET_SIZE, host: str = FLEET_HOST,
                     base_port: int = FLEET_BASE_PORT) -> list[ProviderProfile]:
    """Built-in fleets of 2, 3 or 4 providers."""
    if size not in FLEET_SIZES:
        raise FleetConfigError(f"no built-in fleet of size {size}; choose from {sorted(FLEET_SIZES)}")
    names = list(DEFAULT_NOISE_PROFILES)
    profiles = []
    for provider in FLEET_SIZES[size]:
        devices = [(d, NoiseSpec(p1, p2, ro)) for d, p1, p2, ro in DEFAULT_NOISE_PROFILES[provider]]
        port = base_port + names.index(provider)
        profiles.append(ProviderProfile(provider, devices, f"{host}:{port}"))
    return profiles


def load_fleet(path: str) -> list[ProviderProfile]:
    """Read a fleet JSON file: a list of provider entries."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise FleetConfigError(f"{path}: {e}") from e
    if isinstance(raw, dict):
        raw = raw.get("providers", [])
    profiles = [ProviderProfile.from_dict(entry) for entry in raw]
    if not profiles:
        raise FleetConfigError(f"{path} lists no providers")
    names = [p.provider for p in profiles]
    if len(set(names)) != len(names):
        raise FleetConfigError(f"{path} repeats a provider id")
    return profiles


class Job:
    """Un circuito enviado a un proveedor."""
    __slots__ = ('job_id', 'circuit', 'device', 'shots', 'seed')

    def __init__(self, job_id, circuit: Circuit, device, shots=EXACT, seed=0):
        self.job_id = str(job_id)
        self.circuit = circuit
        self.device = device
        self.shots = shots
        self.seed = int(seed)

    def to_dict(self) -> dict:
        return {"job_id": self.job_id, "device": self.device, "shots": self.shots,
                "seed": self.seed, "circuit": self.circuit.to_dict()}


@dataclass
class JobResult:
    job_id: str | None
    status: str = "ok"
    expectations: list[float] | None = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @classmethod
    def error(cls, job_id, message: str) -> "JobResult":
        return cls(job_id, "error", None, message)

    def to_dict(self) -> dict:
        if self.ok:
            return {"job_id": self.job_id, "status": "ok", "expectations": self.expectations}
        return {"job_id": self.job_id, "status": "error", "message": self.message}
