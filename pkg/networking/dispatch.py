"""
dispatch.py - Orquestador: reparte los nodos del modelo entre proveedores.

A Fleet maps provider ids to clients (loopback or TCP). Its
DistributedEnv plugs into the plan runner in model/inference.py: every
plan level is one round of jobs, sibling nodes are submitted
concurrently, and a level only starts once the previous one answered.
"""

from __future__ import annotations

import logging
from concurrent.futures import Future, ThreadPoolExecutor
from typing import Iterable, Sequence

import numpy as np

from model.design import Model
from model.inference import ExecutionEnv, ExecutionError, NodeJob, forward
from networking.client import LoopbackClient, RemoteClient, TransportError
from networking.net_state import Job, ProviderProfile
from networking.server import ProviderService
from qsim.simulator import check_shots
from settings import DEFAULT_SHOTS, DISPATCH_WORKERS, NET_TIMEOUT

log = logging.getLogger("splitq.fleet")


class Fleet:
    """The set of providers a model can be deployed on."""

    def __init__(self, profiles: Iterable[ProviderProfile], clients: dict,
                 services: dict[str, ProviderService] | None = None,
                 workers: int = DISPATCH_WORKERS):
        self.profiles = {p.provider: p for p in profiles}
        self.clients = clients
        self.services = services or {}
        self._pool = ThreadPoolExecutor(max_workers=max(1, workers), thread_name_prefix="dispatch")
        self._closed = False

    @classmethod
    def loopback(cls, profiles: Iterable[ProviderProfile], log_dir: str | None = None,
                 workers: int = DISPATCH_WORKERS) -> "Fleet":
        """In-process providers, no sockets."""
        profiles = list(profiles)
        services = {}
        for p in profiles:
            log_file = f"{log_dir}/{p.provider}.jsonl" if log_dir else None
            services[p.provider] = ProviderService(p, log_file)
        clients = {name: LoopbackClient(s) for name, s in services.items()}
        return cls(profiles, clients, services, workers)

    @classmethod
    def remote(cls, profiles: Iterable[ProviderProfile], timeout: float = NET_TIMEOUT,
               workers: int = DISPATCH_WORKERS) -> "Fleet":
        """Providers reached at their profile endpoints."""
        profiles = list(profiles)
        clients = {p.provider: RemoteClient(p.endpoint, timeout) for p in profiles}
        return cls(profiles, clients, workers=workers)

    @property
    def providers(self) -> list[str]:
        return sorted(self.profiles)

    def circuit_log(self, provider: str) -> list[dict]:
        """What `provider` has seen, when its service runs in this process."""
        service = self.services.get(provider)
        if service is None:
            raise KeyError(f"no in-process log for provider {provider}")
        return service.circuit_log

    def clear_logs(self):
        for service in self.services.values():
            service.clear_log()

    def env(self, shots=DEFAULT_SHOTS, seed: int = 0) -> "DistributedEnv":
        return DistributedEnv(self, shots, seed)

    def submit_async(self, provider: str, job: Job) -> Future:
        return self._pool.submit(self.clients[provider].submit, job)

    def close(self):
        if self._closed:
            return
        self._closed = True
        self._pool.shutdown(wait=True)
        for client in self.clients.values():
            client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class DistributedEnv(ExecutionEnv):
    """Each node runs at the provider it is assigned to."""

    def __init__(self, fleet: Fleet, shots=DEFAULT_SHOTS, seed: int = 0):
        check_shots(shots)
        self.fleet = fleet
        self.shots = shots
        self.seed = seed

    def _job(self, nj: NodeJob) -> tuple[str, Job]:
        profile = self.fleet.profiles.get(nj.provider)
        if profile is None:
            raise ExecutionError(f"node {nj.node}: provider {nj.provider!r} is not in the fleet", nj.node)
        device = nj.device or profile.default_device
        job_id = f"s{nj.seed}-n{nj.node}"
        return nj.provider, Job(job_id, nj.circuit, device, self.shots, nj.seed)

    def run_level(self, jobs: Sequence[NodeJob]) -> list[np.ndarray]:
        batch = [self._job(nj) for nj in jobs]
        futures = [self.fleet.submit_async(p, job) for p, job in batch]
        values = []
        for nj, (provider, _), fut in zip(jobs, batch, futures):
            try:
                result = fut.result()
            except TransportError as e:
                raise ExecutionError(f"node {nj.node} at {provider}: {e}", nj.node) from e
            if not result.ok:
                raise ExecutionError(f"node {nj.node} at {provider}: {result.message}", nj.node)
            values.append(np.asarray(result.expectations, dtype=float))
        log.debug("level of %d jobs answered", len(jobs))
        return values


def execute_distributed(model: Model, features, fleet: Fleet, shots=DEFAULT_SHOTS,
                        seed: int = 0, sample_index: int = 0) -> np.ndarray:
    """Logits of one sample with every node sent to its provider."""
    missing = [p for p in model.design.providers_used if p not in fleet.profiles]
    if missing:
        node = next(n for n in model.nodes if model.provider_of(n) in missing)
        raise ExecutionError(f"providers {missing} have no endpoint in the fleet", node)
    return forward(model, features, fleet.env(shots, seed), sample_index)
