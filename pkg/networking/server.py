"""
server.py - Daemon TCP de un proveedor cuántico simulado.

A ProviderService executes circuit jobs on the provider's devices and
remembers every circuit it was sent. ProviderServer puts one service
behind a stream socket: each connection gets its own thread and may send
any number of newline-delimited jobs.

The circuit log is exactly what the provider gets to see of a model.
"""

from __future__ import annotations

import json
import logging
import socket
import threading

from networking.net_state import Job, JobResult, ProviderProfile
from networking.protocol import LineReader, ProtocolError, pack_result, unpack_job
from qsim.circuit import InvalidCircuit
from qsim.simulator import simulate_noisy
from settings import FLEET_HOST

log = logging.getLogger("splitq.server")


class ProviderService:
    """Stateless job execution plus the provider's circuit log."""

    def __init__(self, profile: ProviderProfile, log_file: str | None = None):
        self.profile = profile
        self.log_file = log_file
        self._log: list[dict] = []
        self._lock = threading.Lock()
        self.jobs_ok = 0
        self.jobs_failed = 0

    @property
    def provider(self) -> str:
        return self.profile.provider

    @property
    def circuit_log(self) -> list[dict]:
        """Copy of the log: {"job_id", "device", "shots", "seed", "circuit"} per job."""
        with self._lock:
            return list(self._log)

    def clear_log(self):
        with self._lock:
            self._log.clear()

    def _record(self, job: Job):
        entry = job.to_dict()
        with self._lock:
            self._log.append(entry)
            if self.log_file:
                with open(self.log_file, "a", encoding="utf-8") as f:
                    f.write(json.dumps(entry) + "\n")

    def execute(self, job: Job) -> JobResult:
        self._record(job)
        if not self.profile.has_device(job.device):
            self._count(False)
            return JobResult.error(job.job_id, f"unknown device {job.device!r} at {self.provider}")
        try:
            values = simulate_noisy(job.circuit, self.profile.noise(job.device), job.shots, job.seed)
        except (InvalidCircuit, ValueError) as e:
            self._count(False)
            return JobResult.error(job.job_id, str(e))
        self._count(True)
        return JobResult(job.job_id, "ok", [float(v) for v in values])

    def _count(self, ok: bool):
        with self._lock:
            if ok:
                self.jobs_ok += 1
            else:
                self.jobs_failed += 1

    def handle_line(self, line: bytes | str) -> bytes:
        """One request line in, one response line out. Never raises on bad input."""
        try:
            job = unpack_job(line)
        except ProtocolError as e:
            log.debug("%s rejected a line: %s", self.provider, e)
            self._count(False)
            return pack_result(JobResult.error(e.job_id, str(e)))
        return pack_result(self.execute(job))


class ProviderServer:
    """Servidor TCP para un proveedor."""

    def __init__(self, service: ProviderService, host: str = FLEET_HOST, port: int = 0):
        self.service = service
        self.host = host
        self.port = port                # 0 = any free port, resolved on start()
        self.socket = None
        self._running = False
        self._thread = None
        self._conns: set[socket.socket] = set()
        self._conns_lock = threading.Lock()

    @property
    def endpoint(self) -> str:
        return f"{self.host}:{self.port}"

    def start(self):
        """Inicia el servidor en un hilo daemon."""
        self.socket = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.socket.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self.socket.bind((self.host, self.port))
        self.port = self.socket.getsockname()[1]
        self.socket.listen()
        self.socket.settimeout(0.1)
        log.info("%s listening on %s", self.service.provider, self.endpoint)

        self._running = True
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        """Para el servidor y cierra todas las conexiones."""
        self._running = False
        with self._conns_lock:
            for conn in self._conns:
                try:
                    conn.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass
            self._conns.clear()
        if self._thread:
            self._thread.join(timeout=2)
        if self.socket:
            try:
                self.socket.close()
            except OSError:
                pass
            self.socket = None
        log.info("%s stopped", self.service.provider)

    @property
    def running(self) -> bool:
        return self._running

    def _accept_loop(self):
        while self._running:
            try:
                conn, addr = self.socket.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            conn.settimeout(None)
            with self._conns_lock:
                self._conns.add(conn)
            threading.Thread(target=self._serve_connection, args=(conn, addr), daemon=True).start()

    def _serve_connection(self, conn: socket.socket, addr):
        reader = LineReader(conn)
        try:
            while self._running:
                line = reader.readline()
                if line is None:
                    break
                if not line.strip():
                    continue
                conn.sendall(self.service.handle_line(line))
        except OSError as e:
            log.debug("connection %s dropped: %s", addr, e)
        finally:
            with self._conns_lock:
                self._conns.discard(conn)
            try:
                conn.close()
            except OSError:
                pass


def bind_address(profile: ProviderProfile, host: str | None = None,
                 port: int | None = None) -> tuple[str, int]:
    """Explicit host/port, else the profile endpoint, else FLEET_HOST on a free port."""
    ep_host, ep_port = profile.address if profile.endpoint else (FLEET_HOST, 0)
    return (ep_host if host is None else host, ep_port if port is None else port)


def serve(profile: ProviderProfile, host: str | None = None, port: int | None = None,
          log_file: str | None = None) -> ProviderServer:
    """Start a daemon for `profile` on its endpoint (or the given host/port)."""
    host, port = bind_address(profile, host, port)
    return ProviderServer(ProviderService(profile, log_file), host, port).start()
