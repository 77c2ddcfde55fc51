"""
client.py - Cliente para enviar trabajos a los proveedores.

submit() does one request/response roundtrip on a fresh connection and
retries once if the provider resets it. The two client classes share one
interface, submit(job) -> JobResult, so the dispatcher does not care
whether a provider is a socket away or in the same process.
"""

from __future__ import annotations

import logging
import socket

from networking.net_state import Job, JobResult
from networking.protocol import LineReader, ProtocolError, pack_job, unpack_result
from settings import NET_TIMEOUT

log = logging.getLogger("splitq.fleet")


class TransportError(RuntimeError):
    """The provider could not be reached or did not answer in time."""


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, _, port = endpoint.rpartition(":")
    if not host or not port.isdigit():
        raise TransportError(f"bad endpoint {endpoint!r}, expected host:port")
    return host, int(port)


def _roundtrip(address: tuple[str, int], payload: bytes, timeout: float) -> bytes:
    with socket.create_connection(address, timeout=timeout) as sock:
        sock.settimeout(timeout)
        sock.sendall(payload)
        line = LineReader(sock).readline()
    if line is None:
        raise ConnectionResetError("provider closed the connection before answering")
    return line


def submit(endpoint: str, job: Job, timeout: float = NET_TIMEOUT) -> JobResult:
    """Send one job and wait for its result.

    Raises:
        TransportError: unreachable endpoint, timeout, second reset, or an
            answer that does not belong to this job.
    """
    address = parse_endpoint(endpoint)
    payload = pack_job(job)
    for attempt in (1, 2):
        try:
            line = _roundtrip(address, payload, timeout)
            break
        except (ConnectionResetError, BrokenPipeError) as e:
            if attempt == 2:
                raise TransportError(f"{endpoint}: connection reset twice ({e})") from e
            log.debug("%s reset the connection, retrying job %s", endpoint, job.job_id)
        except socket.timeout as e:
            raise TransportError(f"{endpoint}: no answer within {timeout}s") from e
        except OSError as e:
            raise TransportError(f"{endpoint}: {e}") from e

    try:
        result = unpack_result(line)
    except ProtocolError as e:
        raise TransportError(f"{endpoint}: unreadable answer ({e})") from e
    if result.job_id != job.job_id:
        raise TransportError(f"{endpoint}: answer for job {result.job_id}, expected {job.job_id}")
    return result


class RemoteClient:
    """Provider reached over TCP."""

    def __init__(self, endpoint: str, timeout: float = NET_TIMEOUT):
        self.endpoint = endpoint
        self.timeout = timeout

    def submit(self, job: Job) -> JobResult:
        return submit(self.endpoint, job, self.timeout)

    def close(self):
        pass


class LoopbackClient:
    """Provider in the same process. Jobs still go through the wire codec,
    so loopback and TCP runs see the same bytes."""

    def __init__(self, service):
        self.service = service

    @property
    def endpoint(self) -> str:
        return f"loopback:{self.service.provider}"

    def submit(self, job: Job) -> JobResult:
        try:
            return unpack_result(self.service.handle_line(pack_job(job)))
        except ProtocolError as e:
            raise TransportError(f"{self.endpoint}: {e}") from e

    def close(self):
        pass
