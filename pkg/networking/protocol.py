"""
protocol.py - Protocolo de texto NDJSON entre orquestador y proveedores.

One JSON object per line, UTF-8, over a plain stream socket.

    request:  {"job_id": "...", "device": "b1", "shots": 8092, "seed": 7, "circuit": {...}}
    response: {"job_id": "...", "status": "ok", "expectations": [...]}
              {"job_id": "...", "status": "error", "message": "..."}

pack_* returns the encoded line (bytes, newline included); unpack_* takes
one line and raises ProtocolError when it cannot be understood.
"""

from __future__ import annotations

import json
import socket

from networking.net_state import Job, JobResult
from qsim.circuit import Circuit, InvalidCircuit
from qsim.simulator import InvalidShots, check_shots
from settings import NET_RECV_BYTES

# Message for lines that are not JSON objects
PARSE_ERROR = "parse"

NEWLINE = b"\n"


class ProtocolError(ValueError):
    """A line could not be decoded into a job or a result."""

    def __init__(self, message: str, job_id: str | None = None):
        super().__init__(message)
        self.job_id = job_id


def encode_line(obj: dict) -> bytes:
    return json.dumps(obj, separators=(",", ":")).encode("utf-8") + NEWLINE


def decode_line(line: bytes | str) -> dict:
    if isinstance(line, bytes):
        line = line.decode("utf-8", errors="replace")
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        raise ProtocolError(PARSE_ERROR) from None
    if not isinstance(obj, dict):
        raise ProtocolError(PARSE_ERROR)
    return obj


# ── Job: orquestador → proveedor ──
def pack_job(job: Job) -> bytes:
    return encode_line(job.to_dict())


def unpack_job(line: bytes | str) -> Job:
    obj = decode_line(line)
    job_id = obj.get("job_id")
    job_id = None if job_id is None else str(job_id)
    for key in ("job_id", "device", "circuit"):
        if key not in obj:
            raise ProtocolError(f"missing field {key!r}", job_id)
    shots = obj.get("shots", "exact")
    try:
        check_shots(shots)
    except InvalidShots as e:
        raise ProtocolError(str(e), job_id) from None
    try:
        circuit = Circuit.from_dict(obj["circuit"]).validate()
    except InvalidCircuit as e:
        raise ProtocolError(f"bad circuit: {e}", job_id) from None
    seed = obj.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ProtocolError(f"bad seed {seed!r}", job_id)
    return Job(job_id, circuit, str(obj["device"]), shots, seed)


# ── JobResult: proveedor → orquestador ──
def pack_result(result: JobResult) -> bytes:
    return encode_line(result.to_dict())


def unpack_result(line: bytes | str) -> JobResult:
    obj = decode_line(line)
    job_id = obj.get("job_id")
    status = obj.get("status")
    if status == "ok":
        values = obj.get("expectations")
        if not isinstance(values, list):
            raise ProtocolError("ok result without expectations", job_id)
        return JobResult(job_id, "ok", [float(v) for v in values])
    if status == "error":
        return JobResult.error(job_id, str(obj.get("message", "")))
    raise ProtocolError(f"unknown status {status!r}", job_id)


class LineReader:
    """Splits a stream socket into lines, keeping any partial tail."""

    def __init__(self, sock: socket.socket, bufsize: int = NET_RECV_BYTES):
        self.sock = sock
        self.bufsize = bufsize
        self._buffer = b""

    def readline(self) -> bytes | None:
        """Next complete line without its newline, None once the peer closed."""
        while NEWLINE not in self._buffer:
            chunk = self.sock.recv(self.bufsize)
            if not chunk:
                return None
            self._buffer += chunk
        line, _, self._buffer = self._buffer.partition(NEWLINE)
        return line
