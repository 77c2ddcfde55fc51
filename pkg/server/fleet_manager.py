"""
fleet_manager.py - Levanta una flota local de proveedores TCP.

Each profile gets its own ProviderServer on localhost (port 0 picks a free
port), and the returned Fleet talks to them over real sockets. Used by the
networking tests and by `--transport tcp` runs.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Iterable

from networking.dispatch import Fleet
from networking.net_state import ProviderProfile
from networking.server import ProviderServer, ProviderService
from settings import DISPATCH_WORKERS, FLEET_HOST, NET_TIMEOUT

log = logging.getLogger("splitq.server")


class LocalFleet:
    """Daemons for every profile plus a TCP Fleet pointed at them."""

    def __init__(self, profiles: Iterable[ProviderProfile], host: str = FLEET_HOST,
                 use_profile_ports: bool = False, log_dir: str | None = None,
                 timeout: float = NET_TIMEOUT, workers: int = DISPATCH_WORKERS):
        self.servers: dict[str, ProviderServer] = {}
        started = []
        try:
            for p in profiles:
                port = p.address[1] if use_profile_ports else 0
                log_file = f"{log_dir}/{p.provider}.jsonl" if log_dir else None
                server = ProviderServer(ProviderService(p, log_file), host, port).start()
                self.servers[p.provider] = server
                started.append(replace(p, endpoint=server.endpoint))
        except OSError:
            self._stop_servers()
            raise
        self.fleet = Fleet.remote(started, timeout, workers)
        self.fleet.services = {name: s.service for name, s in self.servers.items()}
        log.info("local fleet up: %s", ", ".join(f"{p.provider}@{p.endpoint}" for p in started))

    @property
    def profiles(self) -> list[ProviderProfile]:
        return list(self.fleet.profiles.values())

    def _stop_servers(self):
        for server in self.servers.values():
            server.stop()
        self.servers.clear()

    def close(self):
        self.fleet.close()
        self._stop_servers()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
