"""
dedicated_server.py - Daemon headless de un proveedor cuántico.

Runs one provider's ProviderServer in the foreground until interrupted.
Started through the CLI:

Uso:
    python main.py provider serve --profile qcp1 --port 7001 --log-file qcp1.jsonl
"""

from __future__ import annotations

import logging
import threading

from networking.net_state import ProviderProfile
from networking.server import ProviderServer, ProviderService, bind_address
from settings import FLEET_HOST

log = logging.getLogger("splitq.server")


class DedicatedProvider:
    """One provider daemon in the foreground."""

    def __init__(self, profile: ProviderProfile, host: str = FLEET_HOST, port: int = 0,
                 log_file: str | None = None):
        self.profile = profile
        self.service = ProviderService(profile, log_file)
        self.server = ProviderServer(self.service, host, port)
        self._stop = threading.Event()

    @property
    def endpoint(self) -> str:
        return self.server.endpoint

    def start(self) -> "DedicatedProvider":
        self.server.start()
        devices = ", ".join(f"{d} {n.to_dict()}" for d, n in self.profile.devices)
        log.info("%s ready on %s (%s)", self.profile.provider, self.endpoint, devices)
        if self.service.log_file:
            log.info("%s logging circuits to %s", self.profile.provider, self.service.log_file)
        return self

    def serve_forever(self):
        """Blocks until stop() or Ctrl+C."""
        try:
            while not self._stop.wait(0.5):
                pass
        except KeyboardInterrupt:
            pass
        finally:
            self._shutdown()

    def stop(self):
        self._stop.set()

    def _shutdown(self):
        log.info("%s shutting down after %d jobs (%d failed)", self.profile.provider,
                 self.service.jobs_ok + self.service.jobs_failed, self.service.jobs_failed)
        self.server.stop()


def run(profile: ProviderProfile, host: str | None = None, port: int | None = None,
        log_file: str | None = None) -> int:
    """Entry point used by `provider serve`."""
    host, port = bind_address(profile, host, port)
    daemon = DedicatedProvider(profile, host, port, log_file)
    try:
        daemon.start()
    except OSError as e:
        log.error("cannot start %s on %s:%s: %s", profile.provider, host, port, e)
        return 1
    daemon.serve_forever()
    return 0
