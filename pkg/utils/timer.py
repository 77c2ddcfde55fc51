"""
timer.py - Cronómetro por episodio de búsqueda.

Wall time of every search episode plus formatted totals for the logs.
"""

import time


class EpisodeTimer:
    """Cronómetro de búsqueda con tiempos por episodio."""

    def __init__(self):
        self.episode_times = []      # duración de cada episodio completado
        self._started_at = None

    def start(self):
        """Marca el inicio del episodio actual."""
        self._started_at = time.perf_counter()

    def complete_episode(self) -> float:
        """
        Registra un episodio completado.

        Returns:
            Duración del episodio en segundos.
        """
        if self._started_at is None:
            raise RuntimeError("complete_episode() called before start()")
        elapsed = time.perf_counter() - self._started_at
        self.episode_times.append(elapsed)
        self._started_at = None
        return elapsed

    @property
    def total(self) -> float:
        return sum(self.episode_times)

    @staticmethod
    def format_time(seconds: float) -> str:
        """
        Formatea segundos como "hh:mm:ss.s".

        Args:
            seconds: tiempo en segundos.
        """
        hours = int(seconds // 3600)
        minutes = int(seconds % 3600 // 60)
        secs = seconds % 60
        return f"{hours:02d}:{minutes:02d}:{secs:04.1f}"

    @property
    def formatted_total(self) -> str:
        return self.format_time(self.total)
