"""Clocks. The world and orchestrator take instants as parameters, so tests
drive a virtual clock while production uses wall time."""

from __future__ import annotations

import time


class WallClock:
    """Real time, seconds since the epoch."""

    def now(self) -> float:
        return time.time()


class VirtualClock:
    """Manually advanced clock for deterministic simulation.

    Time never moves unless advance()/set_to() is called, and it refuses
    to move backwards.
    """

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def advance(self, seconds: float) -> float:
        if seconds < 0:
            raise ValueError(f"cannot advance by {seconds} s")
        self._now += seconds
        return self._now

    def set_to(self, instant: float) -> float:
        if instant < self._now:
            raise ValueError(f"cannot go back in time: {instant} < {self._now}")
        self._now = float(instant)
        return self._now
