"""Clock abstraction so the whole stack can run on simulated or wall time.

The scenario harness owns a SimClock and advances it tick by tick; modules
only ever ask "what time is it". Wall-clock mode swaps in WallClock and
relaxes determinism.
"""

from __future__ import annotations

import time


class Clock:
    def now(self) -> float:
        raise NotImplementedError


class SimClock(Clock):
    """Manually advanced monotonic clock."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def advance(self, dt: float) -> float:
        if dt < 0:
            raise ValueError("clock cannot go backwards")
        self._now += dt
        return self._now


class WallClock(Clock):
    """Monotonic wall clock, zeroed at construction."""

    def __init__(self):
        self._t0 = time.monotonic()

    def now(self) -> float:
        return time.monotonic() - self._t0
