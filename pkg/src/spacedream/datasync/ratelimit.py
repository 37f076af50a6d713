"""Token-bucket rate limiting in bits.

The bucket caps long-run throughput at `rate` while allowing a burst of
one bucket's worth; capacity defaults to 50 ms of line rate so no sliding
1-second window can exceed the limit by more than 5%.
"""

from __future__ import annotations

DEFAULT_CAPACITY_FACTOR = 0.05


class TokenBucket:
    def __init__(self, rate_bits: float, capacity_bits: float | None = None):
        if rate_bits <= 0:
            raise ValueError("rate must be positive")
        self.rate = float(rate_bits)
        self.capacity = float(capacity_bits if capacity_bits is not None
                              else rate_bits * DEFAULT_CAPACITY_FACTOR)
        if self.capacity <= 0:
            raise ValueError("capacity must be positive")
        self.tokens = self.capacity
        self._last = None

    def _refill(self, now: float) -> None:
        if self._last is None:
            self._last = now
        elif now > self._last:
            self.tokens = min(self.capacity,
                              self.tokens + (now - self._last) * self.rate)
            self._last = now

    def try_take(self, bits: float, now: float) -> bool:
        self._refill(now)
        if self.tokens >= bits:
            self.tokens -= bits
            return True
        return False

    def time_until(self, bits: float, now: float) -> float:
        """Seconds until `bits` become affordable (0 if they already are)."""
        self._refill(now)
        if self.tokens >= bits:
            return 0.0
        return (bits - self.tokens) / self.rate
