"""Lossy channel simulator.

Applies, in order: Bernoulli packet loss, single-byte corruption, bounded
reordering, and bandwidth-limited delivery delay. Fully seeded, so a run
with the same packet sequence and seed reproduces the same deliveries.

The reorder buffer holds up to `reorder_window` packets and releases a
random one whenever it overflows; flush() drains it in random order at
end of run. Window 0 is a transparent FIFO.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field


@dataclass
class ChannelStats:
    sent: int = 0
    dropped: int = 0
    corrupted: int = 0
    delivered: int = 0


class ChannelSim:
    def __init__(self, *, loss: float = 0.0, corrupt: float = 0.0,
                 reorder_window: int = 0, bandwidth_bits: float | None = None,
                 seed: int = 0):
        for name, p in (("loss", loss), ("corrupt", corrupt)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} probability must be in [0, 1]")
        if reorder_window < 0:
            raise ValueError("reorder window must be >= 0")
        if bandwidth_bits is not None and bandwidth_bits <= 0:
            raise ValueError("bandwidth must be positive")
        self.loss = loss
        self.corrupt = corrupt
        self.reorder_window = reorder_window
        self.bandwidth = bandwidth_bits
        self.stats = ChannelStats()
        self._rng = random.Random(seed)
        self._buffer: list[tuple[float, bytes]] = []
        self._busy_until = 0.0
        self._last_delivery = 0.0

    def send(self, packet: bytes, now: float) -> list[tuple[float, bytes]]:
        """Offer one packet; returns packets delivered as a consequence."""
        self.stats.sent += 1
        if self._rng.random() < self.loss:
            self.stats.dropped += 1
            return []
        if packet and self._rng.random() < self.corrupt:
            data = bytearray(packet)
            data[self._rng.randrange(len(data))] ^= self._rng.randrange(1, 256)
            packet = bytes(data)
            self.stats.corrupted += 1
        if self.bandwidth is not None:
            self._busy_until = max(self._busy_until, now) + len(packet) * 8 / self.bandwidth
            arrival = self._busy_until
        else:
            arrival = now
        self._buffer.append((arrival, packet))
        out = []
        while len(self._buffer) > self.reorder_window:
            out.append(self._release())
        return out

    def flush(self, now: float) -> list[tuple[float, bytes]]:
        out = []
        while self._buffer:
            out.append(self._release())
        return out

    def _release(self) -> tuple[float, bytes]:
        index = self._rng.randrange(len(self._buffer)) if self.reorder_window else 0
        arrival, packet = self._buffer.pop(index)
        self._last_delivery = max(self._last_delivery, arrival)
        self.stats.delivered += 1
        return self._last_delivery, packet
