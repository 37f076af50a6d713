"""Start-command handshake.

A single UDP datagram with the 8-byte magic switches the mission to
flight mode. Anything else is ignored. If nothing valid arrives within
the timeout, an on-ground test is assumed and the robot must never be
powered into motion.
"""

from __future__ import annotations

import socket

START_MAGIC = b"SDRMGO!\n"
DEFAULT_PORT = 47000

FLIGHT = "flight"
GROUND_TEST = "ground_test"


class StartGate:
    def __init__(self, timeout: float):
        if timeout <= 0:
            raise ValueError("timeout must be positive")
        self.timeout = timeout
        self.decision: str | None = None
        self.ignored = 0
        self._t0: float | None = None

    def offer(self, datagram: bytes) -> bool:
        """Feed one datagram; True iff it was the start command."""
        if datagram == START_MAGIC:
            if self.decision is None:
                self.decision = FLIGHT
            return True
        self.ignored += 1
        return False

    def poll(self, now: float) -> str | None:
        """Decision so far; the timeout runs from the first poll."""
        if self._t0 is None:
            self._t0 = now
        if self.decision is None and now - self._t0 >= self.timeout:
            self.decision = GROUND_TEST
        return self.decision


class UdpStartSource:
    """Non-blocking datagram intake for wall-clock runs."""

    def __init__(self, port: int = DEFAULT_PORT, host: str = "0.0.0.0"):
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind((host, port))
        self.sock.setblocking(False)

    def poll(self) -> list[bytes]:
        grams = []
        while True:
            try:
                data, _peer = self.sock.recvfrom(512)
            except BlockingIOError:
                return grams
            grams.append(data)

    def close(self) -> None:
        self.sock.close()
