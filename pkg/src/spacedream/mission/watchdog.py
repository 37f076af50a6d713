"""Simulated hardware watchdog.

Observes pet timestamps and fires at most once per arm: the reboot it
triggers resets the whole world including this peripheral, so a latched
`fired` models the one hard reset per expiry.
"""

from __future__ import annotations

from typing import Callable

from ..bus.core import ServiceSpec


class Watchdog:
    ARM_SERVICE = "watchdog/arm"
    PET_SERVICE = "watchdog/pet"

    def __init__(self, clock, timeout: float = 5.0, *, bus=None,
                 on_expire: Callable[[float], None] | None = None):
        if timeout <= 0:
            raise ValueError("timeout must be positive")
        self.clock = clock
        self.timeout = timeout
        self.on_expire = on_expire
        self.armed = False
        self.fired = False
        self.last_pet = 0.0
        self.pets = 0
        if bus is not None:
            bus.register_service(ServiceSpec(self.ARM_SERVICE),
                                 self._svc_arm, inline=True)
            bus.register_service(ServiceSpec(self.PET_SERVICE),
                                 self._svc_pet, inline=True)

    def _svc_arm(self, request: bytes) -> bytes:
        self.arm(self.clock.now())
        return b"ok"

    def _svc_pet(self, request: bytes) -> bytes:
        self.pet(self.clock.now())
        return b"ok"

    def arm(self, now: float) -> None:
        self.armed = True
        self.fired = False
        self.last_pet = now

    def pet(self, now: float) -> None:
        if self.armed:
            self.last_pet = now
            self.pets += 1

    def check(self, now: float) -> bool:
        """True exactly once when the pet deadline has passed."""
        if not self.armed or self.fired:
            return False
        if now - self.last_pet <= self.timeout:
            return False
        self.fired = True
        if self.on_expire is not None:
            self.on_expire(now)
        return True
