"""Redundant storage cards and the mount ladder.

Two cards, one picked at random per boot. A card whose controller is
latched up can fail in two ways: the mount itself fails (try the other
card, then reformat both, then give up and reboot), or the mount works
but everything using it later hangs until the watchdog cuts in. The
random pick is what eventually steers boots away from a dead card.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

FAULT_NONE = "none"
FAULT_MOUNT = "mount_fail"
FAULT_HANG = "controller_hang"
EMMC_FAULTS = (FAULT_NONE, FAULT_MOUNT, FAULT_HANG)

UNMOUNTED = "unmounted"
MOUNTED = "mounted"
FAILED = "failed"


@dataclass
class EmmcDevice:
    id: str
    fault: str = FAULT_NONE
    mount_state: str = UNMOUNTED

    def __post_init__(self):
        if self.fault not in EMMC_FAULTS:
            raise ValueError(f"unknown fault {self.fault!r}")


@dataclass(frozen=True)
class MountOutcome:
    device: EmmcDevice | None
    data_root: Path | None
    rebooted: bool
    trail: tuple[str, ...]

    @property
    def ready(self) -> bool:
        return self.device is not None


@dataclass
class EmmcBank:
    root: Path
    devices: dict = field(default_factory=dict)
    reformat_works: bool = True

    def __post_init__(self):
        self.root = Path(self.root)
        if not self.devices:
            self.devices = {"A": EmmcDevice("A"), "B": EmmcDevice("B")}

    def set_fault(self, device_id: str, fault: str) -> None:
        self.devices[device_id].fault = fault

    def unmount_all(self) -> None:
        for dev in self.devices.values():
            dev.mount_state = UNMOUNTED

    def _try_mount(self, dev: EmmcDevice, generation: int) -> Path | None:
        if dev.fault == FAULT_MOUNT:
            dev.mount_state = FAILED
            return None
        data_root = self.root / dev.id / f"boot_{generation}"
        data_root.mkdir(parents=True, exist_ok=True)
        dev.mount_state = MOUNTED
        return data_root

    def mount_one(self, rng: random.Random, generation: int) -> MountOutcome:
        """Walk the mount ladder; terminal outcome is mounted or reboot."""
        self.unmount_all()
        ids = sorted(self.devices)
        first = rng.choice(ids)
        second = next(i for i in ids if i != first)
        trail = [f"pick {first}"]

        root = self._try_mount(self.devices[first], generation)
        if root is not None:
            trail.append(f"mounted {first}")
            return MountOutcome(self.devices[first], root, False, tuple(trail))
        trail.append(f"mount_fail {first}")

        root = self._try_mount(self.devices[second], generation)
        if root is not None:
            trail.append(f"mounted {second}")
            return MountOutcome(self.devices[second], root, False, tuple(trail))
        trail.append(f"mount_fail {second}")

        trail.append("reformat both")
        if self.reformat_works:
            for dev in self.devices.values():
                if dev.fault == FAULT_MOUNT:
                    dev.fault = FAULT_NONE
            root = self._try_mount(self.devices[first], generation)
            trail.append(f"mounted {first}")
            return MountOutcome(self.devices[first], root, False, tuple(trail))

        trail.append("reformat_failed")
        trail.append("reboot")
        return MountOutcome(None, None, True, tuple(trail))
