"""Mission script: startup ladder, start handshake, demo cycles.

One boot runs as: boot -> await_start -> health -> (demo -> sleep)* with
ground_idle as the no-motion branch when no start command arrives. The
script pets the watchdog while it is making progress; a wedged storage
controller or an injected suspension stops the petting and the watchdog
path takes over. Reboots are requested, never performed here: the
supervisor owns the stop-the-world step.

All durations scale with config.scale so the 20 min motion + 5 min sleep
flight cycle runs as 20 s + 5 s on a desk.

The waypoint tables are a representative desk sequence (the flight
waypoints were never frozen): an unfold ramp, one leg per joint for
excitation, and two gentle impedance targets.
"""

from __future__ import annotations

import random
import struct
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from ..bus.core import ServiceSpec, TopicSpec
from ..camsim.server import pick_camera
from ..halsim.records import unpack_telemetry
from .emmc import FAULT_HANG, EmmcBank
from .events import EventLog
from .handshake import FLIGHT, StartGate
from .health import TORQUE_LIMIT, check_health
from .persist import StateStore
from .watchdog import Watchdog

import math

UNFOLD_WAYPOINTS = (
    (0.2, -0.3, 0.4, 0.1),
    (0.6, -0.9, 1.1, 0.3),
    (0.9, -1.2, 1.5, 0.5),  # fully stretched into the camera view
)
EXCITATION_WAYPOINTS = (
    (0.4, -1.2, 1.5, 0.5),
    (0.4, -0.6, 1.5, 0.5),
    (0.4, -0.6, 0.8, 0.5),
    (0.4, -0.6, 0.8, -0.3),
)
IMPEDANCE_WAYPOINTS = (
    (0.6, -0.8, 1.0, 0.0),
    (0.5, -0.7, 0.9, 0.1),
)


@dataclass
class MissionConfig:
    scale: float = 1.0 / 60.0
    motion_minutes: float = 20.0
    sleep_minutes: float = 5.0
    video_seconds: float = 30.0      # unscaled, like the minutes above
    start_timeout: float = 2.0       # desk seconds
    pet_period: float = 0.5          # desk seconds
    health_window: float = 1.0       # desk seconds of telemetry
    vmax: float = 1.5
    amax: float = 3.0

    @property
    def motion_duration(self) -> float:
        return self.motion_minutes * 60.0 * self.scale

    @property
    def sleep_duration(self) -> float:
        return self.sleep_minutes * 60.0 * self.scale


@dataclass(frozen=True)
class StartupReport:
    ready: bool
    mounted: str | None
    data_root: Path | None
    rebooted: bool
    hung: bool
    trail: tuple[str, ...] = field(default_factory=tuple)


class Sequencer:
    STATUS_SERVICE = "mission/status"

    def __init__(self, bus, clock, store: StateStore, bank: EmmcBank,
                 watchdog: Watchdog, *, config: MissionConfig | None = None,
                 seed: int = 0, events: EventLog | None = None,
                 inbox: list | None = None, use_camera: bool = True):
        self.bus = bus
        self.clock = clock
        self.store = store
        self.bank = bank
        self.watchdog = watchdog
        self.config = config or MissionConfig()
        self.rng = random.Random(seed)
        self.events = events if events is not None else EventLog()
        self.inbox = inbox if inbox is not None else []
        self.use_camera = use_camera

        self.generation = store.boot_generation
        self.state = "boot"
        self.mode: str | None = None
        self.startup: StartupReport | None = None
        self.data_root: Path | None = None
        self.camera: str | None = None
        self.cycles_completed = 0
        self.demo_cycle = 0
        self.suspended = False  # fault injection: mission process hang
        self.reboot_requested = False
        self.reboot_reason = ""

        self.gate = StartGate(self.config.start_timeout)
        self._torque_ok = True
        self._latest = None
        self._samples: deque = deque(maxlen=256)
        self._agenda: list = []
        self._agenda_i = 0
        self._demo_t0 = 0.0
        self._sleep_t0 = 0.0
        self._health_t0 = 0.0
        self._last_pet = 0.0

        bus.register_topic(TopicSpec("hal/telemetry", "JointTelemetry[4]", 100.0))
        self._sub = bus.subscribe("hal/telemetry")
        bus.register_service(ServiceSpec(self.STATUS_SERVICE),
                             self._svc_status, inline=True)

    # -- services --------------------------------------------------------------

    def _svc_status(self, request: bytes) -> bytes:
        return (f"state={self.state} mode={self.mode or 'undecided'} "
                f"gen={self.generation} cycles={self.cycles_completed}").encode()

    # -- tick entry -------------------------------------------------------------

    def tick(self) -> None:
        if self.suspended or self.state in ("hung", "halted"):
            return  # no petting, no progress: the watchdog decides from here
        now = self.clock.now()
        self._drain_telemetry()
        if self.watchdog.armed and now - self._last_pet >= self.config.pet_period:
            self.bus.call_service(Watchdog.PET_SERVICE, b"")
            self._last_pet = now
        getattr(self, "_tick_" + self.state)(now)

    def _drain_telemetry(self) -> None:
        for payload, _stamp in self._sub.drain():
            self._latest = unpack_telemetry(payload)
            if self.state == "health":
                self._samples.append(self._latest)

    def _request_reboot(self, reason: str) -> None:
        self.reboot_requested = True
        self.reboot_reason = reason
        self.state = "halted"

    # -- boot --------------------------------------------------------------------

    def _tick_boot(self, now: float) -> None:
        self.events.append(now, "boot", f"gen={self.generation}")
        # network bring-up is a no-op here (the bus is always up), then the
        # watchdog guards every later step of the ladder
        self.bus.call_service(Watchdog.ARM_SERVICE, b"")
        self._last_pet = now

        outcome = self.bank.mount_one(self.rng, self.generation)
        hung = bool(outcome.device and outcome.device.fault == FAULT_HANG)
        self.startup = StartupReport(
            ready=outcome.ready, mounted=outcome.device.id if outcome.device else None,
            data_root=outcome.data_root, rebooted=outcome.rebooted,
            hung=hung, trail=outcome.trail)
        if outcome.rebooted:
            self.events.append(now, "fault",
                               "emmc_unrecoverable " + " -> ".join(outcome.trail))
            self._request_reboot("emmc_unrecoverable")
            return
        if any(step.startswith("mount_fail") for step in outcome.trail):
            self.events.append(now, "fault", " -> ".join(outcome.trail))
        self.data_root = outcome.data_root
        if hung:
            # the card mounted but its controller wedges every access; this
            # script stalls on it and stops petting
            self.state = "hung"
            return
        self.state = "await_start"

    # -- start handshake -----------------------------------------------------------

    def _tick_await_start(self, now: float) -> None:
        while self.inbox:
            self.gate.offer(self.inbox.pop(0))
        decision = self.gate.poll(now)
        if decision is None:
            return
        self.mode = decision
        self.events.append(now, "start_cmd", decision)
        if decision != FLIGHT:
            self.state = "ground_idle"
            return
        self.bus.set_parameter("controller/enable", True)
        if not self.store.hdrm_released:
            self.events.append(now, "hdrm_release", "one-shot")
            self.store.mark_hdrm_released()
        self._samples.clear()
        self._health_t0 = now
        self.state = "health"

    def _tick_ground_idle(self, now: float) -> None:
        pass  # keep petting (done in tick()), never power the robot

    # -- health ------------------------------------------------------------------

    def _tick_health(self, now: float) -> None:
        if now - self._health_t0 < self.config.health_window:
            return
        report = check_health(list(self._samples))
        self.events.append(now, "health_check",
                           "pass" if report.ok else report.reason)
        if report.ok or report.skip_torque_phases:
            self._torque_ok = report.ok
            self._enter_demo(now)
        else:
            self.events.append(now, "fault", f"health {report.reason}")
            self._request_reboot(f"health_{report.reason}")

    # -- demo cycle -----------------------------------------------------------------

    def _enter_demo(self, now: float) -> None:
        if self.use_camera and self.camera is None:
            # one camera per boot: switching mid-mission corrupts the link
            self.camera = pick_camera(self.rng)
            self.bus.call_service("camera/select", self.camera.encode())
        self.demo_cycle = self.cycles_completed + 1
        self.events.append(now, "demo_start",
                           f"cycle={self.demo_cycle} camera={self.camera or 'none'}")
        self._demo_t0 = now
        self._agenda = self._build_agenda()
        self._agenda_i = 0
        self.state = "demo"

    def _tick_demo(self, now: float) -> None:
        t = now - self._demo_t0
        while self._agenda_i < len(self._agenda) and self._agenda[self._agenda_i][0] <= t:
            self._agenda[self._agenda_i][1](now)
            self._agenda_i += 1

    def _tick_sleep(self, now: float) -> None:
        if now - self._sleep_t0 >= self.config.sleep_duration:
            self._enter_demo(now)

    def _build_agenda(self) -> list:
        """(time offset, action) pairs covering one motion block."""
        cfg = self.config
        total = cfg.motion_duration
        pos_end, exc_end, imp_end = 0.4 * total, 0.7 * total, 0.9 * total
        agenda = []

        # position-controlled motions; record the unfold start, then an
        # image of the fully extended arm
        agenda.append((0.0, lambda now: self._set_mode("interpolator")))
        agenda.append((0.0, lambda now: self._record_video()))
        slot = pos_end / len(UNFOLD_WAYPOINTS)
        for k, wp in enumerate(UNFOLD_WAYPOINTS):
            agenda.append((k * slot, lambda now, wp=wp: self._plan(wp)))
        agenda.append((pos_end - 0.05 * total,
                       lambda now: self._take_image("full_view")))

        # joint excitation with a picture after each leg
        slot = (exc_end - pos_end) / len(EXCITATION_WAYPOINTS)
        for k, wp in enumerate(EXCITATION_WAYPOINTS):
            agenda.append((pos_end + k * slot, lambda now, wp=wp: self._plan(wp)))
            agenda.append((pos_end + (k + 0.9) * slot,
                           lambda now, k=k: self._take_image(f"excite_{k}")))

        # gate, then the torque-dependent tail
        agenda.append((exc_end, self._torque_gate))
        agenda.append((exc_end, lambda now: self._torque_ok
                       and self._set_mode("impedance")))
        slot = (imp_end - exc_end) / len(IMPEDANCE_WAYPOINTS)
        for k, wp in enumerate(IMPEDANCE_WAYPOINTS):
            agenda.append((exc_end + k * slot,
                           lambda now, wp=wp: self._torque_ok
                           and self.bus.set_parameter("controller/q_des", list(wp))))
        agenda.append((imp_end, lambda now: self._torque_ok
                       and self._set_mode("virtual_fixtures")))

        agenda.append((total, self._end_demo))
        agenda.sort(key=lambda item: item[0])
        return agenda

    def _end_demo(self, now: float) -> None:
        self.cycles_completed += 1
        self.events.append(now, "demo_end", f"cycle={self.demo_cycle}")
        self._set_mode("idle")
        self.events.append(now, "sleep", f"{self.config.sleep_duration:.1f}s")
        self._sleep_t0 = now
        self.state = "sleep"

    # -- demo actions -------------------------------------------------------------

    def _set_mode(self, name: str) -> None:
        self.bus.set_parameter("controller/mode", name)

    def _plan(self, waypoint) -> None:
        payload = struct.pack("<6d", *waypoint, self.config.vmax, self.config.amax)
        self.bus.call_service("controller/plan", payload)

    def _take_image(self, tag: str) -> None:
        if not self.use_camera:
            return
        req = f"{self.camera} 640 480 linear rgb8 0"
        self.bus.call_service("camera/take_image", req.encode())

    def _record_video(self) -> None:
        if not self.use_camera:
            return
        duration = self.config.video_seconds * self.config.scale
        req = f"{self.camera} 320 240 wide rgb8 0 {duration:.3f}"
        self.bus.call_service("camera/record_video", req.encode())

    def _torque_gate(self, now: float) -> None:
        frame = self._latest
        ok = frame is not None and all(
            math.isfinite(t.torque) and abs(t.torque) <= TORQUE_LIMIT
            for t in frame)
        self._torque_ok = ok
        self.events.append(now, "health_check",
                           "torque_gate pass" if ok else "torque_gate fail")
        if not ok:
            self.events.append(now, "fault", "torque_gate skip=impedance,vf")
