"""End-to-end mission runs.

One OS process hosts the whole flight segment. Every flight module is
registered as a virtual process with the supervisor, so bring-up follows
the flight dependency order (power first, HAL before the controller,
data movers after the mission manager has mounted storage), then a
single loop advances the shared clock in 10 ms steps.

The ground segment (lossy channel, receiver) lives outside the
supervised graph and survives reboots; flight-side state survives only
through the persisted store, exactly like the real unit. A watchdog
expiry or an unrecoverable mount tears the flight segment down and
brings it back up with the next boot generation.
"""

from __future__ import annotations

import heapq
import itertools
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..bus.core import Bus
from ..camsim.server import CameraServer
from ..clock import SimClock, WallClock
from ..controller.fsm import HL, Mode
from ..controller.process import ControlProcess, unpack_state
from ..datasync.channel import ChannelSim
from ..datasync.receiver import Receiver
from ..datasync.sender import Sender
from ..datasync.syncconfig import SyncSettings, TransferConfig
from ..halsim.link import HalSim
from ..halsim.records import MODE_OFF, unpack_commands
from ..mission import (
    START_MAGIC,
    EmmcBank,
    EventLog,
    MissionConfig,
    Sequencer,
    StateStore,
    Watchdog,
)
from ..procman.config import load_config
from ..procman.supervisor import Supervisor, VirtualLauncher
from ..recorder.recorder import FLIGHT_PROFILE, FULL_PROFILE, Recorder
from .report import FileEntry, RunReport, render_report, run_checks
from .scenario import Scenario

DT = 0.01
REBOOT_COST = 0.25     # seconds the computer is dark during a reset
SENDER_POLL = 0.25     # folder scan period; pumping still runs every tick
DRAIN_LIMIT = 600.0    # give up flushing the downlink after this much sim time

# Flight process graph. Ordering mirrors the real unit: the power board
# comes up first (it hosts the watchdog), the HAL must exist before the
# controller opens the cyclic link, and everything that touches the data
# partition waits for the mission manager to mount a card.
PROCESS_GRAPH = """\
[process:power]
command = virtual power
ready = ^power up

[process:hal]
command = virtual hal
depends = power
ready = ^hal up

[process:controller]
command = virtual controller
depends = hal
ready = ^controller up

[process:mission]
command = virtual mission
depends = controller
ready = ^mission up

[process:camera]
command = virtual camera
depends = mission
ready = ^camera up

[process:recorder]
command = virtual recorder
depends = mission
ready = ^recorder up

[process:downlink]
command = virtual downlink
depends = mission
ready = ^downlink up
"""


class _Ground:
    """Radio channel plus receiving station; outlives flight reboots."""

    def __init__(self, scn: Scenario, clock):
        self.clock = clock
        self.channel = ChannelSim(loss=scn.loss, corrupt=scn.corrupt,
                                  reorder_window=scn.reorder,
                                  bandwidth_bits=scn.bandwidth_bits,
                                  seed=scn.channel_seed)
        self.receiver = Receiver()
        self._pending: list = []
        self._order = itertools.count()

    def transmit(self, packet: bytes) -> None:
        now = self.clock.now()
        for when, data in self.channel.send(packet, now):
            heapq.heappush(self._pending, (when, next(self._order), data))

    def deliver(self, now: float) -> None:
        while self._pending and self._pending[0][0] <= now:
            _, _, data = heapq.heappop(self._pending)
            self.receiver.ingest_packet(data)

    def flush(self, now: float) -> None:
        for when, data in self.channel.flush(now):
            heapq.heappush(self._pending, (when, next(self._order), data))
        self.deliver(float("inf"))


@dataclass
class _Flight:
    """Everything that dies on a reboot."""

    bus: Bus
    watchdog: Watchdog
    hal: HalSim
    controller: ControlProcess
    seq: Sequencer
    camera: CameraServer | None
    recorder: Recorder | None
    sender: Sender | None
    supervisor: Supervisor
    inbox: list
    cmd_sub: object
    state_sub: object
    next_poll: float = 0.0


@dataclass
class _Metrics:
    ticks: int = 0
    controller_ticks: int = 0
    command_sets: int = 0
    motion_commands: int = 0
    tracking_error_max: float = 0.0
    mode_seconds: dict = field(default_factory=dict)
    recorder_bytes: int = 0
    recorder_records: int = 0
    recorder_seconds: float = 0.0
    packets_sent: int = 0
    bytes_sent: int = 0
    jitter: list = field(default_factory=list)


class ScenarioRun:
    def __init__(self, scn: Scenario, workdir, *, wallclock: bool = False):
        self.scn = scn
        self.workdir = Path(workdir)
        self.clock = WallClock() if wallclock else SimClock()
        self.wallclock = wallclock
        self.t0 = self.clock.now()
        self.store = StateStore(self.workdir / "state")
        self.bank = EmmcBank(self.workdir / "emmc",
                             reformat_works=scn.reformat_works)
        for device, fault in (("A", scn.fault_a), ("B", scn.fault_b)):
            self.bank.set_fault(device, fault)
        self.events = EventLog()
        self.ground = _Ground(scn, self.clock)
        self.metrics = _Metrics()
        self.reboots = 0
        self.generations: list[int] = []
        self._faults = list(scn.faults)
        self._start_at: float | None = None
        self.flight = self._bring_up()

    # -- flight segment -------------------------------------------------------

    def _sync_settings(self) -> SyncSettings:
        resend = self.scn.resend
        return SyncSettings(
            rate_bits=self.scn.rate_bits,
            folders={"media": TransferConfig(priority=self.scn.media_priority,
                                             resend_count=resend)},
            default=TransferConfig(priority=1, resend_count=resend))

    def _bring_up(self) -> _Flight:
        scn = self.scn
        generation = self.store.boot_generation
        self.generations.append(generation)
        bus = Bus()
        inbox: list = []
        parts: dict = {}

        def power_proc(spec, emit):
            parts["watchdog"] = Watchdog(self.clock, timeout=5.0, bus=bus)
            emit("power up")

        def hal_proc(spec, emit):
            parts["hal"] = HalSim(bus, self.clock, self.store.load_plant())
            emit("hal up")

        def controller_proc(spec, emit):
            parts["controller"] = ControlProcess(bus, self.clock)
            emit("controller up")

        def mission_proc(spec, emit):
            seq = Sequencer(bus, self.clock, self.store, self.bank,
                            parts["watchdog"],
                            config=MissionConfig(scale=scn.scale),
                            seed=scn.seed + generation,
                            events=self.events, inbox=inbox)
            parts["seq"] = seq
            # first tick runs the mount ladder, so the data movers below
            # know which card's partition to live on
            seq.tick()
            emit(f"mission up gen={generation} state={seq.state}")

        def camera_proc(spec, emit):
            root = parts["seq"].data_root
            if root is not None:
                lo, hi = 3.0 * scn.scale, 22.0 * scn.scale
                parts["camera"] = CameraServer(
                    self.clock, root / "media", bus=bus,
                    latency_range=(lo, hi), seed=scn.seed * 1000 + generation)
            emit("camera up")

        def recorder_proc(spec, emit):
            root = parts["seq"].data_root
            if root is not None:
                profile = (FULL_PROFILE if scn.recorder_profile == "full"
                           else FLIGHT_PROFILE)
                parts["recorder"] = Recorder(
                    bus, self.clock, root / "telemetry", dict(profile),
                    generation=generation, rotate_bytes=scn.rotate_bytes)
            emit("recorder up")

        def downlink_proc(spec, emit):
            root = parts["seq"].data_root
            if root is not None:
                parts["sender"] = Sender(root, self._sync_settings(),
                                         self.ground.transmit,
                                         generation=generation,
                                         recycle_retired=False)
            emit("downlink up")

        launcher = VirtualLauncher()
        launcher.register("power", power_proc)
        launcher.register("hal", hal_proc)
        launcher.register("controller", controller_proc)
        launcher.register("mission", mission_proc)
        launcher.register("camera", camera_proc)
        launcher.register("recorder", recorder_proc)
        launcher.register("downlink", downlink_proc)
        supervisor = Supervisor(load_config(PROCESS_GRAPH), launcher,
                                clock=self.clock.now)
        supervisor.start_all(strict=True)

        if scn.start_delay >= 0:
            self._start_at = self.clock.now() + scn.start_delay
        else:
            self._start_at = None
        return _Flight(
            bus=bus, watchdog=parts["watchdog"], hal=parts["hal"],
            controller=parts["controller"], seq=parts["seq"],
            camera=parts.get("camera"), recorder=parts.get("recorder"),
            sender=parts.get("sender"), supervisor=supervisor, inbox=inbox,
            cmd_sub=bus.subscribe(HalSim.COMMAND_TOPIC),
            state_sub=bus.subscribe(ControlProcess.STATE_TOPIC),
            next_poll=self.clock.now())

    def _tear_down(self, reason: str) -> None:
        now = self.clock.now()
        fl = self.flight
        self.events.append(now, "reboot", reason)
        self.reboots += 1
        self._harvest(fl)
        self.store.save_plant(fl.hal.plant)
        self.store.bump_boot_generation()
        fl.supervisor.stop_all()

    def _reboot(self, reason: str) -> None:
        self._tear_down(reason)
        self._pass_time(REBOOT_COST)
        self.flight = self._bring_up()

    def _pass_time(self, dt: float) -> None:
        if self.wallclock:
            time.sleep(dt)
        else:
            self.clock.advance(dt)

    def _harvest(self, fl: _Flight) -> None:
        """Fold a flight segment's counters into the run totals."""
        m = self.metrics
        if fl.recorder is not None:
            fl.recorder.close()
            m.recorder_bytes += fl.recorder.bytes_written
            m.recorder_records += fl.recorder.record_count
        if fl.sender is not None:
            m.packets_sent += fl.sender.packets_sent
            m.bytes_sent += fl.sender.bytes_sent

    # -- per-tick work ----------------------------------------------------------

    def _apply_faults(self, now: float) -> None:
        while self._faults and self._faults[0].time <= now:
            action = self._faults.pop(0)
            if action.module == "mission":
                self.flight.seq.suspended = action.args[0] == "suspend"
            elif action.module == "hal":
                self.flight.bus.call_service(HalSim.FAULT_SERVICE,
                                             " ".join(action.args).encode())
            elif action.module == "storage":
                self.bank.set_fault(action.args[0], action.args[1])

    def _trace(self, fl: _Flight) -> None:
        m = self.metrics
        for payload, _stamp in fl.cmd_sub.drain():
            m.command_sets += 1
            for cmd in unpack_commands(payload):
                if cmd.mode != MODE_OFF:
                    m.motion_commands += 1
        for payload, _stamp in fl.state_sub.drain():
            s = unpack_state(payload)
            if s.mode != 255:
                name = Mode(s.mode).name.lower()
            else:
                name = HL(s.hl).name.lower()
            m.mode_seconds[name] = m.mode_seconds.get(name, 0.0) + DT
            if s.tracking_error > m.tracking_error_max:
                m.tracking_error_max = s.tracking_error

    def _tick(self) -> None:
        now = self.clock.now()
        fl = self.flight
        self._apply_faults(now)
        if self._start_at is not None and now >= self._start_at:
            fl.inbox.append(START_MAGIC)
            self._start_at = None

        fl.seq.tick()
        fl.controller.tick()
        if fl.camera is not None:
            fl.camera.tick()
        if fl.recorder is not None:
            fl.recorder.tick()
        if fl.sender is not None:
            if now >= fl.next_poll:
                fl.sender.poll_files(now)
                fl.next_poll = now + SENDER_POLL
            fl.sender.pump(now)
        self.ground.deliver(now)
        self._trace(fl)
        self.metrics.ticks += 1
        self.metrics.controller_ticks += 1

        if fl.watchdog.check(now):
            self._reboot("watchdog")
            return
        if fl.seq.reboot_requested:
            self._reboot(fl.seq.reboot_reason)
            return
        self._advance()

    def _advance(self) -> None:
        if not self.wallclock:
            self.clock.advance(DT)
            return
        target = self._last_wall + DT if hasattr(self, "_last_wall") else None
        if target is not None:
            while True:
                now = time.monotonic()
                if now >= target:
                    break
                time.sleep(min(0.002, target - now))
            self.metrics.jitter.append(abs(time.monotonic() - target))
            self._last_wall = target
        else:
            self._last_wall = time.monotonic()

    # -- run --------------------------------------------------------------------

    def _cycles_done(self) -> int:
        return self.events.count("demo_end")

    def run(self) -> None:
        scn = self.scn
        while True:
            elapsed = self.clock.now() - self.t0
            if elapsed >= scn.duration:
                break
            if scn.cycles is not None and self._cycles_done() >= scn.cycles:
                break
            self._tick()
        self.metrics.recorder_seconds = self.clock.now() - self.t0
        self._drain()

    def _drain(self) -> None:
        """Freeze the mission, then let the downlink empty its backlog."""
        fl = self.flight
        if fl.recorder is not None:
            fl.recorder.close()  # seal active log segments for pickup
        t0 = self.clock.now()
        if fl.sender is not None:
            while self.clock.now() - t0 < DRAIN_LIMIT:
                now = self.clock.now()
                fl.sender.poll_files(now)
                fl.sender.pump(now)
                self.ground.deliver(now)
                if fl.sender.idle:
                    break
                self._pass_time(DT)
        self.drain_seconds = self.clock.now() - t0
        self.ground.flush(self.clock.now())
        self._harvest(fl)

    # -- reporting ----------------------------------------------------------------

    def _file_entries(self) -> tuple[FileEntry, ...]:
        rx = self.ground.receiver
        entries = []
        for (fid, gen), man in rx.manifests.items():
            meta = man.meta
            head2 = b""
            holes = -1
            if meta is not None:
                content, hole_list = rx.reassemble(fid, gen)
                head2 = bytes(content[:2])
                holes = len(hole_list)
            entries.append(FileEntry(
                generation=gen,
                name=meta.name if meta is not None else f"id{fid:016x}",
                file_id=fid,
                size=meta.size if meta is not None else -1,
                total_frags=meta.total_frags if meta is not None else -1,
                received_frags=len(man.data),
                holes=holes,
                complete=man.complete,
                has_meta=meta is not None,
                has_header_copy=man.header_copy is not None,
                frag0_received=0 in man.data,
                head2=head2))
        return tuple(sorted(entries, key=lambda e: (e.generation, e.name)))

    def build_report(self) -> RunReport:
        m = self.metrics
        stats = self.ground.channel.stats
        rx = self.ground.receiver.stats
        jitter_max = max(m.jitter) * 1e3 if m.jitter else 0.0
        jitter_mean = (sum(m.jitter) / len(m.jitter) * 1e3) if m.jitter else 0.0
        seconds = max(m.recorder_seconds, 1e-9)
        report = RunReport(
            scenario=self.scn.name,
            seed=self.scn.seed,
            scale=self.scn.scale,
            ticks=m.ticks,
            sim_seconds=self.clock.now() - self.t0,
            drain_seconds=getattr(self, "drain_seconds", 0.0),
            reboots=self.reboots,
            generations=tuple(self.generations),
            cycles=self._cycles_done(),
            hdrm_releases=self.events.count("hdrm_release"),
            motion_commands=m.motion_commands,
            events=tuple(self.events.lines()),
            command_sets=m.command_sets,
            controller_ticks=m.controller_ticks,
            tracking_error_max=m.tracking_error_max,
            jitter_ms_max=jitter_max,
            jitter_ms_mean=jitter_mean,
            mode_seconds=dict(sorted(m.mode_seconds.items())),
            recorder_bytes=m.recorder_bytes,
            recorder_rate_bits=m.recorder_bytes * 8 / seconds,
            recorder_records=m.recorder_records,
            packets_sent=m.packets_sent,
            bytes_sent=m.bytes_sent,
            channel_sent=stats.sent,
            channel_dropped=stats.dropped,
            channel_corrupted=stats.corrupted,
            rx_packets=rx.packets,
            rx_fragments=rx.fragments,
            rx_rejected=rx.rejected,
            rx_duplicates=rx.duplicates,
            files=self._file_entries())
        report.checks = run_checks(report, self.scn.checks)
        return report


def run_scenario(scn: Scenario, *, out_dir=None, workdir=None,
                 wallclock: bool = False) -> RunReport:
    """Execute one scenario and return its report.

    `workdir` holds the flight-side state (eMMC partitions, persisted
    store); a temporary directory is used when not given. `out_dir`, if
    set, receives report.txt, events.log, and the reassembled rx/ tree.
    """
    own_workdir = workdir is None
    if own_workdir:
        workdir = tempfile.mkdtemp(prefix="spacedream-run-")
    try:
        run = ScenarioRun(scn, workdir, wallclock=wallclock)
        run.run()
        report = run.build_report()
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "report.txt").write_text(render_report(report))
            (out / "events.log").write_text(
                "\n".join(report.events) + "\n" if report.events else "")
            run.ground.receiver.write_out(out / "rx")
        return report
    finally:
        if own_workdir:
            shutil.rmtree(workdir, ignore_errors=True)
