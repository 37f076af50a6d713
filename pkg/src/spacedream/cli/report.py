"""Run reports: structured results of one scenario run.

The machine-readable form is line-oriented key=value text, fully
deterministic for a fixed seed (no wall-clock timestamps, sorted keys
where the source is a set or dict). The human summary is a short table
on top of the same data.

CHECKS is the registry of named assertions a scenario's [expect] block
can reference; each receives the finished report and an optional
integer argument and returns (ok, detail).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple


@dataclass(frozen=True)
class FileEntry:
    """Ground-side view of one transferred file."""

    generation: int
    name: str
    file_id: int
    size: int            # -1 when the metadata fragment never arrived
    total_frags: int     # -1 likewise
    received_frags: int
    holes: int           # -1 when unknown
    complete: bool
    has_meta: bool
    has_header_copy: bool
    frag0_received: bool
    head2: bytes         # first two reassembled bytes, b"" when unknown

    def status(self) -> str:
        if self.complete:
            return "complete"
        if not self.has_meta:
            return f"unknown rx_frags={self.received_frags}"
        return f"holes:{self.holes}"


@dataclass(frozen=True)
class CheckResult:
    name: str
    arg: int | None
    ok: bool
    detail: str


@dataclass
class RunReport:
    scenario: str
    seed: int
    scale: float
    ticks: int = 0
    sim_seconds: float = 0.0
    drain_seconds: float = 0.0

    reboots: int = 0
    generations: tuple[int, ...] = ()
    cycles: int = 0
    hdrm_releases: int = 0
    motion_commands: int = 0
    events: tuple[str, ...] = ()

    command_sets: int = 0
    controller_ticks: int = 0
    tracking_error_max: float = 0.0
    jitter_ms_max: float = 0.0
    jitter_ms_mean: float = 0.0
    mode_seconds: dict = field(default_factory=dict)

    recorder_bytes: int = 0
    recorder_rate_bits: float = 0.0
    recorder_records: int = 0

    packets_sent: int = 0
    bytes_sent: int = 0
    channel_sent: int = 0
    channel_dropped: int = 0
    channel_corrupted: int = 0
    rx_packets: int = 0
    rx_fragments: int = 0
    rx_rejected: int = 0
    rx_duplicates: int = 0
    files: tuple[FileEntry, ...] = ()

    checks: tuple[CheckResult, ...] = ()

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def files_complete(self) -> int:
        return sum(1 for f in self.files if f.complete)

    @property
    def files_with_holes(self) -> int:
        return sum(1 for f in self.files if f.has_meta and not f.complete)

    @property
    def files_unknown(self) -> int:
        return sum(1 for f in self.files if not f.has_meta)


def render_report(r: RunReport) -> str:
    lines = [
        f"scenario={r.scenario}",
        f"seed={r.seed}",
        f"scale={r.scale:.6f}",
        f"ticks={r.ticks}",
        f"sim_seconds={r.sim_seconds:.2f}",
        f"drain_seconds={r.drain_seconds:.2f}",
        f"reboots={r.reboots}",
        "generations=" + ",".join(str(g) for g in r.generations),
        f"cycles={r.cycles}",
        f"hdrm_releases={r.hdrm_releases}",
        f"motion_commands={r.motion_commands}",
        f"controller.command_sets={r.command_sets}",
        f"controller.ticks={r.controller_ticks}",
        f"controller.tracking_error_max={r.tracking_error_max:.6f}",
        f"controller.jitter_ms_max={r.jitter_ms_max:.3f}",
        f"controller.jitter_ms_mean={r.jitter_ms_mean:.3f}",
    ]
    for name in sorted(r.mode_seconds):
        lines.append(f"controller.mode_seconds.{name}={r.mode_seconds[name]:.2f}")
    lines += [
        f"recorder.bytes={r.recorder_bytes}",
        f"recorder.rate_bits={r.recorder_rate_bits:.0f}",
        f"recorder.records={r.recorder_records}",
        f"transfer.packets_sent={r.packets_sent}",
        f"transfer.bytes_sent={r.bytes_sent}",
        f"channel.sent={r.channel_sent}",
        f"channel.dropped={r.channel_dropped}",
        f"channel.corrupted={r.channel_corrupted}",
        f"rx.packets={r.rx_packets}",
        f"rx.fragments={r.rx_fragments}",
        f"rx.rejected={r.rx_rejected}",
        f"rx.duplicates={r.rx_duplicates}",
        f"transfer.files={len(r.files)}",
        f"transfer.complete={r.files_complete}",
        f"transfer.with_holes={r.files_with_holes}",
        f"transfer.unknown={r.files_unknown}",
    ]
    for entry in sorted(r.files, key=lambda f: (f.generation, f.name)):
        lines.append(f"file.{entry.generation}.{entry.name}={entry.status()}"
                     f" size={entry.size}")
    for i, event in enumerate(r.events):
        lines.append(f"event.{i}={event}")
    for check in r.checks:
        arg = "" if check.arg is None else f" {check.arg}"
        verdict = "pass" if check.ok else f"FAIL ({check.detail})"
        lines.append(f"check.{check.name}{arg}={verdict}")
    lines.append(f"result={'pass' if r.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"


def render_summary(r: RunReport) -> str:
    """Short human-readable table for the console."""
    rows = [
        ("scenario", r.scenario),
        ("cycles", str(r.cycles)),
        ("reboots", str(r.reboots)),
        ("events", str(len(r.events))),
        ("motion commands", str(r.motion_commands)),
        ("tracking err max", f"{r.tracking_error_max:.4f} rad"),
        ("recorder rate", f"{r.recorder_rate_bits / 1e6:.3f} Mbit/s"),
        ("files at ground", f"{len(r.files)} ({r.files_complete} complete, "
                            f"{r.files_with_holes} with holes)"),
    ]
    width = max(len(k) for k, _ in rows)
    out = [f"{k.ljust(width)}  {v}" for k, v in rows]
    for check in r.checks:
        arg = "" if check.arg is None else f" {check.arg}"
        mark = "ok  " if check.ok else "FAIL"
        out.append(f"{mark} {check.name}{arg}"
                   + ("" if check.ok else f": {check.detail}"))
    out.append(f"result: {'pass' if r.passed else 'FAIL'}")
    return "\n".join(out) + "\n"


# -- named checks -------------------------------------------------------------


class Check(NamedTuple):
    fn: Callable
    takes_arg: bool
    doc: str


def _chk_reboots(r: RunReport, arg: int):
    return r.reboots == arg, f"saw {r.reboots} reboots"


def _chk_cycles(r: RunReport, arg: int):
    return r.cycles >= arg, f"completed {r.cycles} cycles"


def _chk_motion_commands(r: RunReport, arg: int):
    return r.motion_commands == arg, f"saw {r.motion_commands} motion commands"


def _chk_files_accounted(r: RunReport, arg):
    bad = [f.name for f in r.files if not f.has_meta]
    return (not bad,
            f"{len(bad)} files lack metadata: {', '.join(sorted(bad)[:5])}")


def _chk_transfer_complete(r: RunReport, arg):
    bad = [f.name for f in r.files if not f.complete]
    return (not bad and bool(r.files),
            f"{len(bad)}/{len(r.files)} incomplete: {', '.join(sorted(bad)[:5])}")


def _chk_fallback_event(r: RunReport, arg):
    hit = any(" fault " in e and "mount_fail" in e for e in r.events)
    return hit, "no mount-fallback fault event in the log"


def _chk_jpeg_magic(r: RunReport, arg):
    bad = [f.name for f in r.files
           if f.name.endswith(".jpg") and f.has_meta
           and (f.frag0_received or f.has_header_copy)
           and f.head2 != b"\xff\xd8"]
    return not bad, f"bad JPEG start: {', '.join(sorted(bad)[:5])}"


def _chk_both_generations(r: RunReport, arg):
    gens = {f.generation for f in r.files}
    return len(gens) >= 2, f"ground holds generations {sorted(gens)}"


def _chk_hdrm_once(r: RunReport, arg):
    return r.hdrm_releases == 1, f"{r.hdrm_releases} release events"


CHECKS: dict[str, Check] = {
    "reboots": Check(_chk_reboots, True, "exactly N reboot events"),
    "cycles": Check(_chk_cycles, True, "at least N demo cycles completed"),
    "motion_commands": Check(_chk_motion_commands, True,
                             "exactly N non-off joint commands on the bus"),
    "files_accounted": Check(_chk_files_accounted, False,
                             "every received file complete or hole-reported"),
    "transfer_complete": Check(_chk_transfer_complete, False,
                               "every received file bit-complete"),
    "fallback_event": Check(_chk_fallback_event, False,
                            "storage mount fallback recorded"),
    "jpeg_magic": Check(_chk_jpeg_magic, False,
                        "JPEGs with a recovered header start with 0xFFD8"),
    "both_generations": Check(_chk_both_generations, False,
                              "ground retains files from >= 2 boots"),
    "hdrm_once": Check(_chk_hdrm_once, False,
                       "hold-down release fired exactly once across boots"),
}


def run_checks(report: RunReport, checks) -> tuple[CheckResult, ...]:
    results = []
    for name, arg in checks:
        ok, detail = CHECKS[name].fn(report, arg)
        results.append(CheckResult(name, arg, bool(ok), detail))
    return tuple(results)
