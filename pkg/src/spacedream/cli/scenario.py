"""Mission scenario files.

A scenario is an INI file describing one end-to-end run: time scale,
stop condition, radio channel model, storage faults present at boot,
a fault-injection schedule, and the checks the run must satisfy.
Every key has a default, so the empty file is a valid nominal run.

    [scenario]
    name = nominal
    scale = 1/60        ; time compression applied to flight seconds
    duration = 120      ; sim-seconds hard stop
    cycles = 3          ; optional: stop once this many demo cycles finished
    seed = 0
    start_delay = 0.5   ; ground sends the start datagram this long after
                        ; each boot; -1 means never (ground-test behavior)

    [channel]
    loss = 0.05         ; Bernoulli packet loss probability
    corrupt = 0.0       ; single-byte corruption probability
    reorder = 0         ; reorder buffer depth, 0 = in-order
    bandwidth = 0       ; bits/s, 0 = unlimited
    seed = 7

    [storage]
    fault_a = none      ; none | mount_fail | controller_hang
    fault_b = none
    reformat_works = true

    [transfer]
    rate = 20e6         ; downlink budget, bits/s
    resend = 3          ; times each fragment is sent
    media_priority = 5  ; camera files outrank telemetry logs

    [recorder]
    profile = flight    ; flight | full (full adds the camera stream)
    rotate_kib = 256

    [faults]
    schedule =
        12.0 mission suspend
        30.0 hal torque_sensor_invalid 2 1
        40.0 storage A mount_fail

    [expect]
    checks =
        reboots 1
        both_generations

Fault lines are `time module args...`. `mission suspend|resume` hangs or
resumes the mission process; `hal <kind> <joint> <0|1>` toggles a joint
fault; `storage <device> <kind>` marks a card bad for the next mount.
Check names are listed in the report module's registry; most take one
integer argument.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from ..mission.emmc import FAULT_HANG, FAULT_MOUNT, FAULT_NONE
from .report import CHECKS

_HAL_FAULT_KINDS = ("torque_sensor_invalid", "joint_stuck", "link_corrupt_config")
_STORAGE_FAULTS = (FAULT_NONE, FAULT_MOUNT, FAULT_HANG)


class ScenarioError(Exception):
    pass


@dataclass(frozen=True)
class FaultAction:
    time: float
    module: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class Scenario:
    name: str = "nominal"
    scale: float = 1.0 / 60.0
    duration: float = 120.0
    cycles: int | None = 3
    seed: int = 0
    start_delay: float = 0.5

    loss: float = 0.0
    corrupt: float = 0.0
    reorder: int = 0
    bandwidth_bits: float | None = None
    channel_seed: int = 7

    fault_a: str = FAULT_NONE
    fault_b: str = FAULT_NONE
    reformat_works: bool = True

    rate_bits: float = 20e6
    resend: int = 3
    media_priority: int = 5

    recorder_profile: str = "flight"
    rotate_bytes: int = 256 * 1024

    faults: tuple[FaultAction, ...] = ()
    checks: tuple[tuple[str, int | None], ...] = ()

    def __post_init__(self):
        if self.scale <= 0:
            raise ScenarioError("scale must be positive")
        if self.duration <= 0:
            raise ScenarioError("duration must be positive")
        if self.cycles is not None and self.cycles <= 0:
            raise ScenarioError("cycles must be positive when set")
        for action in self.faults:
            if not 0.0 <= action.time <= self.duration:
                raise ScenarioError(
                    f"fault at t={action.time} outside run duration")


def _parse_scale(raw: str) -> float:
    """Accept either a float or an m/n fraction like 1/60."""
    raw = raw.strip()
    if "/" in raw:
        num, _, den = raw.partition("/")
        try:
            return float(num) / float(den)
        except (ValueError, ZeroDivisionError) as exc:
            raise ScenarioError(f"bad scale {raw!r}: {exc}") from None
    try:
        return float(raw)
    except ValueError as exc:
        raise ScenarioError(f"bad scale {raw!r}: {exc}") from None


def _parse_fault_line(line: str) -> FaultAction:
    parts = line.split()
    if len(parts) < 3:
        raise ScenarioError(f"fault line {line!r}: expected 'time module args...'")
    try:
        when = float(parts[0])
    except ValueError:
        raise ScenarioError(f"fault line {line!r}: bad time") from None
    module, args = parts[1], tuple(parts[2:])
    if module == "mission":
        if args not in (("suspend",), ("resume",)):
            raise ScenarioError(f"fault line {line!r}: mission takes suspend|resume")
    elif module == "hal":
        if len(args) != 3 or args[0] not in _HAL_FAULT_KINDS:
            raise ScenarioError(
                f"fault line {line!r}: hal takes '<kind> <joint> <0|1>' "
                f"with kind in {_HAL_FAULT_KINDS}")
    elif module == "storage":
        if len(args) != 2 or args[1] not in _STORAGE_FAULTS:
            raise ScenarioError(
                f"fault line {line!r}: storage takes '<device> <kind>' "
                f"with kind in {_STORAGE_FAULTS}")
    else:
        raise ScenarioError(f"fault line {line!r}: unknown module {module!r}")
    return FaultAction(when, module, args)


def _parse_check_line(line: str) -> tuple[str, int | None]:
    parts = line.split()
    name = parts[0]
    if name not in CHECKS:
        raise ScenarioError(
            f"unknown check {name!r} (have: {', '.join(sorted(CHECKS))})")
    takes_arg = CHECKS[name].takes_arg
    if takes_arg and len(parts) != 2:
        raise ScenarioError(f"check {name!r} needs one integer argument")
    if not takes_arg and len(parts) != 1:
        raise ScenarioError(f"check {name!r} takes no argument")
    if not takes_arg:
        return name, None
    try:
        return name, int(parts[1])
    except ValueError:
        raise ScenarioError(f"check {name!r}: bad argument {parts[1]!r}") from None


def _multiline(block, key: str):
    for line in block.get(key, "").splitlines():
        line = line.split(";")[0].strip()
        if line:
            yield line


def parse_scenario(text: str, *, default_name: str = "unnamed") -> Scenario:
    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(str(exc)) from None
    known = {"scenario", "channel", "storage", "transfer", "recorder",
             "faults", "expect"}
    for section in parser.sections():
        if section not in known:
            raise ScenarioError(f"unexpected section [{section}]")

    def block(name):
        return parser[name] if parser.has_section(name) else {}

    sc, ch, st = block("scenario"), block("channel"), block("storage")
    tr, rec = block("transfer"), block("recorder")

    try:
        cycles_raw = sc.get("cycles", "")
        bandwidth = float(ch.get("bandwidth", "0"))
        scn = Scenario(
            name=sc.get("name", default_name),
            scale=_parse_scale(sc.get("scale", "1/60")),
            duration=float(sc.get("duration", "120")),
            cycles=int(cycles_raw) if cycles_raw.strip() else None,
            seed=int(sc.get("seed", "0")),
            start_delay=float(sc.get("start_delay", "0.5")),
            loss=float(ch.get("loss", "0")),
            corrupt=float(ch.get("corrupt", "0")),
            reorder=int(ch.get("reorder", "0")),
            bandwidth_bits=bandwidth if bandwidth > 0 else None,
            channel_seed=int(ch.get("seed", "7")),
            fault_a=st.get("fault_a", FAULT_NONE),
            fault_b=st.get("fault_b", FAULT_NONE),
            reformat_works=st.get("reformat_works", "true").lower()
                in ("1", "true", "yes", "on"),
            rate_bits=float(tr.get("rate", "20e6")),
            resend=int(tr.get("resend", "3")),
            media_priority=int(tr.get("media_priority", "5")),
            recorder_profile=rec.get("profile", "flight"),
            rotate_bytes=int(rec.get("rotate_kib", "256")) * 1024,
            faults=tuple(sorted(
                (_parse_fault_line(line) for line in _multiline(block("faults"),
                                                                "schedule")),
                key=lambda a: a.time)),
            checks=tuple(_parse_check_line(line)
                         for line in _multiline(block("expect"), "checks")),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    if scn.fault_a not in _STORAGE_FAULTS or scn.fault_b not in _STORAGE_FAULTS:
        raise ScenarioError(f"storage fault must be one of {_STORAGE_FAULTS}")
    if scn.recorder_profile not in ("flight", "full"):
        raise ScenarioError("recorder profile must be flight or full")
    return scn


# -- builtin scenarios --------------------------------------------------------

BUILTIN_SCENARIOS = {
    "nominal": """\
; Clean mission: perfect radio, three demo cycles, everything lands.
[scenario]
name = nominal
cycles = 3
duration = 120

[expect]
checks =
    reboots 0
    cycles 3
    files_accounted
    transfer_complete
""",
    "emmc_a_dead": """\
; Card A refuses to mount; startup falls back to card B and the mission
; proceeds untouched. Seed chosen so boot picks the dead card first,
; otherwise there is nothing to fall back from.
[scenario]
name = emmc_a_dead
cycles = 1
duration = 60
seed = 1

[storage]
fault_a = mount_fail

[expect]
checks =
    reboots 0
    cycles 1
    fallback_event
""",
    "lossy_5pct": """\
; Radio drops one packet in twenty. Three cycles must still complete and
; every file must arrive complete or with its holes enumerated.
[scenario]
name = lossy_5pct
cycles = 3
duration = 120

[channel]
loss = 0.05

[expect]
checks =
    reboots 0
    cycles 3
    files_accounted
    jpeg_magic
""",
    "ground_test": """\
; No start datagram ever arrives: the robot must stay unpowered for a
; full scaled mission cycle while housekeeping keeps running.
[scenario]
name = ground_test
cycles =
duration = 30
start_delay = -1

[expect]
checks =
    reboots 0
    cycles 0
    motion_commands 0
""",
    "watchdog_hang": """\
; The mission process freezes mid-demo. The watchdog must reboot exactly
; once, the arm resumes from its persisted pose, and the ground keeps
; the files of both boot generations.
[scenario]
name = watchdog_hang
cycles = 1
duration = 80

[faults]
schedule =
    12.0 mission suspend

[expect]
checks =
    reboots 1
    cycles 1
    both_generations
    hdrm_once
""",
}


def load_scenario(source: str) -> Scenario:
    """Load from a file path, or by builtin name."""
    path = Path(source)
    if path.is_file():
        return parse_scenario(path.read_text(), default_name=path.stem)
    if source in BUILTIN_SCENARIOS:
        return parse_scenario(BUILTIN_SCENARIOS[source], default_name=source)
    raise ScenarioError(f"no scenario file or builtin named {source!r}")
