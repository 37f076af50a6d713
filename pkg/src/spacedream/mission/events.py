"""Mission audit trail."""

from __future__ import annotations

from dataclasses import dataclass

EVENT_KINDS = (
    "boot",
    "start_cmd",
    "hdrm_release",
    "health_check",
    "demo_start",
    "demo_end",
    "sleep",
    "fault",
    "reboot",
)


@dataclass(frozen=True)
class MissionEvent:
    stamp: float
    kind: str
    detail: str = ""

    def line(self) -> str:
        return f"{self.stamp:.3f} {self.kind} {self.detail}".rstrip()


class EventLog:
    """Append-only list with strictly increasing stamps.

    Several events can legitimately originate in the same 10 ms tick;
    equal stamps are nudged forward by 1 ns so ordering stays encoded in
    the stamp itself. Every boot's slice must open with a "boot" event.
    """

    _EPS = 1e-9

    def __init__(self):
        self.entries: list[MissionEvent] = []
        self._expect_boot = True

    def append(self, stamp: float, kind: str, detail: str = "") -> MissionEvent:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        if self._expect_boot and kind != "boot":
            raise ValueError(f"boot must open the log, got {kind!r}")
        self._expect_boot = kind == "reboot"
        if self.entries and stamp <= self.entries[-1].stamp:
            stamp = self.entries[-1].stamp + self._EPS
        event = MissionEvent(stamp, kind, detail)
        self.entries.append(event)
        return event

    def count(self, kind: str) -> int:
        return sum(e.kind == kind for e in self.entries)

    def of_kind(self, kind: str) -> list[MissionEvent]:
        return [e for e in self.entries if e.kind == kind]

    def last(self, kind: str) -> MissionEvent | None:
        for event in reversed(self.entries):
            if event.kind == kind:
                return event
        return None

    def lines(self) -> list[str]:
        return [e.line() for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)
