"""Records bus topics into rotating log files at configured rates.

Downsampling is last-value: at each due tick the newest message published
since the last written record goes to disk, older ones are dropped. That
is what telemetry consumers want and it makes output byte rate scale
linearly with the configured record rate.

Active files carry a .part suffix and are renamed on rotation, so the
transmission folder only ever shows sealed, checksummed logs plus at most
one in-progress file per topic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from ..bus.core import Bus, Subscription, TopicSpec, UnknownTopic
from ..clock import Clock
from .logfmt import LogWriter

EVENT_TOPIC = "recorder/event"

# Default mission profile: everything on the bus at full rate, including
# the camera download stream. Matches the flight unit's measured volume
# of roughly 1.3 Mbit/s when the camera link is busy.
FULL_PROFILE = {
    "hal/telemetry": 100.0,
    "hal/command": 100.0,
    "controller/state": 100.0,
    "controller/debug": 100.0,
    "camera/frames": 100.0,
}

# Reduced profile sized for a real downlink budget: the camera stream is
# dropped entirely (media files reach the ground on their own) and the
# bulky debug topic is sampled sparsely.
FLIGHT_PROFILE = {
    "hal/telemetry": 50.0,
    "hal/command": 25.0,
    "controller/state": 100.0,
    "controller/debug": 10.0,
}

DEFAULT_ROTATE_BYTES = 1 << 20


@dataclass
class _Stream:
    topic: str
    period: float
    sub: Subscription | None = None
    pending: tuple[bytes, float] | None = None
    next_due: float | None = None
    seq: int = 0
    writer: LogWriter | None = None
    index: int = 0
    records: int = 0


class Recorder:
    """Poll-driven recorder; tick() must be called at least at the
    fastest configured record rate."""

    def __init__(self, bus: Bus, clock: Clock, out_dir, rates: dict[str, float], *,
                 generation: int = 0, rotate_bytes: int = DEFAULT_ROTATE_BYTES,
                 quota_bytes: int | None = None):
        for topic, rate in rates.items():
            if rate <= 0:
                raise ValueError(f"record rate for {topic!r} must be positive")
        if rotate_bytes <= 0:
            raise ValueError("rotation size must be positive")
        self.bus = bus
        self.clock = clock
        self.out_dir = Path(out_dir)
        self.generation = generation
        self.rotate_bytes = rotate_bytes
        self.quota_bytes = quota_bytes
        self.bytes_written = 0
        self.fault: str | None = None
        self._streams = [_Stream(topic=t, period=1.0 / r) for t, r in rates.items()]
        bus.register_topic(TopicSpec(EVENT_TOPIC, "text/1"))
        for stream in self._streams:
            self._ensure_subscribed(stream)

    # -- main loop ---------------------------------------------------------

    def tick(self) -> None:
        if self.fault is not None:
            return
        now = self.clock.now()
        for stream in self._streams:
            self._intake(stream)
            if stream.pending is None:
                continue
            if stream.next_due is None:
                stream.next_due = now
            if now + 1e-9 < stream.next_due:
                continue
            payload, stamp = stream.pending
            stream.pending = None
            self._write(stream, stamp, payload, now)
            if self.fault is not None:
                return
            stream.next_due += stream.period
            if stream.next_due < now:
                stream.next_due = now + stream.period  # no catch-up bursts

    def _ensure_subscribed(self, stream: _Stream) -> bool:
        if stream.sub is None:
            try:
                stream.sub = self.bus.subscribe(stream.topic)
            except UnknownTopic:
                return False  # topic not up yet; retry next tick
        return True

    def _intake(self, stream: _Stream) -> None:
        if not self._ensure_subscribed(stream):
            return
        drained = stream.sub.drain()
        if drained:
            stream.pending = drained[-1]

    def _write(self, stream: _Stream, stamp: float, payload: bytes, now: float) -> None:
        if stream.writer is None:
            stream.writer = self._open(stream)
            self.bytes_written += stream.writer.size
        cost = 16 + len(payload)  # record framing overhead
        if self.quota_bytes is not None and self.bytes_written + cost > self.quota_bytes:
            self._storage_full(now)
            return
        stream.writer.append(stream.seq, stamp, payload)
        stream.seq += 1
        stream.records += 1
        self.bytes_written += cost
        if stream.writer.size >= self.rotate_bytes:
            self._seal(stream)

    def _open(self, stream: _Stream) -> LogWriter:
        name = stream.topic.replace("/", "-")
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / f"{name}_{stream.index}.sdlg.part"
        return LogWriter(path, stream.topic, self.generation)

    def _seal(self, stream: _Stream) -> None:
        writer = stream.writer
        if writer is None:
            return
        writer.close()
        self.bytes_written += 8  # footer
        final = writer.path.with_suffix("")  # drop ".part"
        writer.path.rename(final)
        stream.writer = None
        stream.index += 1

    def _storage_full(self, now: float) -> None:
        self.fault = "storage_full"
        self.close()
        self.bus.publish(EVENT_TOPIC, b"storage_full", now)

    # -- shutdown / reporting ------------------------------------------------

    def close(self) -> None:
        """Seal every open file; safe to call more than once."""
        for stream in self._streams:
            self._seal(stream)

    @property
    def record_count(self) -> int:
        return sum(s.records for s in self._streams)

    def records_for(self, topic: str) -> int:
        for stream in self._streams:
            if stream.topic == topic:
                return stream.records
        raise KeyError(topic)
