"""Transmission-side orchestration.

The sender glues watcher, fragmenter, scheduler and rate limiter into a
single pump: poll for new file versions, fragment them under their
folder's transfer config, then emit packets of whole fragments while the
token bucket allows. It is clock-agnostic: the harness drives it with
simulated time, the CLI with wall time.
"""

from __future__ import annotations

from typing import Callable

from .fragmenting import fragment_file
from .ratelimit import TokenBucket
from .scheduler import SendScheduler, fragment_key
from .syncconfig import SyncSettings
from .watcher import FolderWatcher
from .wire import encode_fragment


class Sender:
    def __init__(self, root, settings: SyncSettings,
                 transmit: Callable[[bytes], None], *, generation: int = 0,
                 recycle_retired: bool = True,
                 watcher: FolderWatcher | None = None,
                 scheduler: SendScheduler | None = None,
                 bucket: TokenBucket | None = None):
        self.settings = settings
        self.transmit = transmit
        self.generation = generation
        self.watcher = watcher or FolderWatcher(
            root, rescan_period=settings.rescan_period)
        self.scheduler = scheduler or SendScheduler(
            recycle_retired=recycle_retired)
        # burst capacity must cover one full packet or a slow link deadlocks
        # on a held packet it can never afford
        self.bucket = bucket or TokenBucket(
            settings.rate_bits,
            capacity_bits=max(0.05 * settings.rate_bits,
                              settings.packet_budget * 8.0))
        self.files_queued = 0
        self.packets_sent = 0
        self.bytes_sent = 0
        self._held: bytes | None = None  # built but not yet affordable

    def poll_files(self, now: float) -> int:
        """Fragment and queue any new file versions; returns files added."""
        added = 0
        for event in self.watcher.poll(now):
            ff = fragment_file(event.relpath, event.content,
                               generation=self.generation,
                               fragment_size=self.settings.fragment_size)
            self.scheduler.add_file(ff, self.settings.config_for(event.relpath))
            added += 1
        self.files_queued += added
        return added

    def pump(self, now: float, max_packets: int | None = None) -> int:
        """Transmit as many packets as the limiter allows right now."""
        sent = 0
        while max_packets is None or sent < max_packets:
            packet = self._held or self._build_packet(now)
            if packet is None:
                break
            if not self.bucket.try_take(len(packet) * 8, now):
                self._held = packet  # paid for on a later pump
                break
            self._held = None
            self.transmit(packet)
            self.packets_sent += 1
            self.bytes_sent += len(packet)
            sent += 1
        return sent

    def _build_packet(self, now: float) -> bytes | None:
        parts = []
        room = self.settings.packet_budget
        packed: set = set()  # copies of one fragment must not share a packet
        while True:
            frag = self.scheduler.next_fragment(now, max_wire_size=room,
                                                exclude=packed)
            if frag is None:
                break
            packed.add(fragment_key(frag))
            encoded = encode_fragment(frag)
            parts.append(encoded)
            room -= len(encoded)
        if not parts:
            return None
        return b"".join(parts)

    def tick(self, now: float) -> int:
        self.poll_files(now)
        return self.pump(now)

    @property
    def idle(self) -> bool:
        """True when nothing is queued or held back."""
        return (self._held is None and self.scheduler.live_count == 0
                and self.scheduler.backlog_count == 0)
