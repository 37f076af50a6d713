"""Transmission-folder watcher.

Every poll stat-scans the tree (the portable stand-in for a kernel change
notification) and checksums anything whose size or mtime moved. On top of
that, a full re-checksum of every file runs each rescan_period to catch
modifications that left the stat record untouched. A given content
version of a path is enqueued exactly once: dedup is on (relpath, crc).

Files still being staged (.part suffix) are skipped; the writer renames
them into place atomically when sealed.
"""

from __future__ import annotations

import os
import zlib
from dataclasses import dataclass
from pathlib import Path


class RootMissing(Exception):
    pass


@dataclass(frozen=True)
class FileEvent:
    relpath: str
    path: str
    size: int
    crc: int
    content: bytes  # snapshot the checksum was computed over


class FolderWatcher:
    def __init__(self, root, *, rescan_period: float = 5.0,
                 ignore_suffixes: tuple[str, ...] = (".part",)):
        self.root = Path(root)
        if not self.root.is_dir():
            raise RootMissing(str(root))
        if rescan_period <= 0:
            raise ValueError("rescan_period must be positive")
        self.rescan_period = rescan_period
        self.ignore_suffixes = ignore_suffixes
        self._stats: dict[str, tuple[int, int]] = {}
        self._seen: set[tuple[str, int]] = set()
        self._last_rescan: float | None = None

    def poll(self, now: float) -> list[FileEvent]:
        if not self.root.is_dir():
            raise RootMissing(str(self.root))
        rescan = (self._last_rescan is None
                  or now - self._last_rescan >= self.rescan_period)
        events = []
        for path in self._walk():
            rel = path.relative_to(self.root).as_posix()
            try:
                st = path.stat()
            except OSError:
                continue  # vanished between listing and stat
            sig = (st.st_size, st.st_mtime_ns)
            if not rescan and self._stats.get(rel) == sig:
                continue
            try:
                content = path.read_bytes()
            except OSError:
                continue
            self._stats[rel] = sig
            crc = zlib.crc32(content) & 0xFFFFFFFF
            if (rel, crc) in self._seen:
                continue
            self._seen.add((rel, crc))
            events.append(FileEvent(rel, str(path), len(content), crc, content))
        if rescan:
            self._last_rescan = now
        return events

    def _walk(self):
        found = []
        for dirpath, _dirnames, filenames in os.walk(self.root):
            for name in filenames:
                if name.endswith(self.ignore_suffixes):
                    continue
                found.append(Path(dirpath) / name)
        found.sort()  # deterministic event order
        return found
