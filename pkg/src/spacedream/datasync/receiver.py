"""Ground-side reassembly.

The receiver accepts any byte stream without ever raising: checksummed
fragments are stored idempotently, everything else is counted and
dropped. Files are tracked per (file_id, boot generation) so a reboot on
the sending side can never overwrite data already received from before
the reboot.

Reassembly zero-fills missing fragments and reports their indices; a
received header_copy stands in for a lost first data fragment, which for
JPEGs preserves the magic bytes that make the file openable at all.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from pathlib import Path

from .fragmenting import FileMeta, decode_metadata
from .wire import KIND_DATA, KIND_HEADER_COPY, KIND_METADATA, decode_packet


class UnknownLength(Exception):
    """Reassembly attempted before any metadata fragment arrived."""


@dataclass
class ReceiverStats:
    packets: int = 0
    fragments: int = 0
    rejected: int = 0      # framing or checksum failures
    duplicates: int = 0
    bad_metadata: int = 0


@dataclass
class FileManifest:
    file_id: int
    generation: int
    meta: FileMeta | None = None
    data: dict[int, bytes] = field(default_factory=dict)
    header_copy: bytes | None = None
    first_seen: int = 0

    @property
    def name(self) -> str | None:
        return self.meta.name if self.meta else None

    @property
    def size(self) -> int | None:
        return self.meta.size if self.meta else None

    def hole_indices(self) -> list[int]:
        if self.meta is None:
            raise UnknownLength(f"file {self.file_id:#x}")
        holes = []
        for i in range(self.meta.total_frags):
            if i in self.data:
                continue
            if i == 0 and self.header_copy is not None:
                continue  # substitute fills the gap
            holes.append(i)
        return holes

    @property
    def holes(self) -> int:
        return len(self.hole_indices())

    @property
    def complete(self) -> bool:
        return self.meta is not None and self.holes == 0


class Receiver:
    def __init__(self):
        self.manifests: dict[tuple[int, int], FileManifest] = {}
        self.stats = ReceiverStats()
        self._arrival = 0

    # -- ingestion -----------------------------------------------------------

    def ingest_packet(self, packet: bytes) -> None:
        self.stats.packets += 1
        fragments, rejected = decode_packet(packet)
        self.stats.rejected += rejected
        for frag in fragments:
            self._ingest_fragment(frag)

    def _ingest_fragment(self, frag) -> None:
        self.stats.fragments += 1
        key = (frag.file_id, frag.generation)
        manifest = self.manifests.get(key)
        if manifest is None:
            self._arrival += 1
            manifest = FileManifest(frag.file_id, frag.generation,
                                    first_seen=self._arrival)
            self.manifests[key] = manifest
        if frag.kind == KIND_METADATA:
            if manifest.meta is not None:
                self.stats.duplicates += 1
                return
            try:
                manifest.meta = decode_metadata(frag.payload)
            except ValueError:
                self.stats.bad_metadata += 1
        elif frag.kind == KIND_HEADER_COPY:
            if manifest.header_copy is not None:
                self.stats.duplicates += 1
                return
            manifest.header_copy = frag.payload
        elif frag.kind == KIND_DATA:
            if frag.frag_index in manifest.data:
                self.stats.duplicates += 1
                return
            manifest.data[frag.frag_index] = frag.payload

    # -- reassembly ------------------------------------------------------------

    def reassemble(self, file_id: int, generation: int) -> tuple[bytes, list[int]]:
        manifest = self.manifests.get((file_id, generation))
        if manifest is None or manifest.meta is None:
            raise UnknownLength(f"file {file_id:#x} gen {generation}")
        meta = manifest.meta
        buf = bytearray(meta.size)
        holes = []
        for i in range(meta.total_frags):
            payload = manifest.data.get(i)
            if payload is None and i == 0:
                payload = manifest.header_copy
            if payload is None:
                holes.append(i)
                continue
            offset = i * meta.fragment_size
            end = min(offset + len(payload), meta.size)
            buf[offset:end] = payload[:end - offset]
        return bytes(buf), holes

    def crc_ok(self, file_id: int, generation: int) -> bool:
        manifest = self.manifests.get((file_id, generation))
        if manifest is None or manifest.meta is None:
            return False
        content, holes = self.reassemble(file_id, generation)
        return not holes and (zlib.crc32(content) & 0xFFFFFFFF) == manifest.meta.file_crc

    # -- output ------------------------------------------------------------------

    def write_out(self, root, include_incomplete: bool = True) -> list[Path]:
        """Write rx/<generation>/<name> (+ .holes report when lossy)."""
        root = Path(root)
        written = []
        order = sorted(self.manifests.values(), key=lambda m: m.first_seen)
        for manifest in order:
            if manifest.meta is None:
                continue  # nameless: nothing useful to write
            if not include_incomplete and not manifest.complete:
                continue
            content, holes = self.reassemble(manifest.file_id, manifest.generation)
            path = root / str(manifest.generation) / manifest.meta.name
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(content)
            written.append(path)
            report = path.with_name(path.name + ".holes")
            if holes:
                lines = [f"file_id={manifest.file_id:#018x} "
                         f"size={manifest.meta.size} "
                         f"total={manifest.meta.total_frags} holes={len(holes)}"]
                lines += [str(i) for i in holes]
                report.write_text("\n".join(lines) + "\n")
            elif report.exists():
                report.unlink()  # a later pass may have filled the holes
        return written
