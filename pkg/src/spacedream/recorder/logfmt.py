"""Append-only topic log files.

Layout: a fixed header naming the topic and boot generation, then
length-prefixed records, then a footer carrying a CRC32 over everything
before it. A file without the footer is "unsealed": either still being
written or cut off by a crash. Readers recover every intact record from
an unsealed or truncated file and lose at most the final, partial one.

    header: "SDLG" | version u8 | generation u32 | topic_len u16 | topic
    record: seq u32 | stamp f64 | payload_len u32 | payload
    footer: 0xFFFFFFFF u32 | crc32 u32

The footer is recognized by the sequence-number sentinel, which a writer
never emits as a real record.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

MAGIC = b"SDLG"
VERSION = 1

_HEADER = struct.Struct("<4sBIH")
_RECORD = struct.Struct("<IdI")
_FOOTER = struct.Struct("<II")
FOOTER_SENTINEL = 0xFFFFFFFF


class LogFormatError(Exception):
    pass


@dataclass(frozen=True)
class LogRecord:
    seq: int
    stamp: float
    payload: bytes


@dataclass
class LogFile:
    path: str
    topic: str
    generation: int
    records: list[LogRecord] = field(default_factory=list)
    sealed: bool = False       # footer present
    crc_ok: bool = False       # footer checksum matches content
    truncated: bool = False    # trailing partial record was dropped


class LogWriter:
    """Single-topic writer; call close() to seal the file with its footer."""

    def __init__(self, path, topic: str, generation: int):
        name = topic.encode()
        if len(name) > 0xFFFF:
            raise ValueError("topic name too long")
        self.path = Path(path)
        self.topic = topic
        self.generation = generation
        self._fh = open(self.path, "wb")
        header = _HEADER.pack(MAGIC, VERSION, generation, len(name)) + name
        self._fh.write(header)
        self._crc = zlib.crc32(header)
        self.size = len(header)
        self.record_count = 0
        self._last_seq = -1
        self._last_stamp = float("-inf")
        self.closed = False

    def append(self, seq: int, stamp: float, payload: bytes) -> None:
        if self.closed:
            raise LogFormatError("writer is closed")
        if seq >= FOOTER_SENTINEL:
            raise ValueError("sequence number collides with footer sentinel")
        if seq <= self._last_seq:
            raise ValueError(f"sequence must increase: {seq} after {self._last_seq}")
        if stamp < self._last_stamp:
            raise ValueError("stamps must be non-decreasing")
        chunk = _RECORD.pack(seq, stamp, len(payload)) + payload
        self._fh.write(chunk)
        self._crc = zlib.crc32(chunk, self._crc)
        self.size += len(chunk)
        self.record_count += 1
        self._last_seq = seq
        self._last_stamp = stamp

    def close(self) -> None:
        if self.closed:
            return
        self._fh.write(_FOOTER.pack(FOOTER_SENTINEL, self._crc & 0xFFFFFFFF))
        self.size += _FOOTER.size
        self._fh.close()
        self.closed = True


def read_log(path) -> LogFile:
    """Parse a log file, tolerating a missing footer and a truncated tail."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise LogFormatError("file shorter than header")
    magic, version, generation, topic_len = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise LogFormatError("bad magic")
    if version != VERSION:
        raise LogFormatError(f"unsupported version {version}")
    pos = _HEADER.size
    if pos + topic_len > len(data):
        raise LogFormatError("truncated header")
    topic = data[pos:pos + topic_len].decode()
    pos += topic_len

    out = LogFile(path=str(path), topic=topic, generation=generation)
    while True:
        if pos + 4 > len(data):
            out.truncated = pos != len(data)
            break
        (seq,) = struct.unpack_from("<I", data, pos)
        if seq == FOOTER_SENTINEL:
            if pos + _FOOTER.size > len(data):
                out.truncated = True
                break
            (_, crc) = _FOOTER.unpack_from(data, pos)
            out.sealed = True
            out.crc_ok = crc == (zlib.crc32(data[:pos]) & 0xFFFFFFFF)
            break
        if pos + _RECORD.size > len(data):
            out.truncated = True
            break
        seq, stamp, length = _RECORD.unpack_from(data, pos)
        if pos + _RECORD.size + length > len(data):
            out.truncated = True
            break
        payload = data[pos + _RECORD.size:pos + _RECORD.size + length]
        out.records.append(LogRecord(seq, stamp, payload))
        pos += _RECORD.size + length
    return out
