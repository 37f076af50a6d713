"""Fragment wire format.

Every fragment is self-contained and self-checking so that a receiver can
make sense of any prefix of any packet without context:

    "SDFR" | version u8 | kind u8 | file_id u64 | generation u32 |
    frag_index u32 | total_frags u32 | payload_len u16 | payload |
    crc32 u32   (little endian, CRC over all preceding fragment bytes)

A packet is simply one or more fragments back to back. Anything that does
not parse or does not checksum is dropped and counted, never raised: the
link is one-way and hostile input must not take the receiver down.

File identity is a 64-bit FNV-1a over the relative path joined with the
file-level CRC32, so changed content gets a fresh identity and a reboot
cannot silently overwrite old data with new.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

MAGIC = b"SDFR"
VERSION = 1

KIND_DATA = 0
KIND_METADATA = 1
KIND_HEADER_COPY = 2
KINDS = (KIND_DATA, KIND_METADATA, KIND_HEADER_COPY)

_HEADER = struct.Struct("<4sBBQIIIH")
_CRC = struct.Struct("<I")
HEADER_BYTES = _HEADER.size
OVERHEAD_BYTES = HEADER_BYTES + _CRC.size  # per-fragment framing cost

MAX_PAYLOAD = 0xFFFF

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    value = _FNV_OFFSET
    for byte in data:
        value ^= byte
        value = (value * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return value


def file_identity(relpath: str, content_crc: int) -> int:
    return fnv1a64(relpath.encode() + struct.pack("<I", content_crc & 0xFFFFFFFF))


@dataclass(frozen=True)
class Fragment:
    file_id: int
    generation: int
    frag_index: int
    total_frags: int
    kind: int
    payload: bytes

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown fragment kind {self.kind}")
        if len(self.payload) > MAX_PAYLOAD:
            raise ValueError("payload exceeds wire limit")
        if self.kind == KIND_DATA and self.frag_index >= self.total_frags:
            raise ValueError("data fragment index out of range")

    @property
    def wire_size(self) -> int:
        return OVERHEAD_BYTES + len(self.payload)


def encode_fragment(frag: Fragment) -> bytes:
    header = _HEADER.pack(MAGIC, VERSION, frag.kind, frag.file_id,
                          frag.generation, frag.frag_index, frag.total_frags,
                          len(frag.payload))
    body = header + frag.payload
    return body + _CRC.pack(zlib.crc32(body) & 0xFFFFFFFF)


def encode_packet(fragments) -> bytes:
    return b"".join(encode_fragment(f) for f in fragments)


def decode_packet(data: bytes) -> tuple[list[Fragment], int]:
    """Parse back-to-back fragments; returns (fragments, rejected_count).

    Parsing stops at the first framing error because nothing after a bad
    length field can be trusted.
    """
    fragments: list[Fragment] = []
    rejected = 0
    pos = 0
    while pos < len(data):
        if pos + HEADER_BYTES > len(data):
            return fragments, rejected + 1
        magic, version, kind, file_id, generation, index, total, length = \
            _HEADER.unpack_from(data, pos)
        if magic != MAGIC or version != VERSION or kind not in KINDS:
            return fragments, rejected + 1
        end = pos + HEADER_BYTES + length
        if end + _CRC.size > len(data):
            return fragments, rejected + 1
        (crc,) = _CRC.unpack_from(data, end)
        if crc != (zlib.crc32(data[pos:end]) & 0xFFFFFFFF):
            # a bad checksum with intact framing: skip just this fragment
            rejected += 1
            pos = end + _CRC.size
            continue
        if kind == KIND_DATA and index >= total:
            rejected += 1
            pos = end + _CRC.size
            continue
        fragments.append(Fragment(file_id, generation, index, total, kind,
                                  data[pos + HEADER_BYTES:end]))
        pos = end + _CRC.size
    return fragments, rejected
