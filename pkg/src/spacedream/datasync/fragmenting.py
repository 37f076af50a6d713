"""Splitting files into wire fragments.

Every file yields ceil(size / fragment_size) data fragments plus one
metadata fragment carrying the name, size, fragment layout and file-level
CRC32. For JPEGs the first data fragment is duplicated as a header_copy
fragment: losing the first kilobyte otherwise costs the magic bytes and
renders the whole image unopenable, which is the worst possible outcome
on a link without retransmission requests.

An empty file is legal and produces a metadata-only transfer.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

from .wire import (
    KIND_DATA,
    KIND_HEADER_COPY,
    KIND_METADATA,
    Fragment,
    file_identity,
)

MIN_FRAGMENT_SIZE = 64
DEFAULT_FRAGMENT_SIZE = 1024

_META_FIXED = struct.Struct("<QIII")  # size, total_frags, file_crc, fragment_size
_NAME_LEN = struct.Struct("<H")

JPEG_SUFFIX = ".jpg"


@dataclass(frozen=True)
class FileMeta:
    name: str
    size: int
    total_frags: int
    file_crc: int
    fragment_size: int


@dataclass(frozen=True)
class FileFragments:
    file_id: int
    generation: int
    file_crc: int
    relpath: str
    data: tuple[Fragment, ...]
    metadata: Fragment
    header_copies: tuple[Fragment, ...]

    def all_fragments(self) -> list[Fragment]:
        return [self.metadata, *self.header_copies, *self.data]


def encode_metadata(meta: FileMeta) -> bytes:
    name = meta.name.encode()
    return (_NAME_LEN.pack(len(name)) + name
            + _META_FIXED.pack(meta.size, meta.total_frags, meta.file_crc,
                               meta.fragment_size))


def decode_metadata(payload: bytes) -> FileMeta:
    if len(payload) < _NAME_LEN.size:
        raise ValueError("metadata too short")
    (name_len,) = _NAME_LEN.unpack_from(payload, 0)
    fixed_at = _NAME_LEN.size + name_len
    if len(payload) != fixed_at + _META_FIXED.size:
        raise ValueError("metadata length mismatch")
    name = payload[_NAME_LEN.size:fixed_at].decode(errors="replace")
    size, total, crc, frag_size = _META_FIXED.unpack_from(payload, fixed_at)
    if total == 0:
        if size != 0:
            raise ValueError("empty layout with nonzero size")
    else:
        if frag_size <= 0:
            raise ValueError("metadata with fragments but no fragment size")
        if not (total - 1) * frag_size < size <= total * frag_size:
            raise ValueError("metadata size inconsistent with fragment layout")
    return FileMeta(name, size, total, crc, frag_size)


def fragment_file(relpath: str, content: bytes, *, generation: int = 0,
                  fragment_size: int = DEFAULT_FRAGMENT_SIZE) -> FileFragments:
    if fragment_size < MIN_FRAGMENT_SIZE:
        raise ValueError(f"fragment_size must be >= {MIN_FRAGMENT_SIZE}")
    crc = zlib.crc32(content) & 0xFFFFFFFF
    file_id = file_identity(relpath, crc)
    total = -(-len(content) // fragment_size)
    data = tuple(
        Fragment(file_id=file_id, generation=generation, frag_index=i,
                 total_frags=total, kind=KIND_DATA,
                 payload=content[i * fragment_size:(i + 1) * fragment_size])
        for i in range(total))
    meta_payload = encode_metadata(FileMeta(relpath, len(content), total, crc,
                                            fragment_size))
    metadata = Fragment(file_id=file_id, generation=generation, frag_index=0,
                        total_frags=total, kind=KIND_METADATA,
                        payload=meta_payload)
    copies = ()
    if relpath.lower().endswith(JPEG_SUFFIX) and data:
        copies = (Fragment(file_id=file_id, generation=generation, frag_index=0,
                           total_frags=total, kind=KIND_HEADER_COPY,
                           payload=data[0].payload),)
    return FileFragments(file_id=file_id, generation=generation, file_crc=crc,
                         relpath=relpath, data=data, metadata=metadata,
                         header_copies=copies)
