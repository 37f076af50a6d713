"""Loopback wire format for the bus.

Frame layout (everything little-endian):

    u32  length of the remainder (kind + name block + payload)
    u8   kind: 0 = topic message, 1 = service request,
               2 = service response, 3 = parameter operation
    u16  name length, followed by that many UTF-8 bytes
    ...  payload

Payload conventions per kind:

* topic message: f64 stamp, then the opaque message bytes.
* service request: the request bytes.
* service response: u8 status (0 = ok, 1 = error), then response bytes
  (for errors: UTF-8 "ErrorKind:detail").
* parameter op: u8 op (0 = get request, 1 = set request, 2 = ok response,
  3 = error response), then an encoded value (set request, get ok
  response) or UTF-8 "ErrorKind:detail" (error response).

Values are tagged scalars/arrays: u8 tag, then bool as u8, int as i64,
float as f64, float array as u32 count + f64 each, string as u32 length +
UTF-8 bytes.
"""

from __future__ import annotations

import struct

from .core import P_BOOL, P_FLOAT, P_FLOAT_ARRAY, P_INT, P_STRING, ParamValue, param_tag

KIND_TOPIC = 0
KIND_SERVICE_REQ = 1
KIND_SERVICE_RESP = 2
KIND_PARAM = 3

PARAM_GET = 0
PARAM_SET = 1
PARAM_OK = 2
PARAM_ERR = 3


class FrameError(Exception):
    pass


def encode_frame(kind: int, name: str, payload: bytes) -> bytes:
    name_b = name.encode("utf-8")
    body = struct.pack("<BH", kind, len(name_b)) + name_b + payload
    return struct.pack("<I", len(body)) + body


def decode_frame(body: bytes) -> tuple[int, str, bytes]:
    """Decode a frame body (the bytes after the length prefix)."""
    if len(body) < 3:
        raise FrameError("frame body too short")
    kind, name_len = struct.unpack_from("<BH", body, 0)
    if kind not in (KIND_TOPIC, KIND_SERVICE_REQ, KIND_SERVICE_RESP, KIND_PARAM):
        raise FrameError(f"unknown frame kind {kind}")
    end = 3 + name_len
    if len(body) < end:
        raise FrameError("truncated name block")
    name = body[3:end].decode("utf-8")
    return kind, name, body[end:]


def encode_value(value: ParamValue) -> bytes:
    tag = param_tag(value)
    if tag == P_BOOL:
        return struct.pack("<BB", tag, 1 if value else 0)
    if tag == P_INT:
        return struct.pack("<Bq", tag, value)
    if tag == P_FLOAT:
        return struct.pack("<Bd", tag, value)
    if tag == P_FLOAT_ARRAY:
        arr = [float(x) for x in value]
        return struct.pack("<BI", tag, len(arr)) + struct.pack(f"<{len(arr)}d", *arr)
    if tag == P_STRING:
        data = value.encode("utf-8")
        return struct.pack("<BI", tag, len(data)) + data
    raise FrameError(f"unsupported tag {tag}")


def decode_value(data: bytes) -> ParamValue:
    if not data:
        raise FrameError("empty value")
    tag = data[0]
    if tag == P_BOOL:
        return bool(data[1])
    if tag == P_INT:
        return struct.unpack_from("<q", data, 1)[0]
    if tag == P_FLOAT:
        return struct.unpack_from("<d", data, 1)[0]
    if tag == P_FLOAT_ARRAY:
        (count,) = struct.unpack_from("<I", data, 1)
        return list(struct.unpack_from(f"<{count}d", data, 5))
    if tag == P_STRING:
        (length,) = struct.unpack_from("<I", data, 1)
        return data[5:5 + length].decode("utf-8")
    raise FrameError(f"unknown value tag {tag}")


def read_frame(sock) -> tuple[int, str, bytes] | None:
    """Read one frame from a stream socket; None on orderly EOF."""
    header = _read_exact(sock, 4)
    if header is None:
        return None
    if len(header) < 4:
        raise FrameError("connection closed mid-frame")
    (length,) = struct.unpack("<I", header)
    body = _read_exact(sock, length)
    if body is None or len(body) < length:
        raise FrameError("connection closed mid-frame")
    return decode_frame(body)


def _read_exact(sock, n: int) -> bytes | None:
    """Up to n bytes; None on EOF at a frame boundary, short on mid-frame EOF."""
    if n == 0:
        return b""
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None if not buf else buf
        buf += chunk
    return buf
