"""Synthetic media generation for the camera server.

Image content stands in for a real camera view: a seeded gradient plus
noise whose shape depends on the joint pose, so consecutive captures of a
moving arm visibly differ. The precise provenance (camera, capture time,
joint positions) is carried in a JPEG comment segment injected after
encoding, which survives on disk and lets tests recover exactly which
robot state produced a given file.

The bytes are a pure function of the inputs: same seed and parameters give
a bit-identical file, which is what makes downlink round-trips checkable.
"""

from __future__ import annotations

import hashlib
import io
import struct

import numpy as np
from PIL import Image

JPEG_SOI = b"\xff\xd8"
JPEG_EOI = b"\xff\xd9"
_COM_MARKER = b"\xff\xfe"
_SOS_MARKER = b"\xff\xda"

VIDEO_MAGIC = b"SDVD"
_VIDEO_HEADER = struct.Struct("<Id")  # frame count, fps
_FRAME_LEN = struct.Struct("<I")

# Field of view maps to the spatial frequency of the test pattern: a
# narrow lens "zooms in" so structure appears coarser per pixel.
FOV_SCALE = {"wide": 2.0, "linear": 1.0, "narrow": 0.5}

JPEG_QUALITY = 90


def content_seed(*parts) -> int:
    """Stable 64-bit seed derived from arbitrary stringable parts.

    hash() is salted per interpreter run, so use a real digest.
    """
    key = "|".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2s(key, digest_size=8).digest(), "little")


def render_pixels(width: int, height: int, *, joints=(), fov: str = "linear",
                  gray: bool = False, light: bool = False, seed: int = 0) -> np.ndarray:
    """Render one synthetic camera frame as a uint8 array.

    The pattern is a sum of two sine plaids whose phases follow the joint
    positions, plus mild sensor noise. `light` lifts overall brightness the
    way the real illuminator would.
    """
    if width <= 0 or height <= 0:
        raise ValueError("image dimensions must be positive")
    if fov not in FOV_SCALE:
        raise ValueError(f"unknown field of view {fov!r}")
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0.0:height, 0.0:width]
    xx /= max(width, 1)
    yy /= max(height, 1)
    freq = 2.0 * np.pi * FOV_SCALE[fov]
    pose = [float(q) for q in joints] + [0.0] * 4
    base = 0.35 * np.sin(freq * (3.0 * xx + pose[0]) + pose[2])
    base += 0.35 * np.sin(freq * (2.0 * yy + pose[1]) - pose[3])
    value = 0.5 + 0.5 * base + rng.normal(0.0, 0.02, size=(height, width))
    if light:
        value += 0.15
    plane = np.clip(value * 255.0, 0.0, 255.0).astype(np.uint8)
    if gray:
        return plane
    # cheap chromatic variation: shift the plaid per channel
    channels = [plane]
    for shift in (17, 41):
        channels.append(np.roll(plane, shift, axis=1))
    return np.stack(channels, axis=-1)


def encode_jpeg(pixels: np.ndarray) -> bytes:
    mode = "L" if pixels.ndim == 2 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(pixels, mode).save(buf, format="JPEG", quality=JPEG_QUALITY)
    return buf.getvalue()


def stamp_comment(jpeg: bytes, text: str) -> bytes:
    """Insert a COM segment right after the start-of-image marker."""
    if jpeg[:2] != JPEG_SOI:
        raise ValueError("not a JPEG stream")
    payload = text.encode()
    if len(payload) > 0xFFFD:
        raise ValueError("comment too long for a JPEG segment")
    segment = _COM_MARKER + struct.pack(">H", len(payload) + 2) + payload
    return jpeg[:2] + segment + jpeg[2:]


def read_comment(jpeg: bytes) -> str | None:
    """Return the first COM segment's text, or None if there is none."""
    if jpeg[:2] != JPEG_SOI:
        raise ValueError("not a JPEG stream")
    pos = 2
    while pos + 4 <= len(jpeg):
        if jpeg[pos] != 0xFF:
            return None
        marker = jpeg[pos:pos + 2]
        if marker == _SOS_MARKER or marker == JPEG_EOI:
            return None  # entropy-coded data follows, no more plain segments
        (length,) = struct.unpack(">H", jpeg[pos + 2:pos + 4])
        if marker == _COM_MARKER:
            return jpeg[pos + 4:pos + 2 + length].decode(errors="replace")
        pos += 2 + length
    return None


def is_valid_jpeg(data: bytes) -> bool:
    return len(data) >= 4 and data[:2] == JPEG_SOI and data[-2:] == JPEG_EOI


def make_image(*, camera: str, stamp: float, joints, width: int, height: int,
               fov: str = "linear", gray: bool = False, light: bool = False,
               seed: int = 0, extra: str = "") -> bytes:
    """Produce the final JPEG bytes for one capture."""
    pose = ",".join(f"{float(q):.6f}" for q in joints)
    meta = f"camera={camera} t={stamp:.6f} q=[{pose}]"
    if extra:
        meta += " " + extra
    pixels = render_pixels(width, height, joints=joints, fov=fov, gray=gray,
                           light=light, seed=seed)
    return stamp_comment(encode_jpeg(pixels), meta)


def pack_video(frames: list[bytes], fps: float) -> bytes:
    """Concatenate JPEG frames into the simple length-prefixed container."""
    if fps <= 0:
        raise ValueError("fps must be positive")
    parts = [VIDEO_MAGIC, _VIDEO_HEADER.pack(len(frames), fps)]
    for frame in frames:
        parts.append(_FRAME_LEN.pack(len(frame)))
        parts.append(frame)
    return b"".join(parts)


def unpack_video(data: bytes) -> tuple[float, list[bytes]]:
    if data[:4] != VIDEO_MAGIC:
        raise ValueError("not a video container")
    if len(data) < 4 + _VIDEO_HEADER.size:
        raise ValueError("truncated video header")
    count, fps = _VIDEO_HEADER.unpack_from(data, 4)
    pos = 4 + _VIDEO_HEADER.size
    frames = []
    for _ in range(count):
        if pos + _FRAME_LEN.size > len(data):
            raise ValueError("truncated video frame table")
        (length,) = _FRAME_LEN.unpack_from(data, pos)
        pos += _FRAME_LEN.size
        if pos + length > len(data):
            raise ValueError("truncated video frame")
        frames.append(data[pos:pos + length])
        pos += length
    return fps, frames


def make_video(*, camera: str, stamp: float, joints, width: int, height: int,
               duration: float, fps: float, fov: str = "linear",
               gray: bool = False, light: bool = False, seed: int = 0) -> bytes:
    """Render duration*fps frames; each frame reuses the still-image path."""
    n_frames = int(round(duration * fps))
    if n_frames <= 0:
        raise ValueError("video must contain at least one frame")
    frames = []
    for i in range(n_frames):
        frames.append(make_image(
            camera=camera, stamp=stamp + i / fps, joints=joints,
            width=width, height=height, fov=fov, gray=gray, light=light,
            seed=content_seed(seed, i), extra=f"frame={i}"))
    return pack_video(frames, fps)
