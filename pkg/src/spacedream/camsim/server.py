"""Camera server: capture actions over two simulated cameras.

Both cameras hang off a single USB switch, so exactly one is active at a
time and the pipeline runs one action at a time. Submitting a capture
returns an action id immediately; the action then walks through the
capture, stored, downloaded and post-processed phases on the shared clock
before the media file appears on disk. Polling is the only way to learn
the outcome, same as on the real system where a capture can eat a whole
parabola.

Switching cameras mid-run corrupted the downstream link on the flight
unit, so after the first selection the switch is locked unless the server
was built with allow_switch=True.
"""

from __future__ import annotations

import random
import struct
from collections import deque
from dataclasses import dataclass
from pathlib import Path

from ..bus.core import Bus, ServiceSpec, Subscription, TopicSpec, UnknownTopic
from ..clock import Clock
from ..halsim.records import unpack_telemetry
from . import imaging

BASE = "base"
END_EFFECTOR = "end_effector"
CAMERAS = (BASE, END_EFFECTOR)

COLOR_SPACES = ("rgb8", "gray8")
KIND_IMAGE = "image"
KIND_VIDEO = "video"

# pipeline phases in order; "queued" precedes them, "done" follows
PHASES = ("capture", "stored", "downloaded", "post_processed")
_PHASE_ENDS = (0.25, 0.5, 0.75, 1.0)

TELEMETRY_TOPIC = "hal/telemetry"

# Media bytes crossing the bus while an action is in its download phase.
# One chunk per tick models the steady drain of the camera link.
FRAMES_TOPIC = "camera/frames"
CHUNK_BYTES = 1200
_CHUNK_HEADER = struct.Struct("<III")  # action id, chunk index, total chunks

DEFAULT_LATENCY = (3.0, 22.0)
DEFAULT_QUOTA = 64 * 1024 * 1024
DEFAULT_FPS = 10.0
DEFAULT_EE_WEIGHT = 0.7


class CamError(Exception):
    pass


class CameraInactive(CamError):
    pass


class SwitchLocked(CamError):
    pass


class StorageFull(CamError):
    pass


class UnknownMedia(CamError):
    pass


class UnknownAction(CamError):
    pass


@dataclass(frozen=True)
class CaptureParams:
    width: int
    height: int
    field_of_view: str = "linear"
    color_space: str = "rgb8"
    use_light: bool = False
    duration: float = 0.0  # seconds of footage, videos only

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("resolution must be positive")
        if self.field_of_view not in imaging.FOV_SCALE:
            raise ValueError(f"unknown field of view {self.field_of_view!r}")
        if self.color_space not in COLOR_SPACES:
            raise ValueError(f"unknown color space {self.color_space!r}")
        if self.duration < 0:
            raise ValueError("duration must be >= 0")

    @property
    def gray(self) -> bool:
        return self.color_space == "gray8"


@dataclass(frozen=True)
class MediaRecord:
    media_id: int
    camera: str
    kind: str
    path: str
    size: int
    created: float


@dataclass
class _Action:
    action_id: int
    kind: str
    camera: str
    params: CaptureParams
    joints: tuple
    submitted: float
    start: float
    finish: float
    media_id: int | None = None
    data: bytes | None = None
    sent_chunks: int = 0
    record: MediaRecord | None = None

    def phase(self, now: float) -> str:
        if self.record is not None:
            return "done"
        if now < self.start:
            return "queued"
        span = self.finish - self.start
        progress = (now - self.start) / span if span > 0 else 1.0
        for name, end in zip(PHASES, _PHASE_ENDS):
            if progress < end:
                return name
        return PHASES[-1]


def pick_camera(rng: random.Random, ee_weight: float = DEFAULT_EE_WEIGHT) -> str:
    """Weighted random camera choice; the end-effector view is favored."""
    return END_EFFECTOR if rng.random() < ee_weight else BASE


class CameraServer:
    """Tick-driven camera backend, optionally exposed as bus services."""

    def __init__(self, clock: Clock, media_root="media", *, bus: Bus | None = None,
                 latency_range=DEFAULT_LATENCY, switch_time: float = 1.0,
                 quota_bytes: int = DEFAULT_QUOTA, allow_switch: bool = False,
                 fps: float = DEFAULT_FPS, seed: int = 0):
        lo, hi = latency_range
        if not 0 < lo <= hi:
            raise ValueError("latency range must be positive and ordered")
        self.clock = clock
        self.media_root = Path(media_root)
        self.latency_range = (float(lo), float(hi))
        self.switch_time = float(switch_time)
        self.quota_bytes = int(quota_bytes)
        self.allow_switch = allow_switch
        self.fps = float(fps)
        self.seed = seed
        self._rng = random.Random(seed)
        self._active: str | None = None
        self._busy_until = 0.0
        self._next_action = 1
        self._next_media = 1
        self._actions: dict[int, _Action] = {}
        self._pending: deque[_Action] = deque()
        self._records: dict[int, MediaRecord] = {}
        self._used_bytes = 0
        self._bus = bus
        self._telemetry: Subscription | None = None
        self._joints: tuple = (0.0, 0.0, 0.0, 0.0)
        self._streaming: deque[_Action] = deque()
        if bus is not None:
            bus.register_topic(TopicSpec(FRAMES_TOPIC, "camera/frame-chunk/1", 100.0))
            self._register_services(bus)
            self._poll_telemetry()  # subscribe now so no pose updates are lost

    # -- camera switch ---------------------------------------------------

    @property
    def active_camera(self) -> str | None:
        return self._active

    def select_camera(self, camera: str) -> None:
        if camera not in CAMERAS:
            raise ValueError(f"unknown camera {camera!r}")
        if camera == self._active:
            return  # idempotent, no switch cycle burned
        if self._active is not None and not self.allow_switch:
            raise SwitchLocked("camera switch is locked for the rest of the run")
        now = self.clock.now()
        self._active = camera
        self._busy_until = max(self._busy_until, now) + self.switch_time

    # -- capture actions -------------------------------------------------

    def take_image(self, camera: str, params: CaptureParams) -> int:
        return self._submit(KIND_IMAGE, camera, params)

    def record_video(self, camera: str, params: CaptureParams) -> int:
        if params.duration <= 0:
            raise ValueError("video capture needs duration > 0")
        return self._submit(KIND_VIDEO, camera, params)

    def _submit(self, kind: str, camera: str, params: CaptureParams) -> int:
        if camera not in CAMERAS:
            raise ValueError(f"unknown camera {camera!r}")
        if camera != self._active:
            raise CameraInactive(f"{camera} is not the active camera")
        if self._used_bytes >= self.quota_bytes:
            raise StorageFull(f"{self._used_bytes} bytes stored, quota {self.quota_bytes}")
        self._poll_telemetry()
        now = self.clock.now()
        latency = self._rng.uniform(*self.latency_range)
        if kind == KIND_VIDEO:
            latency += params.duration  # recording cannot beat real time
        start = max(now, self._busy_until)
        action = _Action(
            action_id=self._next_action, kind=kind, camera=camera, params=params,
            joints=self._joints, submitted=now, start=start, finish=start + latency)
        self._next_action += 1
        self._busy_until = action.finish
        self._actions[action.action_id] = action
        self._pending.append(action)
        return action.action_id

    def tick(self) -> None:
        """Complete elapsed actions and push one download chunk."""
        self._poll_telemetry()
        now = self.clock.now()
        while self._pending and self._pending[0].finish <= now:
            self._materialize(self._pending.popleft())
        if self._pending:
            head = self._pending[0]
            if head.phase(now) in ("downloaded", "post_processed"):
                self._ensure_content(head)
        self._stream_chunk(now)

    def action_state(self, action_id: int) -> tuple[str, MediaRecord | None]:
        action = self._actions.get(action_id)
        if action is None:
            raise UnknownAction(str(action_id))
        if action.record is None and action.finish <= self.clock.now():
            self.tick()  # polling late still yields the finished result
        return action.phase(self.clock.now()), action.record

    def _ensure_content(self, action: _Action) -> None:
        """Assign the media id and render the bytes, exactly once."""
        if action.data is not None:
            return
        action.media_id = self._next_media
        self._next_media += 1
        p = action.params
        stamp = action.start
        seed = imaging.content_seed(self.seed, action.camera, action.media_id,
                                    p.width, p.height, p.field_of_view,
                                    p.color_space, p.use_light, f"{stamp:.6f}")
        if action.kind == KIND_IMAGE:
            action.data = imaging.make_image(
                camera=action.camera, stamp=stamp, joints=action.joints,
                width=p.width, height=p.height, fov=p.field_of_view,
                gray=p.gray, light=p.use_light, seed=seed)
        else:
            action.data = imaging.make_video(
                camera=action.camera, stamp=stamp, joints=action.joints,
                width=p.width, height=p.height, duration=p.duration,
                fps=self.fps, fov=p.field_of_view, gray=p.gray,
                light=p.use_light, seed=seed)
        if self._bus is not None:
            self._streaming.append(action)

    def _stream_chunk(self, now: float) -> None:
        while self._streaming and self._streaming[0].sent_chunks * CHUNK_BYTES >= len(
                self._streaming[0].data):
            self._streaming.popleft()
        if self._bus is None or not self._streaming:
            return
        action = self._streaming[0]
        total = max(1, -(-len(action.data) // CHUNK_BYTES))
        i = action.sent_chunks
        piece = action.data[i * CHUNK_BYTES:(i + 1) * CHUNK_BYTES]
        action.sent_chunks += 1
        self._bus.publish(FRAMES_TOPIC,
                          _CHUNK_HEADER.pack(action.action_id, i, total) + piece, now)

    def _materialize(self, action: _Action) -> None:
        self._ensure_content(action)
        ext = "jpg" if action.kind == KIND_IMAGE else "vid"
        path = self.media_root / action.camera / f"{action.media_id}.{ext}"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(action.data)
        record = MediaRecord(media_id=action.media_id, camera=action.camera,
                             kind=action.kind, path=str(path),
                             size=len(action.data), created=action.finish)
        action.record = record
        self._records[action.media_id] = record
        self._used_bytes += record.size

    # -- media management ------------------------------------------------

    def list_media(self) -> list[MediaRecord]:
        return sorted(self._records.values(), key=lambda r: (r.created, r.media_id))

    def delete_media(self, media_id: int) -> None:
        record = self._records.pop(media_id, None)
        if record is None:
            raise UnknownMedia(str(media_id))
        self._used_bytes -= record.size
        Path(record.path).unlink(missing_ok=True)

    @property
    def used_bytes(self) -> int:
        return self._used_bytes

    # -- bus integration ---------------------------------------------------

    def _poll_telemetry(self) -> None:
        if self._bus is None:
            return
        if self._telemetry is None:
            try:
                self._telemetry = self._bus.subscribe(TELEMETRY_TOPIC)
            except UnknownTopic:
                return  # the robot side is not up yet; retry next tick
        newest = None
        for payload, _stamp in self._telemetry.drain():
            newest = payload
        if newest is not None:
            self._joints = tuple(j.position for j in unpack_telemetry(newest))

    def _register_services(self, bus: Bus) -> None:
        bus.register_service(ServiceSpec("camera/select"), self._svc_select, inline=True)
        bus.register_service(ServiceSpec("camera/take_image"), self._svc_take_image,
                             inline=True)
        bus.register_service(ServiceSpec("camera/record_video"), self._svc_record_video,
                             inline=True)
        bus.register_service(ServiceSpec("camera/action"), self._svc_action, inline=True)
        bus.register_service(ServiceSpec("camera/list"), self._svc_list, inline=True)
        bus.register_service(ServiceSpec("camera/delete"), self._svc_delete, inline=True)

    def _svc_select(self, request: bytes) -> bytes:
        self.select_camera(request.decode().strip())
        return b"ok"

    def _svc_take_image(self, request: bytes) -> bytes:
        camera, params = _parse_capture(request.decode(), video=False)
        return str(self.take_image(camera, params)).encode()

    def _svc_record_video(self, request: bytes) -> bytes:
        camera, params = _parse_capture(request.decode(), video=True)
        return str(self.record_video(camera, params)).encode()

    def _svc_action(self, request: bytes) -> bytes:
        phase, record = self.action_state(int(request.decode()))
        if record is not None:
            return f"done {record.media_id}".encode()
        return phase.encode()

    def _svc_list(self, request: bytes) -> bytes:
        lines = [f"{r.media_id} {r.camera} {r.kind} {r.size} {r.created:.6f} {r.path}"
                 for r in self.list_media()]
        return "\n".join(lines).encode()

    def _svc_delete(self, request: bytes) -> bytes:
        self.delete_media(int(request.decode()))
        return b"ok"


def _parse_capture(text: str, video: bool):
    """Decode 'camera WIDTH HEIGHT fov color light [duration]'."""
    fields = text.split()
    want = 7 if video else 6
    if len(fields) != want:
        raise ValueError(f"expected {want} fields, got {len(fields)}")
    camera = fields[0]
    params = CaptureParams(
        width=int(fields[1]), height=int(fields[2]), field_of_view=fields[3],
        color_space=fields[4], use_light=fields[5] not in ("0", "false"),
        duration=float(fields[6]) if video else 0.0)
    return camera, params
