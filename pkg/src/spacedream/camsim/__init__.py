from .server import (
    BASE,
    CAMERAS,
    END_EFFECTOR,
    CamError,
    CameraInactive,
    CameraServer,
    CaptureParams,
    MediaRecord,
    StorageFull,
    SwitchLocked,
    UnknownAction,
    UnknownMedia,
    pick_camera,
)

__all__ = [
    "BASE",
    "CAMERAS",
    "END_EFFECTOR",
    "CamError",
    "CameraInactive",
    "CameraServer",
    "CaptureParams",
    "MediaRecord",
    "StorageFull",
    "SwitchLocked",
    "UnknownAction",
    "UnknownMedia",
    "pick_camera",
]
