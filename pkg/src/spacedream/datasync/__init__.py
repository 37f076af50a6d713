from .channel import ChannelSim, ChannelStats
from .fragmenting import (
    DEFAULT_FRAGMENT_SIZE,
    FileFragments,
    FileMeta,
    decode_metadata,
    encode_metadata,
    fragment_file,
)
from .ratelimit import TokenBucket
from .receiver import FileManifest, Receiver, ReceiverStats, UnknownLength
from .scheduler import SendScheduler, TransferConfig
from .sender import Sender
from .syncconfig import SyncConfigError, SyncSettings, load_sync_config
from .watcher import FileEvent, FolderWatcher, RootMissing
from .wire import (
    KIND_DATA,
    KIND_HEADER_COPY,
    KIND_METADATA,
    Fragment,
    decode_packet,
    encode_fragment,
    encode_packet,
    file_identity,
    fnv1a64,
)

__all__ = [
    "ChannelSim",
    "ChannelStats",
    "DEFAULT_FRAGMENT_SIZE",
    "FileEvent",
    "FileFragments",
    "FileManifest",
    "FileMeta",
    "FolderWatcher",
    "Fragment",
    "KIND_DATA",
    "KIND_HEADER_COPY",
    "KIND_METADATA",
    "Receiver",
    "ReceiverStats",
    "RootMissing",
    "SendScheduler",
    "Sender",
    "SyncConfigError",
    "SyncSettings",
    "TokenBucket",
    "TransferConfig",
    "UnknownLength",
    "decode_metadata",
    "decode_packet",
    "encode_fragment",
    "encode_metadata",
    "encode_packet",
    "file_identity",
    "fnv1a64",
    "fragment_file",
    "load_sync_config",
]
