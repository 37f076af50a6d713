"""Sender configuration file.

Plain INI, one [folder:NAME] section per top-level directory under the
transmission root, matched against the first path segment of each file.
Files in unmatched folders (or at the root) use the [default] section.

    [sender]
    rate = 1000000
    fragment_size = 1024
    packet_budget = 1400
    rescan_period = 5.0

    [folder:media]
    priority = 10
    resend_count = 2
    min_resend_interval = 0.0

    [default]
    priority = 1
    resend_count = 1
    min_resend_interval = 0.0
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .fragmenting import DEFAULT_FRAGMENT_SIZE, MIN_FRAGMENT_SIZE
from .scheduler import TransferConfig
from .wire import OVERHEAD_BYTES

DEFAULT_RATE = 1_000_000.0
DEFAULT_PACKET_BUDGET = 1400
DEFAULT_RESCAN_PERIOD = 5.0


class SyncConfigError(Exception):
    pass


@dataclass
class SyncSettings:
    rate_bits: float = DEFAULT_RATE
    fragment_size: int = DEFAULT_FRAGMENT_SIZE
    packet_budget: int = DEFAULT_PACKET_BUDGET
    rescan_period: float = DEFAULT_RESCAN_PERIOD
    folders: dict[str, TransferConfig] = field(default_factory=dict)
    default: TransferConfig = field(default_factory=TransferConfig)

    def __post_init__(self):
        if self.rate_bits <= 0:
            raise SyncConfigError("rate must be positive")
        if self.fragment_size < MIN_FRAGMENT_SIZE:
            raise SyncConfigError(f"fragment_size must be >= {MIN_FRAGMENT_SIZE}")
        if self.packet_budget < self.fragment_size + OVERHEAD_BYTES:
            raise SyncConfigError("packet_budget too small for one fragment")
        if self.rescan_period <= 0:
            raise SyncConfigError("rescan_period must be positive")

    def config_for(self, relpath: str) -> TransferConfig:
        head = relpath.split("/", 1)[0]
        return self.folders.get(head, self.default)


def _transfer_config(section) -> TransferConfig:
    try:
        return TransferConfig(
            priority=section.getint("priority", 0),
            resend_count=section.getint("resend_count", 1),
            min_resend_interval=section.getfloat("min_resend_interval", 0.0))
    except ValueError as exc:
        raise SyncConfigError(str(exc)) from exc


def load_sync_config(path) -> SyncSettings:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise SyncConfigError(f"cannot read config {path}")
    kwargs = {}
    if parser.has_section("sender"):
        sender = parser["sender"]
        try:
            kwargs = dict(
                rate_bits=sender.getfloat("rate", DEFAULT_RATE),
                fragment_size=sender.getint("fragment_size", DEFAULT_FRAGMENT_SIZE),
                packet_budget=sender.getint("packet_budget", DEFAULT_PACKET_BUDGET),
                rescan_period=sender.getfloat("rescan_period", DEFAULT_RESCAN_PERIOD))
        except ValueError as exc:
            raise SyncConfigError(f"bad [sender] value: {exc}") from exc
    folders = {}
    default = TransferConfig()
    for name in parser.sections():
        if name == "sender":
            continue
        if name == "default":
            default = _transfer_config(parser[name])
        elif name.startswith("folder:"):
            folder = name.split(":", 1)[1].strip()
            if not folder:
                raise SyncConfigError("empty folder name")
            folders[folder] = _transfer_config(parser[name])
        else:
            raise SyncConfigError(f"unknown section [{name}]")
    return SyncSettings(folders=folders, default=default, **kwargs)
