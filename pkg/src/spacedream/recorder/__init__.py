from .logfmt import LogFile, LogFormatError, LogRecord, LogWriter, read_log
from .recorder import FLIGHT_PROFILE, FULL_PROFILE, Recorder

__all__ = [
    "FLIGHT_PROFILE",
    "FULL_PROFILE",
    "LogFile",
    "LogFormatError",
    "LogRecord",
    "LogWriter",
    "Recorder",
    "read_log",
]
