"""Process graph configuration.

INI-style format, one block per process:

    [process:hal]
    command = python3 -m robot.hal --sim
    ready = ^HAL ready
    error = ^HAL (fault|error)
    depends = power
    timeout = 10.0
    env =
        SIM_MODE=1
        LOG_LEVEL=info

`command` is required and split with shell quoting rules. `ready` is the
regular expression whose first match on a stdout line marks the process
ready (default matches any line). `error` marks it failed instead; an
error match on a line wins over a ready match on a later line. `depends`
lists process names (whitespace or comma separated) that must be ready
before this one is launched. `timeout` is the readiness deadline in
seconds. `env` lines are KEY=VALUE pairs; the child environment is built
from exactly these (plus PATH), not inherited wholesale.
"""

from __future__ import annotations

import configparser
import graphlib
import re
import shlex
from dataclasses import dataclass, field

_SECTION_PREFIX = "process:"
DEFAULT_TIMEOUT = 10.0


class ConfigError(Exception):
    pass


class ParseError(ConfigError):
    pass


class CycleError(ConfigError):
    pass


class UnknownDependency(ConfigError):
    pass


@dataclass(frozen=True)
class ProcessSpec:
    name: str
    command: tuple[str, ...]
    env: dict = field(default_factory=dict)
    depends_on: tuple[str, ...] = ()
    ready_pattern: str = ".*"
    error_pattern: str | None = None
    start_timeout: float = DEFAULT_TIMEOUT

    def __post_init__(self):
        re.compile(self.ready_pattern)
        if self.error_pattern is not None:
            re.compile(self.error_pattern)


@dataclass(frozen=True)
class ProcessGraph:
    specs: dict
    order: tuple[str, ...]  # a valid topological order

    def __len__(self) -> int:
        return len(self.specs)

    def __contains__(self, name: str) -> bool:
        return name in self.specs

    def dependents_of(self, name: str) -> set:
        """All processes that transitively depend on `name`."""
        reverse: dict[str, set] = {n: set() for n in self.specs}
        for spec in self.specs.values():
            for dep in spec.depends_on:
                reverse[dep].add(spec.name)
        out: set[str] = set()
        frontier = [name]
        while frontier:
            for child in reverse[frontier.pop()]:
                if child not in out:
                    out.add(child)
                    frontier.append(child)
        return out


def _split_names(raw: str) -> tuple[str, ...]:
    return tuple(raw.replace(",", " ").split())


def _parse_env(raw: str) -> dict:
    env = {}
    for line in raw.splitlines():
        line = line.strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ParseError(f"bad env entry {line!r} (expected KEY=VALUE)")
        env[key.strip()] = value.strip()
    return env


def load_config(text: str) -> ProcessGraph:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ParseError(str(exc)) from None

    specs: dict[str, ProcessSpec] = {}
    for section in parser.sections():
        if not section.startswith(_SECTION_PREFIX):
            raise ParseError(f"unexpected section [{section}]")
        name = section[len(_SECTION_PREFIX):]
        if not name:
            raise ParseError("process name must be non-empty")
        block = parser[section]
        command = shlex.split(block.get("command", ""))
        if not command:
            raise ParseError(f"process {name!r} has no command")
        try:
            timeout = block.getfloat("timeout", fallback=DEFAULT_TIMEOUT)
        except ValueError as exc:
            raise ParseError(f"process {name!r}: bad timeout: {exc}") from None
        try:
            spec = ProcessSpec(
                name=name,
                command=tuple(command),
                env=_parse_env(block.get("env", "")),
                depends_on=_split_names(block.get("depends", "")),
                ready_pattern=block.get("ready", ".*"),
                error_pattern=block.get("error") or None,
                start_timeout=timeout,
            )
        except re.error as exc:
            raise ParseError(f"process {name!r}: bad pattern: {exc}") from None
        specs[name] = spec

    for spec in specs.values():
        for dep in spec.depends_on:
            if dep not in specs:
                raise UnknownDependency(f"{spec.name!r} depends on unknown {dep!r}")

    sorter = graphlib.TopologicalSorter({n: s.depends_on for n, s in specs.items()})
    try:
        order = tuple(sorter.static_order())
    except graphlib.CycleError as exc:
        raise CycleError(str(exc)) from None
    return ProcessGraph(specs=specs, order=order)
