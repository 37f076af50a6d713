"""Dependency-ordered process supervision.

One supervisor loop consumes a serialized event queue; per-process output
readers run on their own threads and only enqueue events. Readiness and
errors are detected by matching each stdout line against the process
patterns: the first error match wins even if a ready match would follow.

Two launchers share the supervisor logic. SubprocessLauncher spawns real
OS processes. VirtualLauncher hosts in-process stand-ins so the
deterministic simulation can run a whole process topology inside one
interpreter.
"""

from __future__ import annotations

import enum
import graphlib
import os
import queue
import re
import subprocess
import threading
import time
from dataclasses import dataclass, field

from .config import ProcessGraph, ProcessSpec


class ProcessState(str, enum.Enum):
    STOPPED = "stopped"
    STARTING = "starting"
    READY = "ready"
    FAILED = "failed"


@dataclass
class ProcessStatus:
    name: str
    state: ProcessState = ProcessState.STOPPED
    last_output_line: str = ""
    restarts: int = 0
    last_error_line: str | None = None
    starts: int = field(default=0, repr=False)


class SupervisorError(Exception):
    pass


class UnknownProcess(SupervisorError):
    pass


class SpawnError(SupervisorError):
    def __init__(self, name: str, detail: str = ""):
        super().__init__(f"{name}: {detail}" if detail else name)
        self.name = name


class ReadyTimeout(SupervisorError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name


# -- launchers ------------------------------------------------------------


class SubprocessLauncher:
    """Real child processes; stdout lines stream into the event queue."""

    GRACE = 2.0  # seconds between terminate and kill

    def start(self, spec: ProcessSpec, emit) -> "_SubprocessHandle":
        env = dict(spec.env)
        env.setdefault("PATH", os.environ.get("PATH", "/usr/bin:/bin"))
        try:
            proc = subprocess.Popen(
                spec.command,
                stdout=subprocess.PIPE,
                stderr=subprocess.STDOUT,
                env=env,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise SpawnError(spec.name, str(exc)) from None
        handle = _SubprocessHandle(spec.name, proc)
        handle.reader = threading.Thread(
            target=_pump_output, args=(spec.name, proc, emit), daemon=True)
        handle.reader.start()
        return handle


def _pump_output(name: str, proc: subprocess.Popen, emit):
    assert proc.stdout is not None
    for line in proc.stdout:
        emit(("line", name, line.rstrip("\n")))
    emit(("exit", name, proc.wait()))


class _SubprocessHandle:
    def __init__(self, name: str, proc: subprocess.Popen):
        self.name = name
        self.proc = proc
        self.reader: threading.Thread | None = None

    def stop(self):
        if self.proc.poll() is None:
            self.proc.terminate()
            try:
                self.proc.wait(timeout=SubprocessLauncher.GRACE)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()
        if self.reader is not None:
            self.reader.join(timeout=SubprocessLauncher.GRACE)


class VirtualLauncher:
    """In-process stand-ins keyed by process name.

    A factory is called as factory(spec, emit_line) and returns an object
    with a stop() method (or None). emit_line(text) feeds the supervisor
    exactly like a stdout line, synchronously, so bring-up stays
    deterministic.
    """

    def __init__(self):
        self._factories: dict = {}

    def register(self, name: str, factory) -> None:
        self._factories[name] = factory

    def start(self, spec: ProcessSpec, emit) -> "_VirtualHandle":
        factory = self._factories.get(spec.name)
        if factory is None:
            raise SpawnError(spec.name, "no virtual process registered")

        def emit_line(text: str):
            emit(("line", spec.name, text))

        try:
            instance = factory(spec, emit_line)
        except Exception as exc:
            raise SpawnError(spec.name, str(exc)) from None
        return _VirtualHandle(spec.name, instance)


class _VirtualHandle:
    def __init__(self, name: str, instance):
        self.name = name
        self.instance = instance

    def stop(self):
        stop = getattr(self.instance, "stop", None)
        if callable(stop):
            stop()


# -- supervisor -----------------------------------------------------------


class Supervisor:
    def __init__(self, graph: ProcessGraph, launcher=None, clock=time.monotonic):
        self.graph = graph
        self.launcher = launcher or SubprocessLauncher()
        self._clock = clock
        self._events: queue.Queue = queue.Queue()
        self._handles: dict = {}
        self._lock = threading.Lock()
        self._status = {name: ProcessStatus(name) for name in graph.order}
        self._ready_re = {n: re.compile(s.ready_pattern) for n, s in graph.specs.items()}
        self._error_re = {
            n: re.compile(s.error_pattern) if s.error_pattern else None
            for n, s in graph.specs.items()
        }

    # -- queries ----------------------------------------------------------

    def status(self, name: str | None = None):
        self.pump()
        with self._lock:
            if name is not None:
                if name not in self._status:
                    raise UnknownProcess(name)
                return self._status[name]
            return {n: self._status[n] for n in self.graph.order}

    def all_ready(self) -> bool:
        self.pump()
        with self._lock:
            return bool(self._status) and all(
                st.state is ProcessState.READY for st in self._status.values())

    # -- event handling ----------------------------------------------------

    def _emit(self, event) -> None:
        self._events.put(event)

    def pump(self) -> None:
        """Apply all pending reader events (non-blocking)."""
        while True:
            try:
                event = self._events.get_nowait()
            except queue.Empty:
                return
            self._apply(event)

    def _apply(self, event) -> None:
        kind, name, data = event
        with self._lock:
            st = self._status.get(name)
            if st is None:
                return
            if kind == "line":
                st.last_output_line = data
                err = self._error_re.get(name)
                if err is not None and err.search(data):
                    st.last_error_line = data
                    if st.state is ProcessState.STARTING:
                        st.state = ProcessState.FAILED
                    # error after ready: exposed via last_error_line only
                elif st.state is ProcessState.STARTING and self._ready_re[name].search(data):
                    st.state = ProcessState.READY
            elif kind == "exit":
                if st.state in (ProcessState.STARTING, ProcessState.READY):
                    st.state = ProcessState.FAILED
                    st.last_error_line = f"exited with code {data}"
                self._handles.pop(name, None)

    # -- lifecycle ----------------------------------------------------------

    def _launch(self, name: str) -> bool:
        spec = self.graph.specs[name]
        with self._lock:
            st = self._status[name]
            st.state = ProcessState.STARTING
            st.last_error_line = None
            st.starts += 1
            if st.starts > 1:
                st.restarts += 1
        try:
            handle = self.launcher.start(spec, self._emit)
        except SpawnError as exc:
            with self._lock:
                st.state = ProcessState.FAILED
                st.last_error_line = str(exc)
            return False
        with self._lock:
            self._handles[name] = handle
        return True

    def _wait_ready(self, names: set, strict: bool) -> None:
        """Block until every name leaves STARTING or its deadline passes."""
        deadlines = {n: self._clock() + self.graph.specs[n].start_timeout for n in names}
        while True:
            self.pump()
            pending = [n for n in names
                       if self._status[n].state is ProcessState.STARTING]
            if not pending:
                return
            now = self._clock()
            expired = [n for n in pending if now >= deadlines[n]]
            for n in expired:
                self._stop_one(n)
                with self._lock:
                    self._status[n].state = ProcessState.FAILED
                    self._status[n].last_error_line = "ready timeout"
                if strict:
                    raise ReadyTimeout(n)
            if expired:
                continue
            # Virtual processes emit their output synchronously during
            # start; once the queue is drained no further event can come,
            # so a still-starting virtual process is silent: fail it now
            # instead of spinning until the deadline.
            with self._lock:
                all_virtual = all(
                    isinstance(self._handles.get(n), _VirtualHandle) for n in pending)
            if all_virtual and self._events.empty():
                for n in pending:
                    self._stop_one(n)
                    with self._lock:
                        self._status[n].state = ProcessState.FAILED
                        self._status[n].last_error_line = "no ready line"
                    if strict:
                        raise ReadyTimeout(n)
                return
            next_deadline = min(deadlines[n] for n in pending)
            try:
                event = self._events.get(timeout=max(0.0, min(0.05, next_deadline - now)))
            except queue.Empty:
                continue
            self._apply(event)

    def start_all(self, strict: bool = False) -> dict:
        """Bring up every process in dependency order.

        Returns the status map. A failed process leaves its dependents
        failed-without-start. With strict=True the first root-cause
        failure raises instead (SpawnError or ReadyTimeout).
        """
        sorter = graphlib.TopologicalSorter(
            {n: s.depends_on for n, s in self.graph.specs.items()})
        sorter.prepare()
        while sorter.is_active():
            batch = [n for n in sorter.get_ready()
                     if self._status[n].state is not ProcessState.FAILED]
            launched = set()
            for name in batch:
                if self._launch(name):
                    launched.add(name)
                elif strict:
                    raise SpawnError(name, self._status[name].last_error_line or "")
            if launched:
                self._wait_ready(launched, strict)
            progressed = False
            for name in batch:
                if self._status[name].state is ProcessState.READY:
                    sorter.done(name)
                    progressed = True
            if not progressed:
                break  # every launched process failed; dependents stay unstarted
            for name in batch:
                if self._status[name].state is not ProcessState.READY:
                    self._fail_dependents(name)
        self._mark_blocked_failed()
        return self.status()

    def _fail_dependents(self, name: str) -> None:
        for dep in self.graph.dependents_of(name):
            with self._lock:
                st = self._status[dep]
                if st.state is ProcessState.STOPPED:
                    st.state = ProcessState.FAILED
                    st.last_error_line = f"dependency {name!r} failed"

    def _mark_blocked_failed(self) -> None:
        with self._lock:
            failed = [n for n, st in self._status.items()
                      if st.state is ProcessState.FAILED]
        for name in failed:
            self._fail_dependents(name)

    def _stop_one(self, name: str) -> None:
        with self._lock:
            handle = self._handles.pop(name, None)
        if handle is not None:
            handle.stop()
        self.pump()
        with self._lock:
            self._status[name].state = ProcessState.STOPPED

    def stop_all(self) -> None:
        for name in reversed(self.graph.order):
            with self._lock:
                running = name in self._handles
            if running:
                self._stop_one(name)
        self.pump()
        with self._lock:
            for st in self._status.values():
                st.state = ProcessState.STOPPED

    def restart(self, name: str, strict: bool = False) -> ProcessStatus:
        """Stop `name` and its dependents, then restart them in order."""
        if name not in self.graph:
            raise UnknownProcess(name)
        group = {name} | self.graph.dependents_of(name)
        for n in reversed(self.graph.order):
            if n in group:
                self._stop_one(n)
        for n in self.graph.order:
            if n in group:
                deps_ok = all(
                    self._status[d].state is ProcessState.READY
                    for d in self.graph.specs[n].depends_on)
                if not deps_ok:
                    self._fail_dependents(n)
                    with self._lock:
                        self._status[n].state = ProcessState.FAILED
                        self._status[n].last_error_line = "dependency not ready"
                    continue
                if self._launch(n):
                    self._wait_ready({n}, strict)
                if self._status[n].state is not ProcessState.READY:
                    self._fail_dependents(n)
        return self.status(name)
