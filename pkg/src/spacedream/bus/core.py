"""Topic / service / parameter communication layer.

Topics carry cyclic messages (opaque bytes plus a stamp), services handle
acyclic request/response calls, and parameters expose externally settable
variables. Within one OS process everything is plain in-process dispatch;
the loopback socket bridge in `bridge.py` extends the same surface across
processes.

Payloads are opaque bytes with fixed-layout records documented per topic;
the bus only enforces schema identity by comparing schema_id strings.
"""

from __future__ import annotations

import threading
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass, field
from typing import Callable, Union

ParamValue = Union[bool, int, float, list, str]

# Parameter type tags, shared with the wire codec.
P_BOOL, P_INT, P_FLOAT, P_FLOAT_ARRAY, P_STRING = range(5)


class BusError(Exception):
    pass


class UnknownTopic(BusError):
    pass


class SchemaMismatch(BusError):
    pass


class UnknownService(BusError):
    pass


class ServiceTimeout(BusError):
    pass


class UnknownParameter(BusError):
    pass


class NotWritable(BusError):
    pass


class TypeMismatch(BusError):
    pass


def param_tag(value: ParamValue) -> int:
    # bool before int: bool is an int subclass.
    if isinstance(value, bool):
        return P_BOOL
    if isinstance(value, int):
        return P_INT
    if isinstance(value, float):
        return P_FLOAT
    if isinstance(value, (list, tuple)):
        return P_FLOAT_ARRAY
    if isinstance(value, str):
        return P_STRING
    raise TypeMismatch(f"unsupported parameter type {type(value).__name__}")


@dataclass(frozen=True)
class TopicSpec:
    name: str
    schema_id: str
    nominal_rate: float = 0.0  # messages per second, 0 = acyclic

    def __post_init__(self):
        if not self.name:
            raise ValueError("topic name must be non-empty")
        if self.nominal_rate < 0:
            raise ValueError("nominal_rate must be >= 0")


@dataclass(frozen=True)
class ServiceSpec:
    name: str
    request_schema_id: str = ""
    response_schema_id: str = ""


@dataclass
class Parameter:
    name: str
    value: ParamValue
    writable: bool = True
    tag: int = field(init=False)

    def __post_init__(self):
        self.tag = param_tag(self.value)


class Subscription:
    """Queue-backed subscription: bounded, drop-oldest, overflow counted."""

    def __init__(self, topic: str, maxlen: int):
        self.topic = topic
        self._queue: deque = deque(maxlen=maxlen)
        self._maxlen = maxlen
        self.overflow = 0
        self._lock = threading.Lock()

    def _push(self, payload: bytes, stamp: float) -> None:
        with self._lock:
            if len(self._queue) == self._maxlen:
                self.overflow += 1
            self._queue.append((payload, stamp))

    def pop(self):
        """Oldest pending (payload, stamp), or None."""
        with self._lock:
            return self._queue.popleft() if self._queue else None

    def drain(self) -> list:
        with self._lock:
            out = list(self._queue)
            self._queue.clear()
        return out

    def latest(self):
        """Most recent pending message without clearing older ones."""
        with self._lock:
            return self._queue[-1] if self._queue else None

    def __len__(self) -> int:
        with self._lock:
            return len(self._queue)


class _Topic:
    def __init__(self, spec: TopicSpec, queue_depth: int):
        self.spec = spec
        self.queue_depth = queue_depth
        self.callbacks: list[Callable[[bytes, float], None]] = []
        self.subscriptions: list[Subscription] = []
        self.publish_count = 0


class _Service:
    def __init__(self, spec: ServiceSpec, handler: Callable[[bytes], bytes], inline: bool):
        self.spec = spec
        self.handler = handler
        self.inline = inline


class Bus:
    """Thread-safe in-process bus; a handle may be shared across threads.

    Service handlers run on a caller-independent executor by default so a
    slow handler cannot stall the caller past its timeout. Handlers
    registered with inline=True run on the caller's thread instead, which
    the deterministic simulation relies on (no timeout enforcement there).
    """

    DEFAULT_QUEUE_DEPTH = 16

    def __init__(self):
        self._lock = threading.RLock()
        self._topics: dict[str, _Topic] = {}
        self._services: dict[str, _Service] = {}
        self._params: dict[str, Parameter] = {}
        self._executor: ThreadPoolExecutor | None = None

    # -- topics ---------------------------------------------------------

    def register_topic(self, spec: TopicSpec, queue_depth: int = DEFAULT_QUEUE_DEPTH) -> TopicSpec:
        with self._lock:
            existing = self._topics.get(spec.name)
            if existing is not None:
                if existing.spec.schema_id != spec.schema_id:
                    raise SchemaMismatch(
                        f"topic {spec.name!r} already registered with schema "
                        f"{existing.spec.schema_id!r}"
                    )
                return existing.spec
            self._topics[spec.name] = _Topic(spec, queue_depth)
            return spec

    def topic_names(self) -> list[str]:
        with self._lock:
            return sorted(self._topics)

    def topic_spec(self, name: str) -> TopicSpec:
        topic = self._topics.get(name)
        if topic is None:
            raise UnknownTopic(name)
        return topic.spec

    def subscribe(self, name: str, callback: Callable[[bytes, float], None] | None = None,
                  schema_id: str | None = None, queue_depth: int | None = None):
        """Attach a callback (invoked synchronously on publish) or, with no
        callback, return a bounded Subscription queue."""
        with self._lock:
            topic = self._topics.get(name)
            if topic is None:
                raise UnknownTopic(name)
            if schema_id is not None and schema_id != topic.spec.schema_id:
                raise SchemaMismatch(
                    f"subscriber expects {schema_id!r}, topic carries {topic.spec.schema_id!r}"
                )
            if callback is not None:
                topic.callbacks.append(callback)
                return None
            sub = Subscription(name, queue_depth or topic.queue_depth)
            topic.subscriptions.append(sub)
            return sub

    def unsubscribe(self, name: str, target) -> None:
        with self._lock:
            topic = self._topics.get(name)
            if topic is None:
                return
            if target in topic.callbacks:
                topic.callbacks.remove(target)
            if target in topic.subscriptions:
                topic.subscriptions.remove(target)

    def publish(self, name: str, payload: bytes, stamp: float) -> None:
        with self._lock:
            topic = self._topics.get(name)
            if topic is None:
                raise UnknownTopic(name)
            topic.publish_count += 1
            callbacks = list(topic.callbacks)
            subscriptions = list(topic.subscriptions)
        for sub in subscriptions:
            sub._push(payload, stamp)
        for cb in callbacks:
            cb(payload, stamp)

    def publish_count(self, name: str) -> int:
        topic = self._topics.get(name)
        if topic is None:
            raise UnknownTopic(name)
        return topic.publish_count

    # -- services -------------------------------------------------------

    def register_service(self, spec: ServiceSpec, handler: Callable[[bytes], bytes],
                         inline: bool = False) -> None:
        with self._lock:
            self._services[spec.name] = _Service(spec, handler, inline)

    def service_names(self) -> list[str]:
        with self._lock:
            return sorted(self._services)

    def call_service(self, name: str, request: bytes, timeout: float = 5.0) -> bytes:
        with self._lock:
            svc = self._services.get(name)
            if svc is None:
                raise UnknownService(name)
            if self._executor is None and not svc.inline:
                self._executor = ThreadPoolExecutor(max_workers=4, thread_name_prefix="bus-svc")
            executor = self._executor
        if svc.inline:
            return svc.handler(request)
        future = executor.submit(svc.handler, request)
        try:
            return future.result(timeout=timeout)
        except FutureTimeout:
            raise ServiceTimeout(f"service {name!r} did not respond within {timeout} s") from None

    # -- parameters -----------------------------------------------------

    def declare_parameter(self, name: str, value: ParamValue, writable: bool = True) -> Parameter:
        with self._lock:
            param = Parameter(name, value, writable)
            self._params[name] = param
            return param

    def parameter_names(self) -> list[str]:
        with self._lock:
            return sorted(self._params)

    def set_parameter(self, name: str, value: ParamValue) -> None:
        with self._lock:
            param = self._params.get(name)
            if param is None:
                raise UnknownParameter(name)
            if not param.writable:
                raise NotWritable(name)
            if param_tag(value) != param.tag:
                raise TypeMismatch(
                    f"parameter {name!r} holds tag {param.tag}, got {param_tag(value)}"
                )
            param.value = value

    def get_parameter(self, name: str) -> ParamValue:
        with self._lock:
            param = self._params.get(name)
            if param is None:
                raise UnknownParameter(name)
            return param.value

    def shutdown(self) -> None:
        with self._lock:
            executor, self._executor = self._executor, None
        if executor is not None:
            executor.shutdown(wait=False, cancel_futures=True)
