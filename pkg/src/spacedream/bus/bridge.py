"""TCP loopback bridge exposing a Bus to other processes.

One BusServer wraps a Bus instance. A BusClient connection can publish,
subscribe (via the built-in "bus/subscribe" service), call services, and
get/set parameters using the frame format from `frames.py`. Requests on a
connection are serialized: one in-flight service or parameter call at a
time, while subscribed topic messages flow asynchronously.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading

from . import core
from .core import Bus, ServiceSpec, TopicSpec
from .frames import (
    KIND_PARAM,
    KIND_SERVICE_REQ,
    KIND_SERVICE_RESP,
    KIND_TOPIC,
    PARAM_ERR,
    PARAM_GET,
    PARAM_OK,
    PARAM_SET,
    decode_value,
    encode_frame,
    encode_value,
    read_frame,
)

_ERRORS = {
    "UnknownTopic": core.UnknownTopic,
    "UnknownService": core.UnknownService,
    "ServiceTimeout": core.ServiceTimeout,
    "UnknownParameter": core.UnknownParameter,
    "NotWritable": core.NotWritable,
    "TypeMismatch": core.TypeMismatch,
    "SchemaMismatch": core.SchemaMismatch,
}


def _encode_error(exc: Exception) -> bytes:
    return f"{type(exc).__name__}:{exc}".encode("utf-8")


def _raise_remote(data: bytes):
    text = data.decode("utf-8", "replace")
    kind, _, detail = text.partition(":")
    raise _ERRORS.get(kind, core.BusError)(detail)


class BusServer:
    def __init__(self, bus: Bus, host: str = "127.0.0.1", port: int = 0):
        self.bus = bus
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(8)
        self.address = self._sock.getsockname()
        self._running = True
        self._conn_threads: list[threading.Thread] = []
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    @property
    def port(self) -> int:
        return self.address[1]

    def _accept_loop(self):
        while self._running:
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            t = threading.Thread(target=self._serve, args=(conn,), daemon=True)
            t.start()
            self._conn_threads.append(t)

    def _serve(self, conn: socket.socket):
        write_lock = threading.Lock()
        forwards: list[tuple[str, object]] = []

        def send(kind: int, name: str, payload: bytes):
            data = encode_frame(kind, name, payload)
            with write_lock:
                try:
                    conn.sendall(data)
                except OSError:
                    pass

        try:
            while True:
                frame = read_frame(conn)
                if frame is None:
                    return
                kind, name, payload = frame
                if kind == KIND_TOPIC:
                    stamp = struct.unpack_from("<d", payload, 0)[0]
                    try:
                        self.bus.publish(name, payload[8:], stamp)
                    except core.BusError:
                        pass  # datagram semantics: bad publishes are dropped
                elif kind == KIND_SERVICE_REQ:
                    self._handle_service(name, payload, send, forwards)
                elif kind == KIND_PARAM:
                    self._handle_param(name, payload, send)
        except (OSError, Exception):
            pass
        finally:
            for topic, cb in forwards:
                self.bus.unsubscribe(topic, cb)
            conn.close()

    def _handle_service(self, name, payload, send, forwards):
        if name == "bus/subscribe":
            topic = payload.decode("utf-8")

            def forward(msg: bytes, stamp: float, _topic=topic):
                send(KIND_TOPIC, _topic, struct.pack("<d", stamp) + msg)

            try:
                self.bus.subscribe(topic, forward)
                forwards.append((topic, forward))
                send(KIND_SERVICE_RESP, name, b"\x00")
            except core.BusError as exc:
                send(KIND_SERVICE_RESP, name, b"\x01" + _encode_error(exc))
            return
        if name == "bus/register_topic":
            try:
                topic_name, schema_id, rate = payload.decode("utf-8").split("\n")
                self.bus.register_topic(TopicSpec(topic_name, schema_id, float(rate)))
                send(KIND_SERVICE_RESP, name, b"\x00")
            except (ValueError, core.BusError) as exc:
                send(KIND_SERVICE_RESP, name, b"\x01" + _encode_error(exc))
            return
        try:
            response = self.bus.call_service(name, payload)
            send(KIND_SERVICE_RESP, name, b"\x00" + response)
        except core.BusError as exc:
            send(KIND_SERVICE_RESP, name, b"\x01" + _encode_error(exc))

    def _handle_param(self, name, payload, send):
        op = payload[0] if payload else 255
        try:
            if op == PARAM_GET:
                value = self.bus.get_parameter(name)
                send(KIND_PARAM, name, bytes([PARAM_OK]) + encode_value(value))
            elif op == PARAM_SET:
                self.bus.set_parameter(name, decode_value(payload[1:]))
                send(KIND_PARAM, name, bytes([PARAM_OK]))
            else:
                raise core.BusError(f"bad param op {op}")
        except core.BusError as exc:
            send(KIND_PARAM, name, bytes([PARAM_ERR]) + _encode_error(exc))

    def close(self):
        self._running = False
        try:
            self._sock.close()
        except OSError:
            pass


class BusClient:
    """Client side of the loopback bridge."""

    def __init__(self, host: str, port: int, connect_timeout: float = 5.0):
        self._sock = socket.create_connection((host, port), timeout=connect_timeout)
        self._sock.settimeout(None)
        self._write_lock = threading.Lock()
        self._call_lock = threading.Lock()
        self._responses: queue.Queue = queue.Queue()
        self._callbacks: dict[str, list] = {}
        self._cb_lock = threading.Lock()
        self._closed = False
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _send(self, kind: int, name: str, payload: bytes):
        data = encode_frame(kind, name, payload)
        with self._write_lock:
            self._sock.sendall(data)

    def _read_loop(self):
        try:
            while True:
                frame = read_frame(self._sock)
                if frame is None:
                    break
                kind, name, payload = frame
                if kind == KIND_TOPIC:
                    stamp = struct.unpack_from("<d", payload, 0)[0]
                    with self._cb_lock:
                        callbacks = list(self._callbacks.get(name, ()))
                    for cb in callbacks:
                        cb(payload[8:], stamp)
                else:
                    self._responses.put((kind, name, payload))
        except (OSError, Exception):
            pass
        finally:
            self._closed = True
            self._responses.put(None)

    def _roundtrip(self, kind: int, name: str, payload: bytes, timeout: float):
        with self._call_lock:
            if self._closed:
                raise core.BusError("bridge connection closed")
            self._send(kind, name, payload)
            try:
                item = self._responses.get(timeout=timeout)
            except queue.Empty:
                raise core.ServiceTimeout(f"no response for {name!r} within {timeout} s") from None
            if item is None:
                raise core.BusError("bridge connection closed")
            return item

    # -- public surface, mirroring Bus ----------------------------------

    def publish(self, name: str, payload: bytes, stamp: float) -> None:
        self._send(KIND_TOPIC, name, struct.pack("<d", stamp) + payload)

    def subscribe(self, name: str, callback, timeout: float = 5.0) -> None:
        with self._cb_lock:
            known = name in self._callbacks
            self._callbacks.setdefault(name, []).append(callback)
        if not known:
            kind, _, payload = self._roundtrip(
                KIND_SERVICE_REQ, "bus/subscribe", name.encode("utf-8"), timeout)
            if payload[:1] != b"\x00":
                _raise_remote(payload[1:])

    def register_topic(self, spec: TopicSpec, timeout: float = 5.0) -> None:
        body = f"{spec.name}\n{spec.schema_id}\n{spec.nominal_rate}".encode("utf-8")
        _, _, payload = self._roundtrip(KIND_SERVICE_REQ, "bus/register_topic", body, timeout)
        if payload[:1] != b"\x00":
            _raise_remote(payload[1:])

    def call_service(self, name: str, request: bytes, timeout: float = 5.0) -> bytes:
        kind, rname, payload = self._roundtrip(KIND_SERVICE_REQ, name, request, timeout)
        if kind != KIND_SERVICE_RESP or rname != name:
            raise core.BusError(f"out-of-order response for {name!r}")
        if payload[:1] == b"\x00":
            return payload[1:]
        _raise_remote(payload[1:])

    def get_parameter(self, name: str, timeout: float = 5.0):
        _, _, payload = self._roundtrip(KIND_PARAM, name, bytes([PARAM_GET]), timeout)
        if payload[0] == PARAM_OK:
            return decode_value(payload[1:])
        _raise_remote(payload[1:])

    def set_parameter(self, name: str, value, timeout: float = 5.0) -> None:
        body = bytes([PARAM_SET]) + encode_value(value)
        _, _, payload = self._roundtrip(KIND_PARAM, name, body, timeout)
        if payload[0] == PARAM_OK:
            return
        _raise_remote(payload[1:])

    def close(self):
        self._closed = True
        try:
            self._sock.close()
        except OSError:
            pass


# Re-export used by callers that need the service spec type.
__all__ = ["BusServer", "BusClient", "ServiceSpec"]
