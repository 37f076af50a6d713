import os
import struct
import threading
import time

import pytest

from spacedream.bus import (
    Bus,
    ServiceSpec,
    ServiceTimeout,
    TopicSpec,
    TypeMismatch,
    UnknownService,
    UnknownTopic,
)
from spacedream.bus.bridge import BusClient, BusServer
from spacedream.bus.frames import (
    decode_frame,
    decode_value,
    encode_frame,
    encode_value,
)


def test_frame_codec_roundtrip():
    for kind, name, payload in [
        (0, "hal/telemetry", b"\x01\x02\x03"),
        (1, "camera/take_image", b""),
        (2, "camera/take_image", b"\x00result"),
        (3, "controller/mode", b"\x01\x04\x05"),
    ]:
        body = encode_frame(kind, name, payload)
        decoded = decode_frame(body[4:])
        assert decoded == (kind, name, payload)
        (length,) = struct.unpack("<I", body[:4])
        assert length == len(body) - 4


def test_value_codec_roundtrip():
    for value in [True, False, 0, -17, 2**40, 3.125, [1.0, -2.5, 0.0], [], "joint_1", ""]:
        assert decode_value(encode_value(value)) == value


@pytest.fixture
def server():
    bus = Bus()
    bus.register_topic(TopicSpec("t/data", "S"))
    bus.register_service(ServiceSpec("echo"), lambda req: b"<" + req + b">")
    bus.register_service(ServiceSpec("slow"), lambda req: time.sleep(2.0) or b"")
    bus.declare_parameter("p/gain", 10.0)
    srv = BusServer(bus)
    yield srv
    srv.close()
    bus.shutdown()


@pytest.fixture
def client(server):
    c = BusClient("127.0.0.1", server.port)
    yield c
    c.close()


def test_remote_service_call(client):
    assert client.call_service("echo", b"hi") == b"<hi>"


def test_remote_unknown_service(client):
    with pytest.raises(UnknownService):
        client.call_service("ghost", b"")


def test_remote_service_timeout(client):
    with pytest.raises(ServiceTimeout):
        client.call_service("slow", b"", timeout=0.1)


def test_remote_parameter_get_set(client):
    assert client.get_parameter("p/gain") == 10.0
    client.set_parameter("p/gain", 4.5)
    assert client.get_parameter("p/gain") == 4.5
    with pytest.raises(TypeMismatch):
        client.set_parameter("p/gain", 3)


def test_publish_from_client_reaches_local_subscriber(server, client):
    sub = server.bus.subscribe("t/data")
    client.publish("t/data", b"payload", 1.5)
    deadline = time.monotonic() + 2.0
    while len(sub) == 0 and time.monotonic() < deadline:
        time.sleep(0.005)
    assert sub.pop() == (b"payload", 1.5)


def test_subscribe_from_client_receives_local_publishes(server, client):
    got = []
    event = threading.Event()

    def on_msg(payload, stamp):
        got.append((payload, stamp))
        event.set()

    client.subscribe("t/data", on_msg)
    server.bus.publish("t/data", b"abc", 9.0)
    assert event.wait(2.0)
    assert got == [(b"abc", 9.0)]


def test_subscribe_unknown_topic_raises(client):
    with pytest.raises(UnknownTopic):
        client.subscribe("ghost/topic", lambda p, s: None)


def test_register_topic_then_publish_roundtrip(server, client):
    client.register_topic(TopicSpec("t/new", "S2", 10.0))
    sub = server.bus.subscribe("t/new")
    client.publish("t/new", b"x", 0.0)
    deadline = time.monotonic() + 2.0
    while len(sub) == 0 and time.monotonic() < deadline:
        time.sleep(0.005)
    assert len(sub) == 1


def test_read_your_write_across_bridge(server, client):
    """A client that subscribes to a topic sees its own publishes."""
    got = []
    event = threading.Event()
    client.subscribe("t/data", lambda p, s: (got.append(p), event.set()))
    client.publish("t/data", b"mine", 0.25)
    assert event.wait(2.0)
    assert got == [b"mine"]


def test_thousand_message_echo_roundtrip(server, client):
    """Soak: varied payload sizes survive framing across the socket."""
    payloads = [os.urandom(n % 300) for n in range(1000)]
    for p in payloads:
        assert client.call_service("echo", p) == b"<" + p + b">"


def test_two_clients_see_each_other(server):
    a = BusClient("127.0.0.1", server.port)
    b = BusClient("127.0.0.1", server.port)
    try:
        got = []
        event = threading.Event()
        b.subscribe("t/data", lambda p, s: (got.append(p), event.set()))
        a.publish("t/data", b"cross", 0.0)
        assert event.wait(2.0)
        assert got == [b"cross"]
    finally:
        a.close()
        b.close()
