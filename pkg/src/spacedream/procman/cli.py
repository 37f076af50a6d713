"""procman command line.

    procman start <config> [--socket PATH] [--oneshot]
    procman status [--socket PATH]
    procman restart <name> [--socket PATH]

`start` loads the config, brings every process up in dependency order and
then serves status/restart requests on a unix control socket until
interrupted. With --oneshot it tears everything down again right after
bring-up (useful for smoke checks). Exit code 0 iff all processes ready.
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import socket
import sys
import threading

from .config import ConfigError, load_config
from .supervisor import Supervisor, SupervisorError

DEFAULT_SOCKET = "procman.sock"


def _status_payload(supervisor: Supervisor) -> dict:
    return {
        "processes": [
            {
                "name": st.name,
                "state": st.state.value,
                "last_output_line": st.last_output_line,
                "restarts": st.restarts,
                "last_error_line": st.last_error_line,
            }
            for st in supervisor.status().values()
        ]
    }


def _print_status(payload: dict, out=sys.stdout) -> bool:
    all_ready = True
    for proc in payload["processes"]:
        line = f"{proc['name']:<20} {proc['state']:<10} restarts={proc['restarts']}"
        if proc.get("last_error_line"):
            line += f"  !{proc['last_error_line']}"
        print(line, file=out)
        if proc["state"] != "ready":
            all_ready = False
    return all_ready


def _serve(supervisor: Supervisor, sock_path: str, stop_event: threading.Event):
    server = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
    try:
        os.unlink(sock_path)
    except FileNotFoundError:
        pass
    server.bind(sock_path)
    server.listen(4)
    server.settimeout(0.5)
    try:
        while not stop_event.is_set():
            try:
                conn, _ = server.accept()
            except socket.timeout:
                continue
            with conn:
                data = conn.makefile("r").readline()
                if not data:
                    continue
                try:
                    request = json.loads(data)
                except json.JSONDecodeError:
                    conn.sendall(b'{"error": "bad request"}\n')
                    continue
                response = _handle_request(supervisor, request, stop_event)
                conn.sendall(json.dumps(response).encode() + b"\n")
    finally:
        server.close()
        try:
            os.unlink(sock_path)
        except FileNotFoundError:
            pass


def _handle_request(supervisor, request, stop_event) -> dict:
    op = request.get("op")
    if op == "status":
        return _status_payload(supervisor)
    if op == "restart":
        try:
            supervisor.restart(request.get("name", ""))
        except SupervisorError as exc:
            return {"error": str(exc)}
        return _status_payload(supervisor)
    if op == "shutdown":
        stop_event.set()
        return {"ok": True}
    return {"error": f"unknown op {op!r}"}


def _request(sock_path: str, payload: dict) -> dict:
    client = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
    client.settimeout(30.0)
    try:
        client.connect(sock_path)
    except (FileNotFoundError, ConnectionRefusedError):
        print(f"no supervisor at {sock_path}", file=sys.stderr)
        raise SystemExit(2)
    with client:
        client.sendall(json.dumps(payload).encode() + b"\n")
        data = client.makefile("r").readline()
    return json.loads(data)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="procman", description=__doc__.splitlines()[0])
    parser.add_argument("--socket", default=DEFAULT_SOCKET, help="control socket path")
    sub = parser.add_subparsers(dest="command", required=True)

    p_start = sub.add_parser("start", help="bring up all processes from a config")
    p_start.add_argument("config")
    p_start.add_argument("--oneshot", action="store_true",
                         help="tear down right after bring-up")

    sub.add_parser("status", help="show process states")

    p_restart = sub.add_parser("restart", help="restart a process and its dependents")
    p_restart.add_argument("name")

    sub.add_parser("shutdown", help="stop a running supervisor")

    args = parser.parse_args(argv)

    if args.command == "start":
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                graph = load_config(fh.read())
        except (OSError, ConfigError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        supervisor = Supervisor(graph)
        supervisor.start_all()
        all_ready = _print_status(_status_payload(supervisor))
        if args.oneshot or not len(graph):
            supervisor.stop_all()
            return 0 if all_ready else 1
        stop_event = threading.Event()
        signal.signal(signal.SIGTERM, lambda *_: stop_event.set())
        signal.signal(signal.SIGINT, lambda *_: stop_event.set())
        try:
            _serve(supervisor, args.socket, stop_event)
        finally:
            supervisor.stop_all()
        return 0 if all_ready else 1

    if args.command == "status":
        payload = _request(args.socket, {"op": "status"})
        return 0 if _print_status(payload) else 1

    if args.command == "restart":
        payload = _request(args.socket, {"op": "restart", "name": args.name})
        if "error" in payload:
            print(payload["error"], file=sys.stderr)
            return 2
        return 0 if _print_status(payload) else 1

    if args.command == "shutdown":
        _request(args.socket, {"op": "shutdown"})
        return 0

    return 2


if __name__ == "__main__":
    raise SystemExit(main())
