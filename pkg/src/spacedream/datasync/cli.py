"""Transfer command line tools.

    datasync-send --root tx/ --dest HOST:PORT [--config FILE] [--rate BITS]
    datasync-recv --listen HOST:PORT --out rx/
    datasync-channel --listen HOST:PORT --forward HOST:PORT [--loss P] ...

The sender walks --root, fragments new file versions and streams UDP
packets at the configured rate. The receiver reassembles into
out/<generation>/<name> with a <name>.holes report next to anything that
still has gaps. The channel tool relays packets between the two through
the seeded loss/corruption/reorder/bandwidth model, standing in for the
radio link during desk testing.

All three run on wall time and are meant to be composable:
send -> channel -> recv over localhost mirrors the simulated pipeline.
"""

from __future__ import annotations

import argparse
import heapq
import signal
import socket
import sys
import threading
import time
from dataclasses import replace

from .channel import ChannelSim
from .receiver import Receiver
from .sender import Sender
from .syncconfig import SyncConfigError, SyncSettings, load_sync_config
from .watcher import RootMissing

MAX_DATAGRAM = 65535


def _addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}")
    return host, int(port)


def _install_stop_handler(stop: threading.Event) -> None:
    # signal handlers only work in the main thread; tests drive these
    # entry points from worker threads and use --duration instead
    if threading.current_thread() is not threading.main_thread():
        return
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())


# ---------------------------------------------------------------------------
# sender


def send_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="datasync-send",
        description="stream files from a folder tree over UDP")
    parser.add_argument("--root", required=True, help="transmission root")
    parser.add_argument("--dest", type=_addr, default=("127.0.0.1", 47100),
                        metavar="HOST:PORT")
    parser.add_argument("--config", help="INI transfer config")
    parser.add_argument("--rate", type=float, default=None,
                        help="link rate in bits/s (overrides config)")
    parser.add_argument("--generation", type=int, default=0,
                        help="boot generation stamped into every fragment")
    parser.add_argument("--duration", type=float, default=None,
                        help="stop after this many seconds")
    parser.add_argument("--exit-idle", action="store_true",
                        help="exit once every queued fragment is sent")
    parser.add_argument("--no-recycle", action="store_true",
                        help="drop fragments after their resend budget")
    parser.add_argument("--poll-interval", type=float, default=0.02)
    args = parser.parse_args(argv)

    try:
        settings = load_sync_config(args.config) if args.config else SyncSettings()
        if args.rate is not None:
            settings = replace(settings, rate_bits=args.rate)
    except SyncConfigError as exc:
        print(f"datasync-send: {exc}", file=sys.stderr)
        return 2

    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    try:
        try:
            sender = Sender(args.root, settings,
                            lambda pkt: sock.sendto(pkt, args.dest),
                            generation=args.generation,
                            recycle_retired=not args.no_recycle)
        except RootMissing as exc:
            print(f"datasync-send: no such root: {exc}", file=sys.stderr)
            return 2

        stop = threading.Event()
        _install_stop_handler(stop)
        start = time.monotonic()
        while not stop.is_set():
            now = time.monotonic() - start
            if args.duration is not None and now >= args.duration:
                break
            sender.tick(now)
            if args.exit_idle and sender.files_queued > 0 and sender.idle:
                break
            time.sleep(args.poll_interval)
    finally:
        sock.close()
    print(f"files={sender.files_queued} packets={sender.packets_sent} "
          f"bytes={sender.bytes_sent}")
    return 0


# ---------------------------------------------------------------------------
# receiver


def recv_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="datasync-recv",
        description="reassemble fragment packets into an output tree")
    parser.add_argument("--listen", type=_addr, required=True,
                        metavar="HOST:PORT")
    parser.add_argument("--out", required=True, help="output root")
    parser.add_argument("--idle-timeout", type=float, default=None,
                        help="exit after this long without packets")
    parser.add_argument("--duration", type=float, default=None)
    parser.add_argument("--flush-period", type=float, default=1.0,
                        help="how often partial results hit the disk")
    args = parser.parse_args(argv)

    receiver = Receiver()
    stop = threading.Event()
    _install_stop_handler(stop)

    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    try:
        sock.bind(args.listen)
        sock.settimeout(0.1)
        start = time.monotonic()
        last_rx = None
        last_flush = start
        dirty = False
        while not stop.is_set():
            now = time.monotonic()
            if args.duration is not None and now - start >= args.duration:
                break
            if (args.idle_timeout is not None and last_rx is not None
                    and now - last_rx >= args.idle_timeout):
                break
            try:
                data, _peer = sock.recvfrom(MAX_DATAGRAM)
            except socket.timeout:
                pass
            else:
                receiver.ingest_packet(data)
                last_rx = time.monotonic()
                dirty = True
            if dirty and time.monotonic() - last_flush >= args.flush_period:
                receiver.write_out(args.out)
                last_flush = time.monotonic()
                dirty = False
    finally:
        sock.close()
    receiver.write_out(args.out)

    complete = sum(m.complete for m in receiver.manifests.values())
    s = receiver.stats
    print(f"packets={s.packets} fragments={s.fragments} rejected={s.rejected} "
          f"files={len(receiver.manifests)} complete={complete}")
    return 0


# ---------------------------------------------------------------------------
# channel relay


def channel_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="datasync-channel",
        description="UDP relay through a seeded lossy-channel model")
    parser.add_argument("--listen", type=_addr, required=True,
                        metavar="HOST:PORT")
    parser.add_argument("--forward", type=_addr, required=True,
                        metavar="HOST:PORT")
    parser.add_argument("--loss", type=float, default=0.0)
    parser.add_argument("--corrupt", type=float, default=0.0)
    parser.add_argument("--reorder", type=int, default=0,
                        help="reorder buffer window, 0 = in order")
    parser.add_argument("--bandwidth", type=float, default=0.0,
                        help="bits/s, 0 = unlimited")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--duration", type=float, default=None)
    args = parser.parse_args(argv)

    try:
        chan = ChannelSim(loss=args.loss, corrupt=args.corrupt,
                          reorder_window=args.reorder,
                          bandwidth_bits=args.bandwidth or None,
                          seed=args.seed)
    except ValueError as exc:
        print(f"datasync-channel: {exc}", file=sys.stderr)
        return 2

    stop = threading.Event()
    _install_stop_handler(stop)
    pending: list[tuple[float, int, bytes]] = []  # (deliver_at, seq, packet)
    seq = 0

    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    out = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    try:
        sock.bind(args.listen)
        start = time.monotonic()
        while not stop.is_set():
            now = time.monotonic() - start
            if args.duration is not None and now >= args.duration:
                break
            while pending and pending[0][0] <= now:
                _, _, packet = heapq.heappop(pending)
                out.sendto(packet, args.forward)
            wait = 0.05
            if pending:
                wait = max(0.0, min(wait, pending[0][0] - now))
            sock.settimeout(wait or 0.001)
            try:
                data, _peer = sock.recvfrom(MAX_DATAGRAM)
            except socket.timeout:
                continue
            for when, packet in chan.send(data, now):
                heapq.heappush(pending, (when, seq, packet))
                seq += 1
        # drain: model delays collapse at shutdown rather than losing data
        now = time.monotonic() - start
        for when, packet in chan.flush(now):
            heapq.heappush(pending, (when, seq, packet))
            seq += 1
        while pending:
            _, _, packet = heapq.heappop(pending)
            out.sendto(packet, args.forward)
    finally:
        sock.close()
        out.close()
    s = chan.stats
    print(f"sent={s.sent} dropped={s.dropped} corrupted={s.corrupted} "
          f"delivered={s.delivered}")
    return 0


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    """Dispatch for `python -m spacedream.datasync.cli <send|recv|channel>`."""
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in ("send", "recv", "channel"):
        print("usage: cli {send|recv|channel} [options]", file=sys.stderr)
        return 2
    entry = {"send": send_main, "recv": recv_main, "channel": channel_main}
    return entry[argv[0]](argv[1:])


if __name__ == "__main__":
    sys.exit(main())
