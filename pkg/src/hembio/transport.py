"""Channels between client and server, and the TCP daemon.

A channel exposes ``request(msg) -> reply`` and ``close()``. Every channel is
one connection and therefore hosts at most one pending session: closing it
destroys whatever session it left open on the server.
"""

from __future__ import annotations

import logging
import socket
import socketserver
import threading
import time
from typing import Callable

from . import wire
from .protocol import ChallengeMessage, ErrorMessage, IdToken, ResponseMessage, Server, TerminateMessage

log = logging.getLogger("hembio.server")


def parse_address(text: str, default_port: int = 7878) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep:
        return text, default_port
    return host or "127.0.0.1", int(port)


class LoopbackChannel:
    """In-process channel that still pushes every message through the wire codec.

    ``transcript`` keeps ``(direction, frame)`` pairs for everything the
    server receives or sends. ``tamper`` may rewrite server replies before
    the client decodes them.
    """

    def __init__(self, server: Server, tamper: Callable | None = None, max_size: int | None = None):
        self.server = server
        self.tamper = tamper
        self.max_size = max_size or server.cfg.max_message
        self.transcript: list[tuple[str, bytes]] = []
        self._pending: bytes | None = None

    def request(self, msg):
        frame = wire.encode_frame(msg, self.max_size)
        self.transcript.append(("in", frame))
        try:
            inbound = wire.decode_frame(frame, self.max_size)
        except wire.FrameError as exc:
            reply = ErrorMessage(str(exc))
        else:
            reply = self.server.handle(inbound)
        self._track(reply)
        out = wire.encode_frame(reply, self.max_size)
        self.transcript.append(("out", out))
        reply = wire.decode_frame(out, self.max_size)
        if self.tamper is not None:
            reply = self.tamper(reply)
        return reply

    def _track(self, reply) -> None:
        if isinstance(reply, ChallengeMessage):
            self._pending = reply.session_id
        elif isinstance(reply, (IdToken, TerminateMessage)):
            self._pending = None

    def close(self) -> None:
        if self._pending is not None:
            self.server.abort(self._pending)
            self._pending = None

    def server_visible(self) -> bytes:
        return b"".join(f for _, f in self.transcript)


class TcpChannel:
    def __init__(self, address: tuple[str, int], timeout: float | None = None, max_size: int = wire.DEFAULT_MAX_MESSAGE):
        self.address = address
        self.timeout = timeout
        self.max_size = max_size
        self._sock: socket.socket | None = None

    def _connect(self) -> socket.socket:
        if self._sock is None:
            self._sock = socket.create_connection(self.address, timeout=self.timeout)
        return self._sock

    def request(self, msg):
        sock = self._connect()
        wire.send_message(sock, msg, self.max_size)
        return wire.recv_message(sock, self.max_size)

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class _Handler(socketserver.BaseRequestHandler):
    server: ProtocolTCPServer

    def handle(self) -> None:
        proto = self.server.protocol
        max_size = proto.cfg.max_message
        sock = self.request
        peer = "%s:%s" % self.client_address[:2]
        pending: bytes | None = None
        try:
            while True:
                try:
                    frame = wire.read_frame(sock, max_size)
                    msg = wire.decode_frame(frame, max_size)
                except wire.ConnectionClosed:
                    return
                except wire.FrameError as exc:
                    log.warning("%s malformed frame: %s", peer, exc)
                    self._send(ErrorMessage(f"malformed frame: {exc}"), max_size)
                    return
                t0 = time.perf_counter()
                reply = proto.handle(msg)
                log.info(
                    "%s %s -> %s in %.3f s",
                    peer,
                    type(msg).__name__,
                    type(reply).__name__,
                    time.perf_counter() - t0,
                )
                if isinstance(reply, ChallengeMessage):
                    pending = reply.session_id
                elif isinstance(msg, ResponseMessage):
                    pending = None
                self._send(reply, max_size)
                if isinstance(reply, ErrorMessage):
                    return
        except OSError as exc:
            log.info("%s connection lost: %s", peer, exc)
        finally:
            if pending is not None:
                proto.abort(pending)
                log.info("%s session dropped before completion", peer)

    def _send(self, msg, max_size: int) -> None:
        try:
            wire.send_message(self.request, msg, max_size)
        except OSError:
            pass


class ProtocolTCPServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], protocol: Server):
        self.protocol = protocol
        super().__init__(address, _Handler)


def start_server(protocol: Server, host: str = "127.0.0.1", port: int = 0) -> tuple[ProtocolTCPServer, threading.Thread]:
    """Serve in a background thread; returns the server (``server_address`` has the real port)."""
    srv = ProtocolTCPServer((host, port), protocol)
    thread = threading.Thread(target=srv.serve_forever, name="hembio-serve", daemon=True)
    thread.start()
    return srv, thread


def serve(address: tuple[str, int], protocol: Server) -> None:
    with ProtocolTCPServer(address, protocol) as srv:
        log.info("listening on %s:%s", *srv.server_address[:2])
        srv.serve_forever()
