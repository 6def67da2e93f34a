"""Binary framing: ``u32 length | u8 type | payload``, all integers big-endian.

``length`` counts the type byte plus the payload. Ciphertext blobs travel as
opaque length-prefixed byte strings.
"""

from __future__ import annotations

import struct
from enum import IntEnum

from .arith import EncWord
from .gates import GateError
from .matcher import EncVector
from .protocol import (
    SESSION_ID_LEN,
    AuthInitMessage,
    ChallengeMessage,
    ErrorMessage,
    IdToken,
    Reason,
    RegisterMessage,
    RegisterOk,
    ResponseMessage,
    TerminateMessage,
    Verdict,
)

DEFAULT_MAX_MESSAGE = 256 * 1024 * 1024
_LEN = struct.Struct(">I")


class MsgType(IntEnum):
    REGISTER = 1
    REGISTER_OK = 2
    AUTH_INIT = 3
    CHALLENGE = 4
    RESPONSE = 5
    RESULT = 6
    TERMINATE = 7
    ERROR = 8


class FrameError(ValueError):
    """Malformed or oversized frame."""


class ConnectionClosed(EOFError):
    pass


class _Reader:
    def __init__(self, data: bytes):
        self.view = memoryview(data)
        self.off = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.off + n > len(self.view):
            raise FrameError("truncated payload")
        out = bytes(self.view[self.off : self.off + n])
        self.off += n
        return out

    def unpack(self, fmt: str):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size))

    def u8(self) -> int:
        return self.unpack(">B")[0]

    def u16(self) -> int:
        return self.unpack(">H")[0]

    def text(self) -> str:
        try:
            return self.take(self.u16()).decode()
        except UnicodeDecodeError as exc:
            raise FrameError("invalid utf-8") from exc

    def blob(self) -> bytes:
        (n,) = self.unpack(">Q")
        return self.take(n)

    def vector(self) -> EncVector:
        vec, self.off = EncVector.read_from(self.view, self.off)
        return vec

    def word(self) -> EncWord:
        word, self.off = EncWord.read_from(self.view, self.off)
        return word

    def done(self) -> None:
        if self.off != len(self.view):
            raise FrameError("trailing bytes in payload")


def _text(s: str) -> bytes:
    raw = s.encode()
    if len(raw) > 0xFFFF:
        raise FrameError("string too long")
    return struct.pack(">H", len(raw)) + raw


def _blob(b: bytes) -> bytes:
    return struct.pack(">Q", len(b)) + b


def _session_id(sid: bytes) -> bytes:
    if len(sid) != SESSION_ID_LEN:
        raise FrameError("session id must be 16 bytes")
    return sid


def encode_payload(msg) -> tuple[MsgType, bytes]:
    if isinstance(msg, RegisterMessage):
        body = (
            _text(msg.client_id)
            + _text(msg.backend)
            + _text(msg.params)
            + struct.pack(">HB", msg.n, msg.w)
            + _blob(msg.cloud_key)
            + msg.template.to_bytes()
        )
        return MsgType.REGISTER, body
    if isinstance(msg, RegisterOk):
        return MsgType.REGISTER_OK, _text(msg.client_id)
    if isinstance(msg, AuthInitMessage):
        return MsgType.AUTH_INIT, _text(msg.client_id) + msg.sample.to_bytes()
    if isinstance(msg, ChallengeMessage):
        return MsgType.CHALLENGE, _session_id(msg.session_id) + msg.token.to_bytes()
    if isinstance(msg, ResponseMessage):
        if msg.y < 0 or msg.y >> msg.token_bits:
            raise FrameError("response does not fit its token width")
        nbytes = (msg.token_bits + 7) // 8
        return MsgType.RESPONSE, (
            _session_id(msg.session_id) + struct.pack(">H", msg.token_bits) + msg.y.to_bytes(nbytes, "big")
        )
    if isinstance(msg, IdToken):
        return MsgType.RESULT, struct.pack(">B", msg.verdict) + _session_id(msg.session_id) + struct.pack(
            ">d", msg.issued_at
        )
    if isinstance(msg, TerminateMessage):
        sid = msg.session_id or b""
        return MsgType.TERMINATE, struct.pack(">BB", msg.reason, len(sid)) + sid + _text(msg.detail)
    if isinstance(msg, ErrorMessage):
        return MsgType.ERROR, _text(msg.detail)
    raise TypeError(f"cannot encode {type(msg).__name__}")


def decode_payload(kind: int, payload: bytes):
    r = _Reader(payload)
    try:
        msg = _decode(kind, r)
    except (GateError, ValueError) as exc:
        if isinstance(exc, FrameError):
            raise
        raise FrameError(str(exc)) from exc
    r.done()
    return msg


def _decode(kind: int, r: _Reader):
    if kind == MsgType.REGISTER:
        cid, backend, params = r.text(), r.text(), r.text()
        n, w = r.unpack(">HB")
        return RegisterMessage(cid, backend, params, n, w, r.blob(), r.vector())
    if kind == MsgType.REGISTER_OK:
        return RegisterOk(r.text())
    if kind == MsgType.AUTH_INIT:
        return AuthInitMessage(r.text(), r.vector())
    if kind == MsgType.CHALLENGE:
        return ChallengeMessage(r.take(SESSION_ID_LEN), r.word())
    if kind == MsgType.RESPONSE:
        sid = r.take(SESSION_ID_LEN)
        bits = r.u16()
        y = int.from_bytes(r.take((bits + 7) // 8), "big")
        if y >> bits:
            raise FrameError("response wider than its token width")
        return ResponseMessage(sid, y, bits)
    if kind == MsgType.RESULT:
        verdict = r.u8()
        if verdict not in (0, 1):
            raise FrameError(f"bad verdict byte {verdict:#04x}")
        sid = r.take(SESSION_ID_LEN)
        (issued,) = r.unpack(">d")
        return IdToken(Verdict(verdict), sid, issued)
    if kind == MsgType.TERMINATE:
        code, slen = r.unpack(">BB")
        try:
            reason = Reason(code)
        except ValueError as exc:
            raise FrameError(f"unknown termination code {code}") from exc
        sid = r.take(slen)
        return TerminateMessage(reason, sid, r.text())
    if kind == MsgType.ERROR:
        return ErrorMessage(r.text())
    raise FrameError(f"unknown message type {kind}")


def encode_frame(msg, max_size: int = DEFAULT_MAX_MESSAGE) -> bytes:
    kind, payload = encode_payload(msg)
    length = len(payload) + 1
    if length > max_size:
        raise FrameError(f"message of {length} bytes exceeds limit {max_size}")
    return _LEN.pack(length) + bytes([kind]) + payload


def decode_frame(data: bytes, max_size: int = DEFAULT_MAX_MESSAGE):
    if len(data) < 5:
        raise FrameError("frame shorter than its header")
    (length,) = _LEN.unpack_from(data)
    if length < 1 or length > max_size:
        raise FrameError(f"bad frame length {length}")
    if len(data) != 4 + length:
        raise FrameError("frame length does not match header")
    return decode_payload(data[4], data[5:])


def _recv_exact(sock, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(min(n - len(buf), 1 << 20))
        if not chunk:
            raise ConnectionClosed("peer closed the connection")
        buf += chunk
    return bytes(buf)


def read_frame(sock, max_size: int = DEFAULT_MAX_MESSAGE) -> bytes:
    """Read one raw frame from a socket. Raises ``ConnectionClosed`` on clean EOF."""
    head = sock.recv(4)
    if not head:
        raise ConnectionClosed("peer closed the connection")
    if len(head) < 4:
        head += _recv_exact(sock, 4 - len(head))
    (length,) = _LEN.unpack(head)
    if length < 1 or length > max_size:
        raise FrameError(f"bad frame length {length}")
    return head + _recv_exact(sock, length)


def send_message(sock, msg, max_size: int = DEFAULT_MAX_MESSAGE) -> int:
    frame = encode_frame(msg, max_size)
    sock.sendall(frame)
    return len(frame)


def recv_message(sock, max_size: int = DEFAULT_MAX_MESSAGE):
    return decode_frame(read_frame(sock, max_size), max_size)
