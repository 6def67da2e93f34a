"""Client and server state machines for the biometric challenge-response protocol.

Registration sends the cloud key and the encrypted template. An
authentication then runs four steps:

1. client sends the encrypted sample;
2. server evaluates the match bit ``b`` under encryption, draws fresh
   tokens ``r0 != r1`` and returns ``y_enc = b ? Enc(r1) : Enc(r0)``;
3. client decrypts and returns ``y``;
4. server accepts on ``y == r1``, rejects on ``y == r0`` and terminates
   the session otherwise.
"""

from __future__ import annotations

import os
import secrets
import struct
import threading
import time
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Callable

from . import arith
from .arith import EncWord
from .config import Config
from .gates import (
    BackendHandle,
    CloudKey,
    DecryptionError,
    EncBit,
    GateError,
    KeyTriple,
    MalformedBlobError,
)
from .matcher import BiometricVector, DimensionMismatchError, EncVector, encrypt_vector, match_f

SESSION_ID_LEN = 16


class Verdict(IntEnum):
    REJECT = 0
    ACCEPT = 1


class Stage(Enum):
    AWAIT_RESPONSE = "await-response"
    DONE = "done"


class Reason(IntEnum):
    UNKNOWN_CLIENT = 1
    TOKEN_MISMATCH = 2
    SESSION_EXPIRED = 3
    UNKNOWN_SESSION = 4
    STAGE_VIOLATION = 5
    MALFORMED = 6
    BACKEND_MISMATCH = 7
    DUPLICATE_CLIENT = 8
    DIMENSION_MISMATCH = 9
    DECRYPTION_FAILURE = 10
    CONNECTION_LOST = 11
    INTERNAL = 12

    @property
    def label(self) -> str:
        return self.name.lower().replace("_", "-")


@dataclass(frozen=True)
class Termination:
    reason: Reason
    detail: str = ""
    session_id: bytes | None = None

    def __str__(self) -> str:
        return f"TERMINATED({self.reason.label})"


class ProtocolTerminated(Exception):
    def __init__(self, reason: Reason, detail: str = "", session_id: bytes | None = None):
        super().__init__(f"{reason.label}: {detail}" if detail else reason.label)
        self.termination = Termination(reason, detail, session_id)

    @property
    def reason(self) -> Reason:
        return self.termination.reason


# -- messages -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RegisterMessage:
    client_id: str
    backend: str
    params: str
    n: int
    w: int
    cloud_key: bytes = field(repr=False)
    template: EncVector = field(repr=False)


@dataclass(frozen=True)
class RegisterOk:
    client_id: str


@dataclass(frozen=True, eq=False)
class AuthInitMessage:
    client_id: str
    sample: EncVector = field(repr=False)


@dataclass(frozen=True, eq=False)
class ChallengeMessage:
    session_id: bytes
    token: EncWord = field(repr=False)


@dataclass(frozen=True)
class ResponseMessage:
    session_id: bytes
    y: int
    token_bits: int


@dataclass(frozen=True)
class IdToken:
    verdict: Verdict
    session_id: bytes
    issued_at: float


@dataclass(frozen=True)
class TerminateMessage:
    reason: Reason
    session_id: bytes = b""
    detail: str = ""


@dataclass(frozen=True)
class ErrorMessage:
    detail: str


# -- party state ----------------------------------------------------------------


@dataclass(eq=False)
class ClientIdentity:
    client_id: str
    keys: KeyTriple = field(repr=False)
    template: BiometricVector | None = field(default=None, repr=False)


@dataclass(frozen=True, eq=False)
class ServerRecord:
    client_id: str
    cloud_key: CloudKey = field(repr=False)
    template: EncVector = field(repr=False)

    @property
    def backend(self) -> str:
        return self.cloud_key.backend

    def to_bytes(self) -> bytes:
        cid = self.client_id.encode()
        ck = self.cloud_key.to_bytes()
        return (
            struct.pack(">H", len(cid))
            + cid
            + struct.pack(">Q", len(ck))
            + ck
            + self.template.to_bytes()
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> ServerRecord:
        view = memoryview(data)
        try:
            (nlen,) = struct.unpack_from(">H", view)
            cid = bytes(view[2 : 2 + nlen]).decode()
            (cklen,) = struct.unpack_from(">Q", view, 2 + nlen)
            off = 10 + nlen
            ck = CloudKey.from_bytes(bytes(view[off : off + cklen]))
            template, end = EncVector.read_from(view, off + cklen)
        except (struct.error, UnicodeDecodeError) as exc:
            raise MalformedBlobError("bad server record") from exc
        if end != len(data):
            raise MalformedBlobError("trailing bytes in server record")
        return cls(cid, ck, template)


@dataclass(eq=False)
class SessionState:
    session_id: bytes
    client_id: str
    r0: int | None
    r1: int | None
    stage: Stage
    created_at: float


# -- protocol steps -------------------------------------------------------------


def _check_vector(vec: BiometricVector, cfg: Config) -> None:
    if vec.n != cfg.n or vec.width != cfg.w:
        raise DimensionMismatchError(f"vector is ({vec.n}, {vec.width}), expected ({cfg.n}, {cfg.w})")


def client_register(identity: ClientIdentity, cfg: Config) -> RegisterMessage:
    """Encrypt the template and build the registration; the plaintext template is dropped."""
    if identity.template is None:
        raise ValueError("identity carries no template")
    _check_vector(identity.template, cfg)
    sk, ck, params = identity.keys
    t_enc = encrypt_vector(sk, identity.template)
    identity.template = None
    return RegisterMessage(identity.client_id, ck.backend, params, cfg.n, cfg.w, ck.to_bytes(), t_enc)


def client_initiate(identity: ClientIdentity, sample: BiometricVector, cfg: Config) -> AuthInitMessage:
    _check_vector(sample, cfg)
    return AuthInitMessage(identity.client_id, encrypt_vector(identity.keys.secret_key, sample))


def construct_token(h: BackendHandle, b: EncBit, r0: int, r1: int, bits: int) -> EncWord:
    """Encrypted ``b ? r1 : r0``, one MUX per token bit.

    Both tokens are encrypted afresh with the public part of the cloud key. A
    noiseless constant would make the MUX collapse to a copy of ``b`` (or
    its negation), and the resulting ciphertext pattern would reveal the
    token the client is not supposed to learn.
    """
    out = []
    for i in range(bits):
        t = h.encrypt_public((r1 >> i) & 1)
        f = h.encrypt_public((r0 >> i) & 1)
        out.append(h.mux(b, t, f))
    return EncWord(tuple(out))


def draw_tokens(bits: int, randbits: Callable[[int], int] = secrets.randbits) -> tuple[int, int]:
    r0 = randbits(bits)
    r1 = randbits(bits)
    while r1 == r0:
        r1 = randbits(bits)
    return r0, r1


def server_challenge(
    h: BackendHandle,
    record: ServerRecord,
    sample: EncVector,
    cfg: Config,
    clock: Callable[[], float] = time.time,
    randbits: Callable[[int], int] = secrets.randbits,
    workers: int = 1,
) -> tuple[SessionState, ChallengeMessage]:
    if sample.n != record.template.n or sample.w != record.template.w:
        raise ProtocolTerminated(Reason.DIMENSION_MISMATCH, "sample does not match template shape")
    try:
        b = match_f(h, sample, record.template, cfg.match, workers)
    except DimensionMismatchError as exc:
        raise ProtocolTerminated(Reason.DIMENSION_MISMATCH, str(exc)) from exc
    except GateError as exc:
        raise ProtocolTerminated(Reason.MALFORMED, str(exc)) from exc
    r0, r1 = draw_tokens(cfg.token_bits, randbits)
    y_enc = construct_token(h, b, r0, r1, cfg.token_bits)
    session = SessionState(
        session_id=os.urandom(SESSION_ID_LEN),
        client_id=record.client_id,
        r0=r0,
        r1=r1,
        stage=Stage.AWAIT_RESPONSE,
        # the TTL runs from issue, not from receipt of the sample
        created_at=clock(),
    )
    return session, ChallengeMessage(session.session_id, y_enc)


def client_respond(identity: ClientIdentity, challenge: ChallengeMessage) -> ResponseMessage:
    """Decrypt the matching token; raises instead of responding when decryption fails."""
    try:
        y = arith.decrypt_word(identity.keys.secret_key, challenge.token)
    except DecryptionError as exc:
        raise ProtocolTerminated(Reason.DECRYPTION_FAILURE, str(exc), challenge.session_id) from exc
    return ResponseMessage(challenge.session_id, y, challenge.token.width)


def _destroy(session: SessionState) -> None:
    session.stage = Stage.DONE
    session.r0 = session.r1 = None


def server_verify(
    session: SessionState, y: int, now: float | None = None, ttl: float | None = None
) -> IdToken:
    """Check ``y`` against the session tokens. The session is spent in every outcome."""
    sid = session.session_id
    if session.stage is not Stage.AWAIT_RESPONSE:
        raise ProtocolTerminated(Reason.STAGE_VIOLATION, "session already completed", sid)
    now = time.time() if now is None else now
    r0, r1 = session.r0, session.r1
    _destroy(session)
    if ttl is not None and now - session.created_at > ttl:
        raise ProtocolTerminated(Reason.SESSION_EXPIRED, "", sid)
    if y == r1:
        return IdToken(Verdict.ACCEPT, sid, now)
    if y == r0:
        return IdToken(Verdict.REJECT, sid, now)
    raise ProtocolTerminated(Reason.TOKEN_MISMATCH, "response matches neither token", sid)


# -- parties --------------------------------------------------------------------


class Client:
    def __init__(self, identity: ClientIdentity, cfg: Config):
        self.identity = identity
        self.cfg = cfg

    @property
    def client_id(self) -> str:
        return self.identity.client_id

    def register(self) -> RegisterMessage:
        return client_register(self.identity, self.cfg)

    def initiate(self, sample: BiometricVector) -> AuthInitMessage:
        return client_initiate(self.identity, sample, self.cfg)

    def respond(self, challenge: ChallengeMessage) -> ResponseMessage:
        return client_respond(self.identity, challenge)


class Server:
    """Server side: record store, cloud-key cache and the session table.

    ``handle`` maps one inbound message to one reply and is safe to call from
    several connection threads at once.
    """

    def __init__(
        self,
        cfg: Config,
        store=None,
        clock: Callable[[], float] = time.time,
        randbits: Callable[[int], int] = secrets.randbits,
        workers: int = 1,
    ):
        if store is None:
            from .store import MemoryRecordStore

            store = MemoryRecordStore()
        self.cfg = cfg
        self.store = store
        self.clock = clock
        self.randbits = randbits
        self.workers = workers
        self._sessions: dict[bytes, SessionState] = {}
        self._finished: dict[bytes, float] = {}
        self._lock = threading.Lock()
        self._register_lock = threading.Lock()
        self._handles: dict[str, BackendHandle] = {}

    # registration

    def register(self, msg: RegisterMessage) -> RegisterOk:
        cfg = self.cfg
        if msg.backend != cfg.backend:
            raise ProtocolTerminated(Reason.BACKEND_MISMATCH, f"server runs {cfg.backend}")
        if (msg.n, msg.w) != (cfg.n, cfg.w) or (msg.template.n, msg.template.w) != (cfg.n, cfg.w):
            raise ProtocolTerminated(Reason.DIMENSION_MISMATCH, f"server expects n={cfg.n}, w={cfg.w}")
        try:
            ck = CloudKey.from_bytes(msg.cloud_key)
        except MalformedBlobError as exc:
            raise ProtocolTerminated(Reason.MALFORMED, str(exc)) from exc
        if ck.backend != msg.backend or msg.template.words[0][0].key_id != ck.key_id:
            raise ProtocolTerminated(Reason.MALFORMED, "template not encrypted under the cloud key")
        record = ServerRecord(msg.client_id, ck, msg.template)
        with self._register_lock:
            if self.store.get(msg.client_id) is not None:
                raise ProtocolTerminated(Reason.DUPLICATE_CLIENT, msg.client_id)
            try:
                self.store.put(record)
            except KeyError as exc:
                raise ProtocolTerminated(Reason.DUPLICATE_CLIENT, msg.client_id) from exc
            except ValueError as exc:
                raise ProtocolTerminated(Reason.MALFORMED, str(exc)) from exc
        return RegisterOk(msg.client_id)

    def _handle_for(self, record: ServerRecord) -> BackendHandle:
        h = self._handles.get(record.client_id)
        if h is None or h.key_id != record.cloud_key.key_id:
            h = BackendHandle(record.cloud_key)
            self._handles[record.client_id] = h
        return h

    # authentication

    def challenge(self, msg: AuthInitMessage) -> ChallengeMessage:
        record = self.store.get(msg.client_id)
        if record is None:
            raise ProtocolTerminated(Reason.UNKNOWN_CLIENT, msg.client_id)
        if msg.sample.words[0][0].key_id != record.cloud_key.key_id:
            raise ProtocolTerminated(Reason.MALFORMED, "sample not encrypted under the registered key")
        self.expire()
        session, reply = server_challenge(
            self._handle_for(record),
            record,
            msg.sample,
            self.cfg,
            clock=self.clock,
            randbits=self.randbits,
            workers=self.workers,
        )
        with self._lock:
            self._sessions[session.session_id] = session
        return reply

    def verify(self, msg: ResponseMessage) -> IdToken:
        sid = msg.session_id
        with self._lock:
            session = self._sessions.pop(sid, None)
            if session is None:
                if sid in self._finished:
                    raise ProtocolTerminated(Reason.STAGE_VIOLATION, "session already completed", sid)
                raise ProtocolTerminated(Reason.UNKNOWN_SESSION, "", sid)
            self._finished[sid] = self.clock()
        return server_verify(session, msg.y, now=self.clock(), ttl=self.cfg.ttl)

    def abort(self, session_id: bytes) -> None:
        """Destroy a pending session (connection lost or client gave up)."""
        with self._lock:
            session = self._sessions.pop(session_id, None)
            if session is not None:
                _destroy(session)
                self._finished[session_id] = self.clock()

    def expire(self) -> None:
        now = self.clock()
        with self._lock:
            for sid, s in list(self._sessions.items()):
                if now - s.created_at > self.cfg.ttl:
                    del self._sessions[sid]
                    _destroy(s)
                    self._finished[sid] = now
            for sid, t in list(self._finished.items()):
                if now - t > self.cfg.ttl:
                    del self._finished[sid]

    def pending_sessions(self) -> list[SessionState]:
        with self._lock:
            return list(self._sessions.values())

    # dispatch

    def handle(self, msg):
        try:
            if isinstance(msg, RegisterMessage):
                return self.register(msg)
            if isinstance(msg, AuthInitMessage):
                return self.challenge(msg)
            if isinstance(msg, ResponseMessage):
                return self.verify(msg)
            return ErrorMessage(f"unexpected message {type(msg).__name__}")
        except ProtocolTerminated as exc:
            t = exc.termination
            return TerminateMessage(t.reason, t.session_id or b"", t.detail)

    request = handle


def run_protocol(client: Client, channel, sample: BiometricVector) -> IdToken | Termination:
    """Drive one authentication over ``channel`` (anything with ``request(msg) -> reply``)."""
    try:
        try:
            init = client.initiate(sample)
        except DimensionMismatchError as exc:
            return Termination(Reason.DIMENSION_MISMATCH, str(exc))
        reply = channel.request(init)
        if isinstance(reply, TerminateMessage):
            return Termination(reply.reason, reply.detail, reply.session_id or None)
        if not isinstance(reply, ChallengeMessage):
            return Termination(Reason.MALFORMED, f"unexpected reply {type(reply).__name__}")
        try:
            response = client.respond(reply)
        except ProtocolTerminated as exc:
            return exc.termination
        result = channel.request(response)
        if isinstance(result, IdToken):
            return result
        if isinstance(result, TerminateMessage):
            return Termination(result.reason, result.detail, result.session_id or None)
        return Termination(Reason.MALFORMED, f"unexpected reply {type(result).__name__}")
    finally:
        close = getattr(channel, "close", None)
        if close is not None:
            close()
