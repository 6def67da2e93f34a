"""Homomorphic boolean gates behind one interface.

Two backends share the :class:`BackendHandle` API:

``fhe``
    TFHE gate bootstrapping through the ``hembio_tfhe`` extension (tfhe-rs
    boolean API). Every binary gate and MUX costs one bootstrap; NOT is free.
``clear``
    A cleartext mock. Each bit is stored XOR-masked with a keyed hash of a
    random nonce, so serialized ciphertexts of equal bits differ and never
    expose plaintext bytes. It offers no security: the cloud key can unmask.

Gates fold noiseless constants (see :meth:`BackendHandle.constant`) before
reaching the backend, so both backends evaluate the same reduced circuit.
"""

from __future__ import annotations

import hashlib
import os
import secrets
import struct
from dataclasses import dataclass, field
from typing import Any, NamedTuple

MAGIC = b"HEMB\r\n\x1a\n"
FORMAT_VERSION = 1

KIND_SECRET_KEY = 1
KIND_CLOUD_KEY = 2
KIND_ENCBIT = 3

BACKENDS = ("clear", "fhe")
_BACKEND_CODES = {"clear": 0, "fhe": 1}
_BACKEND_NAMES = {v: k for k, v in _BACKEND_CODES.items()}

# name -> (tfhe-rs parameter set, estimated security bits)
PARAMETER_SETS = {
    "default": ("default", 128),
    "test": ("tfhe-lib", 120),
}

KEY_ID_LEN = 16
_HEADER = struct.Struct(">8sHB")
_FLAG_CONST = 0x01
_FLAG_CONST_ONE = 0x02


class GateError(Exception):
    pass


class KeyMismatchError(GateError):
    """Operands were produced under different keys or backends."""


class DecryptionError(GateError):
    """Decryption failed (wrong key or unusable ciphertext)."""


class MalformedBlobError(GateError, ValueError):
    pass


class UnsupportedParametersError(GateError, ValueError):
    pass


class BackendUnavailableError(GateError, RuntimeError):
    pass


def _native():
    try:
        import hembio_tfhe
    except ImportError as exc:  # pragma: no cover - depends on the install
        raise BackendUnavailableError(
            "the fhe backend needs the hembio_tfhe extension (pip install ./native)"
        ) from exc
    return hembio_tfhe


def fhe_available() -> bool:
    try:
        _native()
    except BackendUnavailableError:
        return False
    return True


# ---------------------------------------------------------------------------
# Keys
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SecretKey:
    backend: str
    params: str
    key_id: bytes
    material: Any = field(repr=False)

    def to_bytes(self) -> bytes:
        if self.backend == "clear":
            body = self.material
        else:
            body = bytes(self.material.to_bytes())
        return _key_header(KIND_SECRET_KEY, self) + body

    @classmethod
    def from_bytes(cls, data: bytes) -> SecretKey:
        backend, params, key_id, body = _parse_key(data, KIND_SECRET_KEY)
        if backend == "clear":
            if len(body) != 32:
                raise MalformedBlobError("bad clear secret key")
            return cls(backend, params, key_id, bytes(body))
        try:
            material = _native().SecretKey.from_bytes(bytes(body))
        except ValueError as exc:
            raise MalformedBlobError(str(exc)) from exc
        return cls(backend, params, key_id, material)


@dataclass(frozen=True, eq=False)
class CloudKey:
    """Gate-evaluation key plus a public encryption key; safe to hand to the server."""

    backend: str
    params: str
    key_id: bytes
    blob: bytes = field(repr=False)

    def to_bytes(self) -> bytes:
        return _key_header(KIND_CLOUD_KEY, self) + self.blob

    @classmethod
    def from_bytes(cls, data: bytes) -> CloudKey:
        backend, params, key_id, body = _parse_key(data, KIND_CLOUD_KEY)
        return cls(backend, params, key_id, bytes(body))


class KeyTriple(NamedTuple):
    secret_key: SecretKey
    cloud_key: CloudKey
    params: str


def _key_header(kind: int, key) -> bytes:
    name = key.params.encode("ascii")
    return (
        _HEADER.pack(MAGIC, FORMAT_VERSION, kind)
        + bytes([_BACKEND_CODES[key.backend], len(name)])
        + name
        + key.key_id
    )


def _parse_header(data: bytes, kind: int) -> memoryview:
    view = memoryview(data)
    if len(view) < _HEADER.size:
        raise MalformedBlobError("truncated blob")
    magic, version, got = _HEADER.unpack_from(view)
    if magic != MAGIC:
        raise MalformedBlobError("bad magic")
    if version != FORMAT_VERSION:
        raise MalformedBlobError(f"unsupported blob version {version}")
    if got != kind:
        raise MalformedBlobError(f"expected blob kind {kind}, got {got}")
    return view[_HEADER.size :]


def _parse_key(data: bytes, kind: int):
    view = _parse_header(data, kind)
    try:
        backend = _BACKEND_NAMES[view[0]]
        nlen = view[1]
        params = bytes(view[2 : 2 + nlen]).decode("ascii")
    except (IndexError, KeyError, UnicodeDecodeError) as exc:
        raise MalformedBlobError("bad key header") from exc
    off = 2 + nlen
    key_id = bytes(view[off : off + KEY_ID_LEN])
    if len(key_id) != KEY_ID_LEN or params not in PARAMETER_SETS:
        raise MalformedBlobError("bad key header")
    return backend, params, key_id, view[off + KEY_ID_LEN :]


def _eval_seed(seed: bytes) -> bytes:
    return hashlib.blake2b(seed, digest_size=32, person=b"hembio-eval").digest()


def keygen(security_level: str = "default", backend: str = "fhe") -> KeyTriple:
    """Generate a fresh secret key / cloud key pair.

    ``security_level`` names a parameter set from :data:`PARAMETER_SETS`.
    The clear backend accepts the same names but ignores them.
    """
    if security_level not in PARAMETER_SETS:
        raise UnsupportedParametersError(f"unsupported parameter set: {security_level!r}")
    if backend not in BACKENDS:
        raise UnsupportedParametersError(f"unknown backend: {backend!r}")
    key_id = os.urandom(KEY_ID_LEN)
    if backend == "clear":
        seed = os.urandom(32)
        sk = SecretKey(backend, security_level, key_id, seed)
        ck = CloudKey(backend, security_level, key_id, _eval_seed(seed))
        return KeyTriple(sk, ck, security_level)

    native = _native()
    material = native.SecretKey(PARAMETER_SETS[security_level][0])
    server_part, public_part = material.cloud_key_parts()
    blob = (
        struct.pack(">I", len(server_part))
        + bytes(server_part)
        + struct.pack(">I", len(public_part))
        + bytes(public_part)
    )
    sk = SecretKey(backend, security_level, key_id, material)
    return KeyTriple(sk, CloudKey(backend, security_level, key_id, blob), security_level)


# ---------------------------------------------------------------------------
# Ciphertexts
# ---------------------------------------------------------------------------


class EncBit:
    """One encrypted bit.

    ``const`` is ``None`` for real ciphertexts and 0/1 for noiseless constants.
    """

    __slots__ = ("backend", "key_id", "payload", "const")

    def __init__(self, backend: str, key_id: bytes, payload, const: int | None = None):
        self.backend = backend
        self.key_id = key_id
        self.payload = payload
        self.const = const

    def __repr__(self) -> str:
        kind = "const" if self.const is not None else "enc"
        return f"EncBit({self.backend}, {kind})"

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(MAGIC, FORMAT_VERSION, KIND_ENCBIT) + bytes(
            [_BACKEND_CODES[self.backend]]
        )
        if self.const is not None:
            flags = _FLAG_CONST | (_FLAG_CONST_ONE if self.const else 0)
            return head + self.key_id + bytes([flags])
        if self.backend == "clear":
            nonce, masked = self.payload
            body = struct.pack("<QB", nonce, masked)
        else:
            body = bytes(self.payload.to_bytes())
        return head + self.key_id + b"\x00" + body

    @classmethod
    def from_bytes(cls, data: bytes) -> EncBit:
        view = _parse_header(data, KIND_ENCBIT)
        if len(view) < 2 + KEY_ID_LEN:
            raise MalformedBlobError("truncated ciphertext")
        backend = _BACKEND_NAMES.get(view[0])
        if backend is None:
            raise MalformedBlobError("unknown backend code")
        key_id = bytes(view[1 : 1 + KEY_ID_LEN])
        flags = view[1 + KEY_ID_LEN]
        body = view[2 + KEY_ID_LEN :]
        if flags & _FLAG_CONST:
            if len(body) or flags & ~(_FLAG_CONST | _FLAG_CONST_ONE):
                raise MalformedBlobError("bad constant ciphertext")
            return cls(backend, key_id, None, 1 if flags & _FLAG_CONST_ONE else 0)
        if flags:
            raise MalformedBlobError("unknown ciphertext flags")
        if backend == "clear":
            if len(body) != 9 or body[8] > 1:
                raise MalformedBlobError("bad clear ciphertext")
            return cls(backend, key_id, struct.unpack("<QB", body))
        try:
            payload = _native().Ciphertext.from_bytes(bytes(body))
        except ValueError as exc:
            raise MalformedBlobError(str(exc)) from exc
        return cls(backend, key_id, payload)


class _ClearMask:
    def __init__(self, eval_seed: bytes):
        self._base = hashlib.blake2b(key=eval_seed, digest_size=1)

    def mask(self, nonce: int) -> int:
        h = self._base.copy()
        h.update(nonce.to_bytes(8, "little"))
        return h.digest()[0] & 1

    def open(self, payload) -> int:
        return payload[1] ^ self.mask(payload[0])

    def seal(self, bit: int):
        nonce = secrets.randbits(64)
        return (nonce, bit ^ self.mask(nonce))


_clear_masks: dict[bytes, _ClearMask] = {}


def _clear_mask_for(sk: SecretKey) -> _ClearMask:
    m = _clear_masks.get(sk.key_id)
    if m is None:
        m = _clear_masks[sk.key_id] = _ClearMask(_eval_seed(sk.material))
    return m


def encrypt_bit(secret_key: SecretKey, b: int) -> EncBit:
    if b not in (0, 1):
        raise ValueError(f"not a bit: {b!r}")
    if secret_key.backend == "clear":
        payload = _clear_mask_for(secret_key).seal(b)
    else:
        payload = secret_key.material.encrypt(bool(b))
    return EncBit(secret_key.backend, secret_key.key_id, payload)


def decrypt_bit(secret_key: SecretKey, c: EncBit) -> int:
    """Decrypt one bit; raises :class:`DecryptionError` where the scheme returns bottom."""
    if c.backend != secret_key.backend or c.key_id != secret_key.key_id:
        raise DecryptionError("ciphertext was not produced under this key")
    if c.const is not None:
        return c.const
    if secret_key.backend == "clear":
        nonce, masked = c.payload
        return masked ^ _clear_mask_for(secret_key).mask(nonce)
    return int(secret_key.material.decrypt(c.payload))


# ---------------------------------------------------------------------------
# Gate evaluation
# ---------------------------------------------------------------------------


class _ClearEngine:
    def __init__(self, eval_seed: bytes):
        self._m = _ClearMask(eval_seed)

    def encrypt(self, b):
        return self._m.seal(b)

    def not_(self, p):
        return (p[0], p[1] ^ 1)

    def and_(self, p, q):
        m = self._m
        return m.seal(m.open(p) & m.open(q))

    def or_(self, p, q):
        m = self._m
        return m.seal(m.open(p) | m.open(q))

    def xor(self, p, q):
        m = self._m
        return m.seal(m.open(p) ^ m.open(q))

    def xnor(self, p, q):
        m = self._m
        return m.seal(1 ^ m.open(p) ^ m.open(q))

    def mux(self, s, t, f):
        m = self._m
        return m.seal(m.open(t) if m.open(s) else m.open(f))


class _TfheEngine:
    def __init__(self, blob: bytes):
        try:
            (slen,) = struct.unpack_from(">I", blob, 0)
            server = blob[4 : 4 + slen]
            (plen,) = struct.unpack_from(">I", blob, 4 + slen)
            public = blob[8 + slen : 8 + slen + plen]
        except struct.error as exc:
            raise MalformedBlobError("bad fhe cloud key") from exc
        if len(server) != slen or len(public) != plen or 8 + slen + plen != len(blob):
            raise MalformedBlobError("bad fhe cloud key")
        try:
            self._ck = _native().CloudKey.from_parts(server, public)
        except ValueError as exc:
            raise MalformedBlobError(str(exc)) from exc
        ck = self._ck
        self.encrypt = lambda b: ck.encrypt_public(bool(b))
        self.not_ = ck.not_
        self.and_ = ck.and_
        self.or_ = ck.or_
        self.xor = ck.xor_
        self.xnor = ck.xnor_
        self.mux = ck.mux


class BackendHandle:
    """Evaluates gates under one cloud key.

    Safe to share between threads: the cloud key is immutable and the fhe
    extension releases the GIL while bootstrapping. The ``bootstraps``
    counter is only approximate under concurrent use.
    """

    def __init__(self, cloud_key: CloudKey):
        self.cloud_key = cloud_key
        self.backend = cloud_key.backend
        self.key_id = cloud_key.key_id
        if self.backend == "clear":
            self._engine = _ClearEngine(cloud_key.blob)
        else:
            self._engine = _TfheEngine(cloud_key.blob)
        self._zero = EncBit(self.backend, self.key_id, None, 0)
        self._one = EncBit(self.backend, self.key_id, None, 1)
        self.bootstraps = 0

    @property
    def kind(self) -> str:
        return self.backend

    def _wrap(self, payload) -> EncBit:
        return EncBit(self.backend, self.key_id, payload)

    def _check(self, *bits: EncBit) -> None:
        for b in bits:
            if b.key_id != self.key_id or b.backend != self.backend:
                raise KeyMismatchError("operand belongs to a different key")

    def constant(self, b: int) -> EncBit:
        """Noiseless encryption of a public bit; needs no secret key."""
        if b == 0:
            return self._zero
        if b == 1:
            return self._one
        raise ValueError(f"not a bit: {b!r}")

    def encrypt_public(self, b: int) -> EncBit:
        """Fresh randomized encryption of ``b`` using the public part of the cloud key."""
        if b not in (0, 1):
            raise ValueError(f"not a bit: {b!r}")
        return self._wrap(self._engine.encrypt(b))

    def not_(self, a: EncBit) -> EncBit:
        self._check(a)
        if a.const is not None:
            return self.constant(1 - a.const)
        return self._wrap(self._engine.not_(a.payload))

    def and_(self, a: EncBit, b: EncBit) -> EncBit:
        self._check(a, b)
        if a.const is not None:
            if b.const is not None:
                return self.constant(a.const & b.const)
            return b if a.const else self._zero
        if b.const is not None:
            return a if b.const else self._zero
        self.bootstraps += 1
        return self._wrap(self._engine.and_(a.payload, b.payload))

    def or_(self, a: EncBit, b: EncBit) -> EncBit:
        self._check(a, b)
        if a.const is not None:
            if b.const is not None:
                return self.constant(a.const | b.const)
            return self._one if a.const else b
        if b.const is not None:
            return self._one if b.const else a
        self.bootstraps += 1
        return self._wrap(self._engine.or_(a.payload, b.payload))

    def xor(self, a: EncBit, b: EncBit) -> EncBit:
        self._check(a, b)
        if a.const is not None:
            if b.const is not None:
                return self.constant(a.const ^ b.const)
            return self.not_(b) if a.const else b
        if b.const is not None:
            return self.not_(a) if b.const else a
        self.bootstraps += 1
        return self._wrap(self._engine.xor(a.payload, b.payload))

    def xnor(self, a: EncBit, b: EncBit) -> EncBit:
        self._check(a, b)
        if a.const is not None:
            if b.const is not None:
                return self.constant(1 ^ a.const ^ b.const)
            return b if a.const else self.not_(b)
        if b.const is not None:
            return a if b.const else self.not_(a)
        self.bootstraps += 1
        return self._wrap(self._engine.xnor(a.payload, b.payload))

    def mux(self, sel: EncBit, t: EncBit, f: EncBit) -> EncBit:
        """``sel ? t : f``."""
        self._check(sel, t, f)
        if sel.const is not None:
            return t if sel.const else f
        if t.const is not None and f.const is not None:
            if t.const == f.const:
                return t
            return sel if t.const else self.not_(sel)
        if t.const is not None:
            return self.or_(sel, f) if t.const else self.and_(self.not_(sel), f)
        if f.const is not None:
            return self.or_(self.not_(sel), t) if f.const else self.and_(sel, t)
        self.bootstraps += 1
        return self._wrap(self._engine.mux(sel.payload, t.payload, f.payload))


# Functional spellings of the handle methods.


def constant_bit(handle: BackendHandle, b: int) -> EncBit:
    return handle.constant(b)


def gate_and(handle: BackendHandle, a: EncBit, b: EncBit) -> EncBit:
    return handle.and_(a, b)


def gate_or(handle: BackendHandle, a: EncBit, b: EncBit) -> EncBit:
    return handle.or_(a, b)


def gate_xor(handle: BackendHandle, a: EncBit, b: EncBit) -> EncBit:
    return handle.xor(a, b)


def gate_xnor(handle: BackendHandle, a: EncBit, b: EncBit) -> EncBit:
    return handle.xnor(a, b)


def gate_not(handle: BackendHandle, a: EncBit) -> EncBit:
    return handle.not_(a)


def gate_mux(handle: BackendHandle, sel: EncBit, t: EncBit, f: EncBit) -> EncBit:
    return handle.mux(sel, t, f)
