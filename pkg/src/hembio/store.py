"""Key and record persistence.

The client-side :class:`KeyStore` is the only place secret keys are written.
Server stores hold :class:`~hembio.protocol.ServerRecord` blobs: a cloud key
and an encrypted template per client.
"""

from __future__ import annotations

import os
import re
import tempfile
import threading
from pathlib import Path

from .gates import CloudKey, KeyTriple, SecretKey
from .protocol import ServerRecord

_ID = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]{0,63}")


def check_client_id(client_id: str) -> str:
    if not _ID.fullmatch(client_id):
        raise ValueError(f"invalid client id {client_id!r}")
    return client_id


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


class KeyStore:
    """``DIR/secret.key``, ``DIR/cloud.key`` and ``DIR/params``."""

    def __init__(self, root):
        self.root = Path(root)

    def save(self, keys: KeyTriple) -> None:
        _atomic_write(self.root / "secret.key", keys.secret_key.to_bytes())
        os.chmod(self.root / "secret.key", 0o600)
        _atomic_write(self.root / "cloud.key", keys.cloud_key.to_bytes())
        _atomic_write(self.root / "params", keys.params.encode())

    def load(self) -> KeyTriple:
        sk = SecretKey.from_bytes((self.root / "secret.key").read_bytes())
        ck = CloudKey.from_bytes((self.root / "cloud.key").read_bytes())
        params = (self.root / "params").read_text().strip()
        return KeyTriple(sk, ck, params)

    def exists(self) -> bool:
        return (self.root / "secret.key").is_file()


class MemoryRecordStore:
    def __init__(self):
        self._records: dict[str, ServerRecord] = {}
        self._lock = threading.Lock()

    def get(self, client_id: str) -> ServerRecord | None:
        return self._records.get(client_id)

    def put(self, record: ServerRecord) -> None:
        with self._lock:
            if record.client_id in self._records:
                raise KeyError(record.client_id)
            self._records[record.client_id] = record

    def __len__(self) -> int:
        return len(self._records)

    def ids(self) -> list[str]:
        return sorted(self._records)


class RecordStore:
    """One ``<client_id>.rec`` file per client; loaded records are cached."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._cache: dict[str, ServerRecord] = {}
        self._lock = threading.Lock()

    def _path(self, client_id: str) -> Path:
        return self.root / f"{check_client_id(client_id)}.rec"

    def get(self, client_id: str) -> ServerRecord | None:
        rec = self._cache.get(client_id)
        if rec is not None:
            return rec
        try:
            path = self._path(client_id)
        except ValueError:
            return None
        if not path.is_file():
            return None
        rec = ServerRecord.from_bytes(path.read_bytes())
        self._cache[client_id] = rec
        return rec

    def put(self, record: ServerRecord) -> None:
        path = self._path(record.client_id)
        with self._lock:
            if path.exists():
                raise KeyError(record.client_id)
            _atomic_write(path, record.to_bytes())
            self._cache[record.client_id] = record

    def __len__(self) -> int:
        return len(self.ids())

    def ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.rec"))
