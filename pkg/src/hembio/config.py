"""Run-time configuration shared by client, server and CLI."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .gates import BACKENDS, PARAMETER_SETS
from .matcher import MatchConfig

# config-file key -> attribute
_KEYS = {
    "n": "n",
    "w": "w",
    "lambda": "token_bits",
    "token_bits": "token_bits",
    "b": "threshold",
    "threshold": "threshold",
    "ttl": "ttl",
    "backend": "backend",
    "params": "params",
    "max_message": "max_message",
}


@dataclass(frozen=True)
class Config:
    n: int = 128
    w: int = 8
    token_bits: int = 128
    threshold: int = 4096
    ttl: float = 120.0
    backend: str = "fhe"
    params: str = "default"
    max_message: int = 256 * 1024 * 1024

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.params not in PARAMETER_SETS:
            raise ValueError(f"unknown parameter set {self.params!r}")
        if self.token_bits < 2:
            raise ValueError("token_bits must be at least 2")
        self.match  # validates n, w, threshold

    @property
    def match(self) -> MatchConfig:
        return MatchConfig(self.n, self.w, self.threshold)

    def with_(self, **changes) -> Config:
        return replace(self, **changes)


TEST_PROFILE = Config(n=8, w=8, threshold=4096, backend="clear")


def parse_config(text: str, base: Config | None = None) -> Config:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    base = base or Config()
    types = {f.name: f.type for f in fields(Config)}
    changes = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lower()
        if not sep or key not in _KEYS:
            raise ValueError(f"config line {lineno}: cannot parse {raw!r}")
        attr = _KEYS[key]
        value = value.strip()
        kind = types[attr]
        if kind == "int":
            changes[attr] = int(value, 0)
        elif kind == "float":
            changes[attr] = float(value)
        else:
            changes[attr] = value
    return replace(base, **changes)


def load_config(path=None, base: Config | None = None) -> Config:
    if path is None:
        return base or Config()
    return parse_config(Path(path).read_text(), base)


def hembio_home() -> Path:
    return Path(os.environ.get("HEMBIO_HOME", Path.home() / ".hembio"))
