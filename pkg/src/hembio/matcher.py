"""Encrypted distance metrics and the match predicate."""

from __future__ import annotations

import math
import random
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import arith
from .arith import EncWord, constant_word, nbit_add, nbit_gt, nbit_mult, nbit_sub, truncate, zero_extend
from .gates import BackendHandle, EncBit, KeyMismatchError, MalformedBlobError, SecretKey


class DimensionMismatchError(ValueError):
    pass


def _log2_ceil(n: int) -> int:
    return math.ceil(math.log2(n))


@dataclass(frozen=True)
class BiometricVector:
    components: tuple[int, ...]
    width: int = 8
    modulus: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(int(c) for c in self.components))
        if self.modulus is None:
            object.__setattr__(self, "modulus", 1 << self.width)
        if not self.components:
            raise ValueError("empty vector")
        if not 1 < self.modulus <= 1 << self.width:
            raise ValueError(f"modulus {self.modulus} incompatible with width {self.width}")
        for c in self.components:
            if not 0 <= c < self.modulus:
                raise ValueError(f"component {c} outside [0, {self.modulus})")

    @property
    def n(self) -> int:
        return len(self.components)

    def to_bytes(self) -> bytes:
        head = struct.pack("<HBI", self.n, self.width, self.modulus)
        return head + struct.pack(f"<{self.n}I", *self.components)

    @classmethod
    def from_bytes(cls, data: bytes) -> BiometricVector:
        try:
            n, w, m = struct.unpack_from("<HBI", data)
            comps = struct.unpack_from(f"<{n}I", data, 7)
        except struct.error as exc:
            raise ValueError("truncated vector file") from exc
        if len(data) != 7 + 4 * n:
            raise ValueError("vector file length does not match header")
        return cls(comps, w, m)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> BiometricVector:
        return cls.from_bytes(Path(path).read_bytes())


@dataclass(frozen=True, eq=False)
class EncVector:
    words: tuple[EncWord, ...]

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        if not self.words:
            raise ValueError("empty EncVector")
        if len({wd.width for wd in self.words}) != 1:
            raise DimensionMismatchError("mixed component widths")

    @property
    def n(self) -> int:
        return len(self.words)

    @property
    def w(self) -> int:
        return self.words[0].width

    def bits(self) -> list[EncBit]:
        return [b for wd in self.words for b in wd]

    def to_bytes(self) -> bytes:
        return struct.pack(">HB", self.n, self.w) + b"".join(wd.to_bytes() for wd in self.words)

    @classmethod
    def read_from(cls, view: memoryview, off: int) -> tuple[EncVector, int]:
        try:
            n, w = struct.unpack_from(">HB", view, off)
        except struct.error as exc:
            raise MalformedBlobError("truncated EncVector") from exc
        off += 3
        words = []
        for _ in range(n):
            word, off = EncWord.read_from(view, off)
            if word.width != w:
                raise MalformedBlobError("EncVector word width does not match header")
            words.append(word)
        if not words:
            raise MalformedBlobError("empty EncVector")
        return cls(tuple(words)), off

    @classmethod
    def from_bytes(cls, data: bytes) -> EncVector:
        vec, end = cls.read_from(memoryview(data), 0)
        if end != len(data):
            raise MalformedBlobError("trailing bytes after EncVector")
        return vec


def encrypt_vector(secret_key: SecretKey, vector: BiometricVector) -> EncVector:
    return EncVector(tuple(arith.encrypt_word(secret_key, c, vector.width) for c in vector.components))


def decrypt_vector(secret_key: SecretKey, ev: EncVector) -> list[int]:
    return [arith.decrypt_word(secret_key, wd) for wd in ev.words]


@dataclass(frozen=True)
class MatchConfig:
    n: int = 128
    w: int = 8
    threshold: int = 4096

    def __post_init__(self):
        if self.n < 1 or self.w < 1:
            raise ValueError("n and w must be positive")
        if not 0 <= self.threshold < 1 << self.acc_width:
            raise ValueError(f"threshold must lie in [0, 2**{self.acc_width})")

    @property
    def acc_width(self) -> int:
        """Accumulator width W; n * (2**w - 1)**2 always fits."""
        return 2 * self.w + _log2_ceil(self.n)

    @property
    def manhattan_width(self) -> int:
        return self.w + _log2_ceil(self.n)


def _check_pair(h: BackendHandle, x: EncVector, y: EncVector) -> None:
    if x.n != y.n or x.w != y.w:
        raise DimensionMismatchError(f"({x.n}, {x.w}) vs ({y.n}, {y.w})")
    for b in (x.words[0][0], y.words[0][0]):
        if b.key_id != h.key_id:
            raise KeyMismatchError("vector encrypted under a different key")


def _terms(h, x, y, term, workers):
    pairs = list(zip(x.words, y.words))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda p: term(h, *p), pairs))
    return [term(h, a, b) for a, b in pairs]


def _accumulate(h: BackendHandle, terms: Sequence[EncWord], width: int) -> EncWord:
    acc = constant_word(h, 0, width)
    for t in terms:
        acc = truncate(nbit_add(h, acc, zero_extend(h, t, width)), width)
    return acc


def _square_of_difference(h, a, b):
    d = nbit_sub(h, a, b)
    return nbit_mult(h, d, d)


def squared_euclidean(h: BackendHandle, x: EncVector, y: EncVector, workers: int = 1) -> EncWord:
    """Encrypted sum of (y_i - x_i)**2 in a ``2w + ceil(log2 n)`` bit word.

    Per-component terms are independent and may run on ``workers`` threads;
    accumulation is always a left fold in component order.
    """
    _check_pair(h, x, y)
    width = 2 * x.w + _log2_ceil(x.n)
    return _accumulate(h, _terms(h, x, y, _square_of_difference, workers), width)


def manhattan(h: BackendHandle, x: EncVector, y: EncVector, workers: int = 1) -> EncWord:
    _check_pair(h, x, y)
    width = x.w + _log2_ceil(x.n)
    return _accumulate(h, _terms(h, x, y, nbit_sub, workers), width)


def match_f(
    h: BackendHandle, sample: EncVector, template: EncVector, cfg: MatchConfig, workers: int = 1
) -> EncBit:
    """Encrypted 1 iff the squared distance is at most ``cfg.threshold``."""
    if sample.n != cfg.n or sample.w != cfg.w:
        raise DimensionMismatchError(f"expected ({cfg.n}, {cfg.w}), got ({sample.n}, {sample.w})")
    dist = squared_euclidean(h, sample, template, workers)
    bound = constant_word(h, cfg.threshold, cfg.acc_width)
    return h.not_(nbit_gt(h, dist, bound))


def generate_pair(
    n: int, w: int, distance: int, count: int = 1, seed: int | None = None
) -> tuple[BiometricVector, BiometricVector]:
    """Random template and a sample differing by ``distance`` in ``count`` components.

    The squared distance between the two is exactly ``distance**2 * count``.
    """
    m = 1 << w
    if not 0 <= distance < m:
        raise ValueError(f"distance must lie in [0, {m})")
    if not 0 <= count <= n:
        raise ValueError("count must lie in [0, n]")
    rng = random.Random(seed)
    template = [rng.randrange(m) for _ in range(n)]
    sample = list(template)
    for i in rng.sample(range(n), count):
        t = template[i]
        options = [v for v in (t + distance, t - distance) if 0 <= v < m]
        if not options:
            # no room either side; move the template instead
            t = rng.randrange(0, m - distance)
            template[i] = t
            options = [t + distance]
        sample[i] = rng.choice(options)
    return BiometricVector(template, w), BiometricVector(sample, w)
