"""Encrypted integer circuits over LSB-first words of :class:`~hembio.gates.EncBit`.

Every routine takes the evaluating :class:`~hembio.gates.BackendHandle` first.
Carries and other server-side constants enter as noiseless constant bits, so
no routine here needs the secret key.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable

from .gates import BackendHandle, EncBit, MalformedBlobError, SecretKey, decrypt_bit, encrypt_bit


class WidthMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EncWord:
    bits: tuple[EncBit, ...]

    def __post_init__(self):
        if not self.bits:
            raise ValueError("EncWord needs at least one bit")
        if not isinstance(self.bits, tuple):
            object.__setattr__(self, "bits", tuple(self.bits))

    @property
    def width(self) -> int:
        return len(self.bits)

    def __len__(self) -> int:
        return len(self.bits)

    def __iter__(self):
        return iter(self.bits)

    def __getitem__(self, i):
        return self.bits[i]

    @property
    def msb(self) -> EncBit:
        return self.bits[-1]

    def to_bytes(self) -> bytes:
        parts = [struct.pack(">H", self.width)]
        for b in self.bits:
            blob = b.to_bytes()
            parts.append(struct.pack(">I", len(blob)))
            parts.append(blob)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> EncWord:
        word, end = cls.read_from(memoryview(data), 0)
        if end != len(data):
            raise MalformedBlobError("trailing bytes after EncWord")
        return word

    @classmethod
    def read_from(cls, view: memoryview, off: int) -> tuple[EncWord, int]:
        try:
            (width,) = struct.unpack_from(">H", view, off)
            off += 2
            bits = []
            for _ in range(width):
                (n,) = struct.unpack_from(">I", view, off)
                off += 4
                if off + n > len(view):
                    raise MalformedBlobError("truncated EncWord")
                bits.append(EncBit.from_bytes(bytes(view[off : off + n])))
                off += n
        except struct.error as exc:
            raise MalformedBlobError("truncated EncWord") from exc
        if width == 0:
            raise MalformedBlobError("zero-width EncWord")
        return cls(tuple(bits)), off


def _bits_of(value: int, width: int) -> list[int]:
    if value < 0 or value >> width:
        raise ValueError(f"{value} does not fit in {width} bits")
    return [(value >> i) & 1 for i in range(width)]


def encrypt_word(secret_key: SecretKey, value: int, width: int) -> EncWord:
    return EncWord(tuple(encrypt_bit(secret_key, b) for b in _bits_of(value, width)))


def decrypt_word(secret_key: SecretKey, word: EncWord, signed: bool = False) -> int:
    value = 0
    for i, b in enumerate(word.bits):
        value |= decrypt_bit(secret_key, b) << i
    if signed and value >> (word.width - 1):
        value -= 1 << word.width
    return value


def constant_word(handle: BackendHandle, value: int, width: int) -> EncWord:
    return EncWord(tuple(handle.constant(b) for b in _bits_of(value, width)))


def zero_extend(handle: BackendHandle, word: EncWord, width: int) -> EncWord:
    if width < word.width:
        raise WidthMismatchError(f"cannot extend width {word.width} to {width}")
    zero = handle.constant(0)
    return EncWord(word.bits + (zero,) * (width - word.width))


def truncate(word: EncWord, width: int) -> EncWord:
    return EncWord(word.bits[:width])


def _same_width(a: EncWord, b: EncWord) -> None:
    if a.width != b.width:
        raise WidthMismatchError(f"width {a.width} != {b.width}")


def one_bit_add(h: BackendHandle, a: EncBit, b: EncBit, carry_in: EncBit) -> tuple[EncBit, EncBit]:
    t = h.xor(a, b)
    s = h.xor(t, carry_in)
    carry_out = h.xor(h.xor(h.and_(a, b), h.and_(a, carry_in)), h.and_(b, carry_in))
    return s, carry_out


def nbit_add(h: BackendHandle, a: EncWord, b: EncWord) -> EncWord:
    """Ripple-carry sum; the result is one bit wider, with the final carry as MSB."""
    _same_width(a, b)
    carry = h.constant(0)
    out = []
    for x, y in zip(a.bits, b.bits):
        s, carry = one_bit_add(h, x, y, carry)
        out.append(s)
    out.append(carry)
    return EncWord(tuple(out))


def _invert(h: BackendHandle, a: Iterable[EncBit]) -> list[EncBit]:
    one = h.constant(1)
    return [h.xor(x, one) for x in a]


def _twos_wide(h: BackendHandle, a: EncWord) -> EncWord:
    # width w+1, value 2**w - a for every a (including a == 0)
    return nbit_add(h, EncWord(tuple(_invert(h, a))), constant_word(h, 1, a.width))


def twos_complement(h: BackendHandle, a: EncWord) -> EncWord:
    return truncate(_twos_wide(h, a), a.width)


def abs_value(h: BackendHandle, a: EncWord) -> EncWord:
    """|a| for two's-complement ``a``. The minimum word maps to itself."""
    w = a.width
    mask = EncWord((a.msb,) * w)
    tmp = truncate(nbit_add(h, a, mask), w)
    return EncWord(tuple(h.xor(t, m) for t, m in zip(tmp, mask)))


def nbit_sub(h: BackendHandle, a: EncWord, b: EncWord) -> EncWord:
    """Magnitude |a - b| as an unsigned word of the input width.

    ``a`` is added to the (w+1)-bit two's complement of ``b``; bit ``w`` of
    the sum is the final carry, set iff ``a >= b``. The result is selected
    without branching: ``twos(tmp AND NOT var) OR (tmp AND var)``.
    """
    _same_width(a, b)
    w = a.width
    full = nbit_add(h, zero_extend(h, a, w + 1), _twos_wide(h, b))
    carry_f = full[w]
    tmp = full.bits[:w]
    not_var = h.not_(carry_f)
    negated = twos_complement(h, EncWord(tuple(h.and_(t, not_var) for t in tmp)))
    return EncWord(tuple(h.or_(n, h.and_(t, carry_f)) for n, t in zip(negated, tmp)))


def nbit_mult(h: BackendHandle, a: EncWord, b: EncWord) -> EncWord:
    """Unsigned schoolbook product, width ``2w``."""
    _same_width(a, b)
    w = a.width
    zero = h.constant(0)
    res = constant_word(h, 0, 2 * w)
    for i in range(w):
        tmp = [zero] * (2 * w)
        for j in range(w):
            tmp[i + j] = h.and_(a[j], b[i])
        # the final carry cannot fire inside 2w bits
        res = truncate(nbit_add(h, res, EncWord(tuple(tmp))), 2 * w)
    return res


def one_bit_comp(h: BackendHandle, a: EncBit, b: EncBit, carry: EncBit) -> EncBit:
    return h.mux(h.xnor(a, b), carry, a)


def nbit_gt(h: BackendHandle, a: EncWord, b: EncWord) -> EncBit:
    """Encrypted ``a > b`` (unsigned). Scans LSB to MSB; ties keep the carry."""
    _same_width(a, b)
    carry = h.constant(0)
    for x, y in zip(a.bits, b.bits):
        carry = one_bit_comp(h, x, y, carry)
    return carry

