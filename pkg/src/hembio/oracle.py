"""Plaintext reference implementations.

``plain_*`` functions replay the encrypted circuits bit by bit on Python
ints (ripple adders, shift-and-add multiplication, MUX comparator), so a
disagreement with the encrypted path points at gate translation. ``native_*``
functions compute the same contracts with machine arithmetic and serve as the
independent cross-check.
"""

from __future__ import annotations

import math
import secrets
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class ClearWord:
    value: int
    width: int

    def __post_init__(self):
        if self.width < 1 or self.value < 0 or self.value >> self.width:
            raise ValueError(f"{self.value} does not fit in {self.width} bits")

    def bits(self) -> list[int]:
        return _bits(self.value, self.width)


def _bits(value: int, width: int) -> list[int]:
    if value < 0 or value >> width:
        raise ValueError(f"{value} does not fit in {width} bits")
    return [(value >> i) & 1 for i in range(width)]


def _value(bits: Sequence[int]) -> int:
    return sum(b << i for i, b in enumerate(bits))


# -- circuit-structured path -------------------------------------------------


def _add_bits(a: Sequence[int], b: Sequence[int]) -> list[int]:
    carry = 0
    out = []
    for x, y in zip(a, b):
        out.append(x ^ y ^ carry)
        carry = (x & y) ^ (x & carry) ^ (y & carry)
    out.append(carry)
    return out


def _twos_bits(a: Sequence[int]) -> list[int]:
    return _add_bits([x ^ 1 for x in a], _bits(1, len(a)))


def plain_add(a: int, b: int, w: int) -> int:
    """Width w+1 sum (final carry kept)."""
    return _value(_add_bits(_bits(a, w), _bits(b, w)))


def plain_twos(a: int, w: int) -> int:
    return _value(_twos_bits(_bits(a, w))[:w])


def plain_abs(a: int, w: int) -> int:
    bits = _bits(a, w)
    mask = [bits[-1]] * w
    tmp = _add_bits(bits, mask)[:w]
    return _value([t ^ m for t, m in zip(tmp, mask)])


def plain_sub(a: int, b: int, w: int) -> int:
    full = _add_bits(_bits(a, w) + [0], _twos_bits(_bits(b, w)))
    var = full[w]
    tmp = full[:w]
    negated = _twos_bits([t & (1 - var) for t in tmp])[:w]
    return _value([n | (t & var) for n, t in zip(negated, tmp)])


def plain_mult(a: int, b: int, w: int) -> int:
    abits, bbits = _bits(a, w), _bits(b, w)
    res = [0] * (2 * w)
    for i in range(w):
        tmp = [0] * (2 * w)
        for j in range(w):
            tmp[i + j] = abits[j] & bbits[i]
        res = _add_bits(res, tmp)[: 2 * w]
    return _value(res)


def plain_gt(a: int, b: int, w: int) -> int:
    carry = 0
    for x, y in zip(_bits(a, w), _bits(b, w)):
        carry = carry if x == y else x
    return carry


def acc_width(n: int, w: int) -> int:
    return 2 * w + math.ceil(math.log2(n))


def manhattan_width(n: int, w: int) -> int:
    return w + math.ceil(math.log2(n))


def _check_vectors(x: Sequence[int], y: Sequence[int]) -> None:
    if len(x) != len(y) or not x:
        raise ValueError("vectors must be non-empty and equally long")


def plain_euclid2(x: Sequence[int], y: Sequence[int], w: int) -> int:
    _check_vectors(x, y)
    width = acc_width(len(x), w)
    acc = [0] * width
    for xi, yi in zip(x, y):
        d = plain_sub(xi, yi, w)
        sq = _bits(plain_mult(d, d, w), 2 * w) + [0] * (width - 2 * w)
        acc = _add_bits(acc, sq)[:width]
    return _value(acc)


def plain_manhattan(x: Sequence[int], y: Sequence[int], w: int) -> int:
    _check_vectors(x, y)
    width = manhattan_width(len(x), w)
    acc = [0] * width
    for xi, yi in zip(x, y):
        d = _bits(plain_sub(xi, yi, w), w) + [0] * (width - w)
        acc = _add_bits(acc, d)[:width]
    return _value(acc)


def plain_f(x: Sequence[int], y: Sequence[int], threshold: int, w: int) -> int:
    width = acc_width(len(x), w)
    return 1 - plain_gt(plain_euclid2(x, y, w), threshold, width)


def plain_g(b: int, r0: int, r1: int) -> int:
    """The token function in its arithmetic form."""
    return (1 - b) * r0 + b * r1


def plain_protocol_run(
    template: Sequence[int],
    sample: Sequence[int],
    threshold: int,
    w: int,
    token_bits: int = 128,
) -> str:
    """Run all four steps in the clear; returns ``"ACCEPT"`` or ``"REJECT"``."""
    b = plain_f(sample, template, threshold, w)
    r0 = secrets.randbits(token_bits)
    r1 = secrets.randbits(token_bits)
    while r1 == r0:
        r1 = secrets.randbits(token_bits)
    y = plain_g(b, r0, r1)
    if y == r1:
        return "ACCEPT"
    if y == r0:
        return "REJECT"
    raise AssertionError("honest run produced neither token")


# -- native arithmetic path --------------------------------------------------


def native_add(a: int, b: int, w: int) -> int:
    return a + b


def native_twos(a: int, w: int) -> int:
    return (-a) % (1 << w)


def native_abs(a: int, w: int) -> int:
    signed = a - (1 << w) if a >> (w - 1) else a
    return abs(signed) % (1 << w)


def native_sub(a: int, b: int, w: int) -> int:
    return abs(a - b)


def native_mult(a: int, b: int, w: int) -> int:
    return a * b


def native_gt(a: int, b: int, w: int) -> int:
    return int(a > b)


def native_euclid2(x: Sequence[int], y: Sequence[int]) -> int:
    return sum((yi - xi) ** 2 for xi, yi in zip(x, y))


def native_manhattan(x: Sequence[int], y: Sequence[int]) -> int:
    return sum(abs(yi - xi) for xi, yi in zip(x, y))


def native_f(x: Sequence[int], y: Sequence[int], threshold: int) -> int:
    return int(native_euclid2(x, y) <= threshold)


def native_g(b: int, r0: int, r1: int) -> int:
    return r1 if b else r0
