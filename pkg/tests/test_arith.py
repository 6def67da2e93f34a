import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hembio import arith, oracle
from hembio.arith import EncWord, WidthMismatchError, decrypt_word, encrypt_word
from hembio.gates import BackendHandle, MalformedBlobError, decrypt_bit, encrypt_bit

from .conftest import FULL_FHE, requires_fhe

BINARY = {
    "nbit_add": (arith.nbit_add, oracle.plain_add, oracle.native_add),
    "nbit_sub": (arith.nbit_sub, oracle.plain_sub, oracle.native_sub),
    "nbit_mult": (arith.nbit_mult, oracle.plain_mult, oracle.native_mult),
    "nbit_gt": (arith.nbit_gt, oracle.plain_gt, oracle.native_gt),
}
UNARY = {
    "twos_complement": (arith.twos_complement, oracle.plain_twos, oracle.native_twos),
    "abs_value": (arith.abs_value, oracle.plain_abs, oracle.native_abs),
}


def _run_binary(h, sk, op, a, b, w):
    out = op(h, encrypt_word(sk, a, w), encrypt_word(sk, b, w))
    if isinstance(out, EncWord):
        return decrypt_word(sk, out)
    return decrypt_bit(sk, out)


def _run_unary(h, sk, op, a, w):
    return decrypt_word(sk, op(h, encrypt_word(sk, a, w)))


@pytest.mark.parametrize("name", sorted(BINARY))
def test_binary_ops_exhaustive_w4(clear_keys, clear_handle, name):
    enc, plain, native = BINARY[name]
    sk = clear_keys.secret_key
    for a, b in itertools.product(range(16), repeat=2):
        got = _run_binary(clear_handle, sk, enc, a, b, 4)
        assert got == plain(a, b, 4) == native(a, b, 4), (name, a, b)


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_ops_exhaustive_w4(clear_keys, clear_handle, name):
    enc, plain, native = UNARY[name]
    sk = clear_keys.secret_key
    for a in range(16):
        if name == "abs_value" and a == 8:
            continue
        got = _run_unary(clear_handle, sk, enc, a, 4)
        assert got == plain(a, 4) == native(a, 4), (name, a)


def test_abs_of_minimum_word_is_itself(clear_keys, clear_handle):
    sk = clear_keys.secret_key
    for w in (4, 8):
        m = 1 << (w - 1)
        assert _run_unary(clear_handle, sk, arith.abs_value, m, w) == m


@pytest.mark.parametrize("w", [8, 16])
@pytest.mark.parametrize("name", sorted(BINARY))
@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_binary_ops_random(clear_keys, name, w, data):
    h = BackendHandle(clear_keys.cloud_key)
    a = data.draw(st.integers(0, (1 << w) - 1))
    b = data.draw(st.integers(0, (1 << w) - 1))
    enc, plain, native = BINARY[name]
    assert _run_binary(h, clear_keys.secret_key, enc, a, b, w) == plain(a, b, w) == native(a, b, w)


@pytest.mark.parametrize("w", [8, 16])
@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_unary_ops_random(clear_keys, w, data):
    h = BackendHandle(clear_keys.cloud_key)
    a = data.draw(st.integers(0, (1 << w) - 1))
    sk = clear_keys.secret_key
    assert _run_unary(h, sk, arith.twos_complement, a, w) == oracle.native_twos(a, w)
    if a != 1 << (w - 1):
        assert _run_unary(h, sk, arith.abs_value, a, w) == oracle.native_abs(a, w)


def test_output_widths(clear_keys, clear_handle):
    sk = clear_keys.secret_key
    a, b = encrypt_word(sk, 5, 6), encrypt_word(sk, 9, 6)
    assert arith.nbit_add(clear_handle, a, b).width == 7
    assert arith.nbit_sub(clear_handle, a, b).width == 6
    assert arith.nbit_mult(clear_handle, a, b).width == 12
    assert arith.twos_complement(clear_handle, a).width == 6
    assert arith.abs_value(clear_handle, a).width == 6


@pytest.mark.parametrize("op", [arith.nbit_add, arith.nbit_sub, arith.nbit_mult, arith.nbit_gt])
def test_width_mismatch_rejected(clear_keys, clear_handle, op):
    sk = clear_keys.secret_key
    with pytest.raises(WidthMismatchError):
        op(clear_handle, encrypt_word(sk, 1, 4), encrypt_word(sk, 1, 5))


def test_zero_extend_and_truncate(clear_keys, clear_handle):
    sk = clear_keys.secret_key
    x = encrypt_word(sk, 11, 4)
    assert decrypt_word(sk, arith.zero_extend(clear_handle, x, 9)) == 11
    assert decrypt_word(sk, arith.truncate(x, 2)) == 3
    with pytest.raises(WidthMismatchError):
        arith.zero_extend(clear_handle, x, 3)


def test_signed_decrypt(clear_keys):
    sk = clear_keys.secret_key
    assert decrypt_word(sk, encrypt_word(sk, 0b1110, 4), signed=True) == -2
    assert decrypt_word(sk, encrypt_word(sk, 0b0110, 4), signed=True) == 6


def test_encrypt_word_range(clear_keys):
    with pytest.raises(ValueError):
        encrypt_word(clear_keys.secret_key, 16, 4)
    with pytest.raises(ValueError):
        encrypt_word(clear_keys.secret_key, -1, 4)


def test_word_serialization(clear_keys, clear_handle):
    sk = clear_keys.secret_key
    word = EncWord(encrypt_word(sk, 200, 8).bits[:7] + (clear_handle.constant(1),))
    back = EncWord.from_bytes(word.to_bytes())
    assert decrypt_word(sk, back) == decrypt_word(sk, word)
    with pytest.raises(MalformedBlobError):
        EncWord.from_bytes(word.to_bytes()[:-3])
    with pytest.raises(MalformedBlobError):
        EncWord.from_bytes(b"\x00\x00")


def test_one_bit_primitives(clear_keys, clear_handle):
    sk, h = clear_keys.secret_key, clear_handle
    for a, b, c in itertools.product((0, 1), repeat=3):
        s, carry = arith.one_bit_add(h, encrypt_bit(sk, a), encrypt_bit(sk, b), encrypt_bit(sk, c))
        assert decrypt_bit(sk, s) + 2 * decrypt_bit(sk, carry) == a + b + c
        cmp = arith.one_bit_comp(h, encrypt_bit(sk, a), encrypt_bit(sk, b), encrypt_bit(sk, c))
        assert decrypt_bit(sk, cmp) == (c if a == b else a)


FHE_PAIRS = 200 if FULL_FHE else 3


@requires_fhe
@pytest.mark.fhe
@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(BINARY) + sorted(UNARY))
def test_fhe_matches_oracle_w8(fhe_keys, fhe_handle, name):
    rng = random.Random(name)
    sk = fhe_keys.secret_key
    w = 8
    for _ in range(FHE_PAIRS):
        a, b = rng.randrange(256), rng.randrange(256)
        if name in BINARY:
            enc, plain, native = BINARY[name]
            assert _run_binary(fhe_handle, sk, enc, a, b, w) == plain(a, b, w) == native(a, b, w)
        else:
            enc, plain, native = UNARY[name]
            if name == "abs_value" and a == 128:
                a = 127
            assert _run_unary(fhe_handle, sk, enc, a, w) == plain(a, w) == native(a, w)


@requires_fhe
@pytest.mark.fhe
@pytest.mark.slow
@pytest.mark.skipif(not FULL_FHE, reason="set HEMBIO_FULL_FHE=1 for the hours-long FHE sweep")
@pytest.mark.parametrize("name", sorted(BINARY))
def test_fhe_exhaustive_w4_and_random_w16(fhe_keys, fhe_handle, name):
    enc, plain, _ = BINARY[name]
    sk = fhe_keys.secret_key
    for a, b in itertools.product(range(16), repeat=2):
        assert _run_binary(fhe_handle, sk, enc, a, b, 4) == plain(a, b, 4)
    rng = random.Random(name)
    for _ in range(200):
        a, b = rng.randrange(1 << 16), rng.randrange(1 << 16)
        assert _run_binary(fhe_handle, sk, enc, a, b, 16) == plain(a, b, 16)
