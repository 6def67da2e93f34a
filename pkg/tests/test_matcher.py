import random

import pytest

from hembio import oracle
from hembio.gates import BackendHandle, KeyMismatchError, MalformedBlobError, decrypt_bit
from hembio.arith import decrypt_word
from hembio.matcher import (
    BiometricVector,
    DimensionMismatchError,
    EncVector,
    MatchConfig,
    decrypt_vector,
    encrypt_vector,
    generate_pair,
    manhattan,
    match_f,
    squared_euclidean,
)


def _random_vec(rng, n, w):
    return BiometricVector([rng.randrange(1 << w) for _ in range(n)], w)


def test_vector_validation():
    with pytest.raises(ValueError):
        BiometricVector([256], 8)
    with pytest.raises(ValueError):
        BiometricVector([], 8)
    with pytest.raises(ValueError):
        BiometricVector([1, 2], 4, modulus=32)
    with pytest.raises(ValueError):
        BiometricVector([9], 4, modulus=9)
    assert BiometricVector([3, 4], 4, modulus=10).modulus == 10


def test_vector_file_roundtrip(tmp_path):
    v = BiometricVector([1, 2, 250, 7], 8)
    v.save(tmp_path / "v.vec")
    back = BiometricVector.load(tmp_path / "v.vec")
    assert back == v
    (tmp_path / "bad.vec").write_bytes(v.to_bytes()[:-1])
    with pytest.raises(ValueError):
        BiometricVector.load(tmp_path / "bad.vec")


def test_encvector_roundtrip(clear_keys):
    sk = clear_keys.secret_key
    v = BiometricVector([5, 0, 255, 17], 8)
    ev = encrypt_vector(sk, v)
    assert (ev.n, ev.w) == (4, 8)
    assert len(ev.bits()) == 32
    assert decrypt_vector(sk, EncVector.from_bytes(ev.to_bytes())) == list(v.components)
    with pytest.raises(MalformedBlobError):
        EncVector.from_bytes(ev.to_bytes() + b"\x00")


@pytest.mark.parametrize("n,w", [(1, 8), (3, 4), (8, 8), (5, 6)])
def test_metrics_match_oracle(clear_keys, n, w):
    rng = random.Random(n * 100 + w)
    sk = clear_keys.secret_key
    h = BackendHandle(clear_keys.cloud_key)
    for _ in range(5):
        x, y = _random_vec(rng, n, w), _random_vec(rng, n, w)
        ex, ey = encrypt_vector(sk, x), encrypt_vector(sk, y)
        d2 = squared_euclidean(h, ex, ey)
        d1 = manhattan(h, ex, ey)
        assert d2.width == MatchConfig(n, w, 0).acc_width
        assert d1.width == MatchConfig(n, w, 0).manhattan_width
        assert decrypt_word(sk, d2) == oracle.native_euclid2(x.components, y.components)
        assert decrypt_word(sk, d2) == oracle.plain_euclid2(x.components, y.components, w)
        assert decrypt_word(sk, d1) == oracle.native_manhattan(x.components, y.components)


def test_worst_case_fits_accumulator(clear_keys):
    sk = clear_keys.secret_key
    h = BackendHandle(clear_keys.cloud_key)
    zeros = encrypt_vector(sk, BiometricVector([0] * 8, 8))
    full = encrypt_vector(sk, BiometricVector([255] * 8, 8))
    assert decrypt_word(sk, squared_euclidean(h, zeros, full)) == 8 * 255**2
    assert decrypt_word(sk, manhattan(h, full, zeros)) == 8 * 255


def test_parallel_terms_give_same_result(clear_keys):
    rng = random.Random(3)
    sk = clear_keys.secret_key
    h = BackendHandle(clear_keys.cloud_key)
    x, y = encrypt_vector(sk, _random_vec(rng, 8, 8)), encrypt_vector(sk, _random_vec(rng, 8, 8))
    assert decrypt_word(sk, squared_euclidean(h, x, y, workers=4)) == decrypt_word(sk, squared_euclidean(h, x, y))


@pytest.mark.parametrize("seed", range(10))
def test_match_boundary(clear_keys, seed):
    sk = clear_keys.secret_key
    h = BackendHandle(clear_keys.cloud_key)
    rng = random.Random(seed)
    d, count = rng.randrange(1, 40), rng.randrange(1, 5)
    t, s = generate_pair(8, 8, d, count, seed)
    d2 = d * d * count
    et, es = encrypt_vector(sk, t), encrypt_vector(sk, s)
    assert decrypt_bit(sk, match_f(h, es, et, MatchConfig(8, 8, d2))) == 1
    assert decrypt_bit(sk, match_f(h, es, et, MatchConfig(8, 8, d2 - 1))) == 0


def test_identical_vectors_match_at_zero_threshold(clear_keys):
    sk = clear_keys.secret_key
    h = BackendHandle(clear_keys.cloud_key)
    v = encrypt_vector(sk, BiometricVector(list(range(8)), 8))
    assert decrypt_bit(sk, match_f(h, v, v, MatchConfig(8, 8, 0))) == 1


def test_dimension_and_key_checks(clear_keys, other_clear_keys):
    sk = clear_keys.secret_key
    h = BackendHandle(clear_keys.cloud_key)
    a = encrypt_vector(sk, BiometricVector([1] * 4, 8))
    b = encrypt_vector(sk, BiometricVector([1] * 5, 8))
    with pytest.raises(DimensionMismatchError):
        squared_euclidean(h, a, b)
    with pytest.raises(DimensionMismatchError):
        match_f(h, a, a, MatchConfig(8, 8, 10))
    foreign = encrypt_vector(other_clear_keys.secret_key, BiometricVector([1] * 4, 8))
    with pytest.raises(KeyMismatchError):
        manhattan(h, a, foreign)


def test_match_config_limits():
    assert MatchConfig(128, 8).acc_width == 23
    with pytest.raises(ValueError):
        MatchConfig(8, 8, 1 << 19)
    with pytest.raises(ValueError):
        MatchConfig(0, 8, 1)


@pytest.mark.parametrize("d,count", [(0, 3), (1, 1), (17, 4), (255, 1), (200, 8)])
def test_generate_pair_exact_distance(d, count):
    t, s = generate_pair(8, 8, d, count, seed=d + count)
    assert oracle.native_euclid2(t.components, s.components) == d * d * count
    diffs = [a != b for a, b in zip(t.components, s.components)]
    assert sum(diffs) == (count if d else 0)


def test_generate_pair_bad_arguments():
    with pytest.raises(ValueError):
        generate_pair(8, 8, 256)
    with pytest.raises(ValueError):
        generate_pair(8, 8, 3, count=9)
