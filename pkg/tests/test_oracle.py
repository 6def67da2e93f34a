import itertools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hembio import oracle
from hembio.oracle import ClearWord

PAIRS = [
    (oracle.plain_add, oracle.native_add),
    (oracle.plain_sub, oracle.native_sub),
    (oracle.plain_mult, oracle.native_mult),
    (oracle.plain_gt, oracle.native_gt),
]


def test_documented_examples():
    assert oracle.plain_sub(3, 7, 4) == 4
    assert oracle.plain_sub(7, 3, 8) == 4
    r0, r1 = 0x1234, 0xBEEF
    assert oracle.plain_g(1, r0, r1) == r1
    assert oracle.plain_g(0, r0, r1) == r0


def test_circuit_and_native_paths_agree_exhaustively_w4():
    for a, b in itertools.product(range(16), repeat=2):
        for plain, native in PAIRS:
            assert plain(a, b, 4) == native(a, b, 4), (plain.__name__, a, b)
    for a in range(16):
        assert oracle.plain_twos(a, 4) == oracle.native_twos(a, 4)
        if a != 8:
            assert oracle.plain_abs(a, 4) == oracle.native_abs(a, 4)


@given(w=st.sampled_from([8, 16]), data=st.data())
def test_circuit_and_native_paths_agree_random(w, data):
    a = data.draw(st.integers(0, (1 << w) - 1))
    b = data.draw(st.integers(0, (1 << w) - 1))
    for plain, native in PAIRS:
        assert plain(a, b, w) == native(a, b, w)


def test_g_forms_agree():
    rng = random.Random(7)
    for _ in range(1000):
        r0, r1 = rng.getrandbits(128), rng.getrandbits(128)
        for b in (0, 1):
            assert oracle.plain_g(b, r0, r1) == oracle.native_g(b, r0, r1) == (r1 if b else r0)


@given(
    st.integers(1, 12).flatmap(
        lambda n: st.tuples(
            st.lists(st.integers(0, 255), min_size=n, max_size=n),
            st.lists(st.integers(0, 255), min_size=n, max_size=n),
        )
    )
)
def test_metrics_agree(xy):
    x, y = xy
    assert oracle.plain_euclid2(x, y, 8) == oracle.native_euclid2(x, y)
    assert oracle.plain_manhattan(x, y, 8) == oracle.native_manhattan(x, y)


def test_f_boundary():
    x = [10, 20, 30, 40]
    y = [10, 20, 30, 43]
    d2 = oracle.native_euclid2(x, y)
    assert oracle.plain_f(x, y, d2, 8) == 1
    assert oracle.plain_f(x, y, d2 - 1, 8) == 0
    assert oracle.native_f(x, y, d2) == 1
    assert oracle.native_f(x, y, d2 - 1) == 0


def test_widths():
    assert oracle.acc_width(128, 8) == 23
    assert oracle.manhattan_width(128, 8) == 15
    assert oracle.acc_width(8, 8) == 19
    # the accumulator holds the worst case
    n, w = 8, 8
    assert n * ((1 << w) - 1) ** 2 < 1 << oracle.acc_width(n, w)


def test_domain_violations():
    with pytest.raises(ValueError):
        oracle.plain_add(16, 1, 4)
    with pytest.raises(ValueError):
        oracle.plain_euclid2([1, 2], [1], 8)
    with pytest.raises(ValueError):
        ClearWord(256, 8)
    assert ClearWord(5, 4).bits() == [1, 0, 1, 0]


def test_plain_protocol_run():
    t = [100] * 8
    assert oracle.plain_protocol_run(t, t, 0, 8) == "ACCEPT"
    far = [100] * 7 + [200]
    assert oracle.plain_protocol_run(t, far, 4096, 8) == "REJECT"
