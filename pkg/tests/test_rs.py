import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from jellybean.errors import DecodeFailure, LengthMismatch
from jellybean.rs import (RsCode, field_tables, generator_poly, gf_inv, gf_mul, rs_correct,
                          rs_decode_symbols, rs_encode_symbols)


def _slow_mul(a, b, m):
    """Carry-less multiply then reduce by the primitive polynomial."""
    poly = {4: 0x13, 8: 0x11D}[m]
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a >> m:
            a ^= poly
    return r


@pytest.mark.parametrize("m", [4, 8])
def test_field_multiplication_matches_shift_and_add(m):
    q = 1 << m
    rng = np.random.default_rng(m)
    for a, b in rng.integers(0, q, size=(300, 2)):
        assert gf_mul(int(a), int(b), m) == _slow_mul(int(a), int(b), m)


@pytest.mark.parametrize("m", [4, 8])
def test_field_inverse(m):
    for a in range(1, 1 << m):
        assert gf_mul(a, gf_inv(a, m), m) == 1


def test_log_table_sentinel_gives_zero_products():
    exp, log = field_tables(8)
    for a in (0, 1, 77, 255):
        assert exp[log[0] + log[a]] == 0


def test_generator_has_expected_roots():
    m, nsym = 8, 10
    g = [int(c) for c in generator_poly(m, nsym)]
    exp, _ = field_tables(m)
    for i in range(nsym):
        x, acc = int(exp[i]), 0
        for c in g:
            acc = gf_mul(acc, x, m) ^ c
        assert acc == 0


@pytest.mark.parametrize("n, k, ok", [(255, 153, True), (15, 9, True), (16, 9, False),
                                      (15, 10, False), (15, 15, False)])
def test_code_invariants(n, k, ok):
    m = 8 if n > 15 else 4
    if n == 16:
        m = 4
    if ok:
        c = RsCode(m, n, k)
        assert c.t == (n - k) // 2
    else:
        with pytest.raises(ValueError):
            RsCode(m, n, k)


def test_fitted_code():
    c = RsCode.fitted(2040)
    assert (c.n, c.k, c.t) == (255, 153, 51)
    c = RsCode.fitted(230)
    assert c.n == 28 and c.t == 5
    with pytest.raises(ValueError):
        RsCode.fitted(16)


@pytest.mark.parametrize("m, n, k", [(4, 15, 9), (8, 255, 153), (8, 40, 24), (8, 28, 18)])
def test_encoder_matches_reedsolo(m, n, k):
    code = RsCode(m, n, k)
    codec = oracles.reedsolo_codec(m, n, k)
    rng = np.random.default_rng(n)
    for _ in range(5):
        msg = rng.integers(0, 1 << m, k)
        ours = rs_encode_symbols(msg, code)
        theirs = list(codec.encode(bytearray(int(v) for v in msg)))
        assert ours.tolist() == theirs


def test_zero_key_gives_zero_codeword():
    assert not rs_encode_symbols(np.zeros(153, dtype=int), RsCode()).any()


def test_round_trip_clean():
    code = RsCode()
    msg = np.random.default_rng(0).integers(0, 256, code.k)
    assert rs_decode_symbols(rs_encode_symbols(msg, code), code).tolist() == msg.tolist()


@pytest.mark.parametrize("seed", range(5))
def test_corrects_t_random_errors_like_reedsolo(seed):
    code = RsCode()
    rng = np.random.default_rng(seed)
    msg = rng.integers(0, 256, code.k)
    word = rs_encode_symbols(msg, code)
    pos = rng.choice(code.n, code.t, replace=False)
    word[pos] ^= rng.integers(1, 256, code.t)
    assert rs_decode_symbols(word, code).tolist() == msg.tolist()
    theirs = oracles.reedsolo_codec(8, 255, 153).decode(bytearray(int(v) for v in word))[0]
    assert list(theirs) == msg.tolist()


def test_wrong_length_rejected():
    with pytest.raises(LengthMismatch):
        rs_correct(np.zeros(10, dtype=int), RsCode(4, 15, 9))


def test_some_t_plus_one_pattern_is_not_corrected():
    code = RsCode(4, 15, 9)
    msg = np.arange(9) % 16
    word = rs_encode_symbols(msg, code)
    # search the first patterns of t + 1 errors until one is not decoded back to msg
    for pos in itertools.combinations(range(code.n), code.t + 1):
        bad = word.copy()
        bad[list(pos)] ^= 1
        try:
            out = rs_decode_symbols(bad, code)
        except DecodeFailure:
            return
        if out.tolist() != msg.tolist():
            return
    pytest.fail("every t+1 pattern decoded to the original message")


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_shortened_code_property(data):
    n = data.draw(st.integers(5, 60))
    t = data.draw(st.integers(1, (n - 1) // 2))
    code = RsCode(8, n, n - 2 * t)
    msg = np.array(data.draw(st.lists(st.integers(0, 255), min_size=code.k, max_size=code.k)))
    word = rs_encode_symbols(msg, code)
    e = data.draw(st.integers(0, t))
    pos = data.draw(st.lists(st.integers(0, n - 1), min_size=e, max_size=e, unique=True))
    word[pos] ^= 0x5A
    assert rs_decode_symbols(word, code).tolist() == msg.tolist()
