import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from jellybean.errors import EmptyComparison, LengthMismatch, NoActivity, SequenceTooShort
from jellybean.metrics import apen, bmr, bmr_prefix, report, sbr
from jellybean.simenv import ActivityEvent

NIST_PI_100 = ("1100100100001111110110101010001000100001011010001100001000110100"
               "110001001100011001100010100010111000")


def test_apen_short_worked_example():
    ap, p = apen("0100110101", 3, check_length=False)
    assert ap == pytest.approx(0.190954, abs=1e-6)
    assert p == pytest.approx(0.261961, abs=1e-6)


def test_apen_short_sequence_rejected_by_default():
    with pytest.raises(SequenceTooShort):
        apen("0100110101", 3)


def test_apen_hundred_bit_example():
    ap, p = apen(NIST_PI_100, 2)
    assert ap == pytest.approx(0.665393, abs=1e-6)
    assert p == pytest.approx(0.235301, abs=1e-6)


@pytest.mark.parametrize("m", [1, 2, 3, 4])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_apen_matches_brute_force(m, seed):
    bits = np.random.default_rng(seed).integers(0, 2, 300)
    ap, p = apen(bits, m)
    ap_ref, p_ref = oracles.apen_reference(list(bits), m)
    assert ap == pytest.approx(ap_ref, abs=1e-12)
    assert p == pytest.approx(p_ref, rel=1e-9, abs=1e-12)


def test_apen_constant_sequence_fails():
    assert apen(np.zeros(128, dtype=int), 2)[1] < 0.01


def test_apen_bad_m():
    with pytest.raises(ValueError):
        apen("0101", 0)


def test_bmr_basics():
    assert bmr("0000", "0101") == 0.5
    assert bmr([1, 1, 0, 0], [1, 1, 0, 0]) == 0.0
    assert bmr("0000", "1111", mask=[True, False, False, False]) == 1.0
    with pytest.raises(LengthMismatch):
        bmr("01", "011")
    with pytest.raises(EmptyComparison):
        bmr("01", "10", mask=[False, False])


def test_bmr_prefix():
    assert bmr_prefix("0110", "01") == 0.0
    assert bmr_prefix("0110", "0011111") == 0.5


@given(st.lists(st.integers(0, 1), min_size=1, max_size=200), st.data())
def test_bmr_symmetric_and_hamming(a, data):
    b = data.draw(st.lists(st.integers(0, 1), min_size=len(a), max_size=len(a)))
    assert bmr(a, b) == bmr(b, a)
    assert bmr(a, b) == pytest.approx(oracles.hamming_fraction(a, b))
    assert bmr(a, [1 - x for x in a]) == 1.0


def test_sbr_counts_events_in_window():
    ev = [ActivityEvent(t, 0.1, (0.0, 0.0), 0.1) for t in (1.0, 5.0, 20.0)]
    assert sbr("0" * 30, ev) == 10.0
    assert sbr("0" * 30, ev, window=(0.0, 10.0)) == 15.0
    with pytest.raises(NoActivity):
        sbr("01", ev, window=(30.0, 40.0))


def test_report_fields():
    bits = np.random.default_rng(3).integers(0, 2, 200)
    r = report(bits, bits, [ActivityEvent(1.0, 1.0, (0, 0), 0.1)])
    assert r.bmr == 0.0 and r.sbr == 200.0 and r.sequence_length == 200
    assert r.nist_pass is not None
    short = report("0101", "0101")
    assert short.apen is None and short.nist_pass is None and short.sbr is None
