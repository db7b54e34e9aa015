import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from jellybean.errors import (EmptyInput, EmptyTrace, RunOverflow, SeriesTooShort,
                              TruncationTooWide, WindowTooLarge)
from jellybean.fingerprint import (ARTIFICIAL, DAILY, AfParams, RunBlock, SmoothedSeries,
                                   aggregate_and_downsample, bits_from_str, bits_to_str,
                                   compute_threshold, default_af_params, denoise, detect_activity,
                                   encode_bits, fingerprint, fingerprint_stages, gray, gray_encode,
                                   moving_variance, rank_subcarriers, rle_decode, rle_encode,
                                   subcarrier_correlation, truncate_lsb)
from jellybean.simenv import CsiTrace, run_sounding, two_node_scene

WORKED_B = "000000" "1111" "000" "111" "00000" "1111"
WORKED_RUNS = [(6, 0), (4, 1), (3, 0), (3, 1), (5, 0), (4, 1)]
WORKED_S = "1010 1101 0100 0101 1110 1101".split()


def _runs(pairs):
    return [RunBlock(n, b) for n, b in pairs]


def _trace(amp, validity=None, sectors=None):
    amp = np.asarray(amp, dtype=np.float64)
    K, n = amp.shape
    v = np.ones(n, dtype=bool) if validity is None else np.asarray(validity)
    return CsiTrace(amp.astype(np.complex64), v, "A", 1, n, 3100.0, sectors)


# ---------------------------------------------------------------- parameters

def test_default_parameter_sets():
    assert (ARTIFICIAL.window_sec, ARTIFICIAL.downsample, ARTIFICIAL.lsb_count) == (0.1, 300, 5)
    assert (DAILY.window_sec, DAILY.downsample, DAILY.lsb_count) == (0.25, 600, 5)
    assert default_af_params("daily") is DAILY


@pytest.mark.parametrize("kw", [dict(window_sec=0), dict(downsample=0), dict(lsb_count=0),
                                dict(threshold_window_sec=-1)])
def test_af_params_reject_nonpositive(kw):
    with pytest.raises(ValueError):
        AfParams(**kw)


def test_window_samples_is_odd():
    assert AfParams(window_sec=0.1).window_samples(3100) == 311
    assert AfParams(window_sec=0.25).window_samples(3100) == 775
    assert AfParams(window_sec=0.1).window_samples(20) == 3


# ---------------------------------------------------------------- encoding, worked example

def test_rle_worked_example():
    runs = rle_encode(bits_from_str(WORKED_B))
    assert [(r.length, r.bit) for r in runs] == WORKED_RUNS


def test_gray_worked_example():
    blocks = gray_encode(_runs(WORKED_RUNS), 3)
    assert [bits_to_str(b) for b in blocks] == WORKED_S


def test_truncate_worked_example():
    blocks = [bits_from_str(s) for s in WORKED_S]
    f = truncate_lsb(blocks, 3)
    assert str(f) == "010101100101110101"
    assert f.gray_bits == 3
    assert f.event_count == 3


def test_encode_bits_worked_example_matches_hand_oracle():
    f = encode_bits(bits_from_str(WORKED_B), 3, gray_bits=3)
    expect, blocks = oracles.fingerprint_by_hand(WORKED_B, 3)
    assert blocks == WORKED_S
    assert str(f) == expect == "010101100101110101"


@pytest.mark.parametrize("bits, runs", [("1", [(1, 1)]), ("0101", [(1, 0), (1, 1), (1, 0), (1, 1)]),
                                        ("000", [(3, 0)])])
def test_rle_small(bits, runs):
    assert [(r.length, r.bit) for r in rle_encode(bits_from_str(bits))] == runs


def test_rle_empty_raises():
    with pytest.raises(EmptyInput):
        rle_encode([])


def test_gray_values():
    assert gray(6) == 0b101
    assert bits_to_str(gray_encode(_runs([(1, 1)]), 1)[0]) == "11"


def test_gray_overflow():
    with pytest.raises(RunOverflow):
        gray_encode(_runs([(8, 0)]), 3)


def test_truncate_identity_and_single_bit():
    blocks = [bits_from_str(s) for s in WORKED_S]
    assert str(truncate_lsb(blocks, 4)) == "".join(WORKED_S)
    assert str(truncate_lsb([bits_from_str("1101")], 1)) == "1"
    with pytest.raises(TruncationTooWide):
        truncate_lsb(blocks, 5)


def test_low_gray_bits_do_not_depend_on_width():
    B = bits_from_str(WORKED_B)
    assert str(encode_bits(B, 3, gray_bits=3)) == str(encode_bits(B, 3, gray_bits=7))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=300))
def test_rle_round_trip(bits):
    runs = rle_encode(bits)
    assert rle_decode(runs).tolist() == bits
    assert [(r.length, r.bit) for r in runs] == oracles.rle_runs(bits)
    assert all(a.bit != b.bit for a, b in zip(runs, runs[1:]))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 1 << 20))
def test_gray_adjacency(x):
    assert bin(gray(x) ^ gray(x + 1)).count("1") == 1


@pytest.mark.parametrize("width", [1, 2, 3, 5, 8])
def test_gray_matches_reflected_construction(width):
    table = oracles.reflected_gray_table(width)
    for x, code in enumerate(table):
        assert format(gray(x), f"0{width}b") == code


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=200), st.integers(1, 6))
def test_length_law_and_hand_oracle(bits, lsb):
    f = encode_bits(np.array(bits), lsb)
    assert len(f) == len(rle_encode(bits)) * lsb
    assert str(f) == oracles.fingerprint_by_hand(bits, lsb)[0]
    assert sum(n for _, n in f.block_spans) == len(f)


# ---------------------------------------------------------------- smoothing and detection

def test_moving_variance_hand_values():
    out = moving_variance(np.array([0, 0, 0, 1, 1, 1.0]), 3)
    np.testing.assert_allclose(out, [0, 0, 1 / 3, 1 / 3, 0, 0], atol=1e-12)


def test_moving_variance_constant_is_zero():
    assert np.all(moving_variance(np.full(50, 3.7), 7) == 0)


@pytest.mark.parametrize("window", [3, 5, 11, 31])
def test_moving_variance_matches_oracle(window):
    x = np.random.default_rng(window).normal(size=97) * 3 + 10
    np.testing.assert_allclose(moving_variance(x, window), oracles.moving_variance(x, window),
                               rtol=1e-9, atol=1e-12)


def test_moving_variance_rows_independent():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(3, 40))
    out = moving_variance(x, 5)
    for r in range(3):
        np.testing.assert_allclose(out[r], moving_variance(x[r], 5))


def test_moving_variance_errors():
    with pytest.raises(WindowTooLarge):
        moving_variance(np.zeros(4), 5)
    with pytest.raises(ValueError):
        moving_variance(np.zeros(10), 4)


def test_aggregate_and_downsample():
    g = aggregate_and_downsample(np.array([[1, 2, 3, 4, 5, 6.0]]), 2, 3100.0)
    np.testing.assert_allclose(g.values, [1.5, 3.5, 5.5])
    assert g.sample_rate == 1550.0
    assert len(aggregate_and_downsample(np.arange(10.0), 3).values) == 3
    two = aggregate_and_downsample(np.array([[1.0, 2, 3], [3.0, 4, 5]]), 1)
    np.testing.assert_allclose(two.values, [2, 3, 4])


def test_threshold_examples():
    assert compute_threshold(SmoothedSeries(np.array([5, 1, 2, 9.0]), 2.0), 1.0, 1.0) == 1.5
    assert compute_threshold(SmoothedSeries(np.full(10, 2.0), 3.0), 1.0, 3.0) == 6.0
    with pytest.raises(SeriesTooShort):
        compute_threshold(SmoothedSeries(np.ones(3), 10.0), 1.0)


def test_detect_activity_examples():
    g = np.array([0.1, 0.9, 0.9, 0.1])
    assert bits_to_str(detect_activity(g, 0.5)) == "0110"
    assert detect_activity(g, 1.0).sum() == 0
    assert detect_activity(g, 0.1).all()


# ---------------------------------------------------------------- ranking and denoising

def test_rank_all_identical_takes_lowest_indices():
    x = np.tile(np.sin(np.arange(40.0)), (8, 1))
    assert rank_subcarriers(x) == [0, 1, 2, 3]


def test_rank_anticorrelated_last():
    rng = np.random.default_rng(3)
    K = 6
    x = rng.normal(size=(K, 64))
    x[5] = -x[K // 2 - 1]
    rho = subcarrier_correlation(x, K // 2 - 1)
    assert rho[5] == pytest.approx(-1.0)
    assert int(np.argmin(rho)) == 5


def test_rank_matches_scalar_oracle():
    x = np.array([[1, 3, 2, 5, 4, 6, 8, 7],
                  [2, 2, 3, 3, 5, 5, 6, 6],
                  [8, 6, 7, 4, 5, 3, 1, 2],
                  [1, 4, 1, 4, 1, 4, 1, 4]], dtype=float)
    ref = 1
    expect = [oracles.correlation_rho(list(x[i]), list(x[ref])) for i in range(4)]
    np.testing.assert_allclose(subcarrier_correlation(x, ref), expect, atol=1e-12)
    order = sorted(range(4), key=lambda i: (-round(expect[i], 12), i))
    assert rank_subcarriers(x) == order[:2]
    assert ref in rank_subcarriers(x)


def test_zero_variance_subcarrier_gets_zero():
    x = np.random.default_rng(0).normal(size=(4, 30))
    x[3] = 1.0
    assert subcarrier_correlation(x, 1)[3] == 0.0


def test_denoise_constant_fixed_point():
    tr = _trace(np.full((4, 256), 2.5))
    np.testing.assert_allclose(np.abs(denoise(tr).samples), 2.5, atol=1e-6)


def test_denoise_reduces_error_on_step():
    rng = np.random.default_rng(7)
    clean = np.where(np.arange(1024) < 512, 5.0, 9.0)
    noisy = clean + rng.normal(0, 0.5, size=(2, 1024))
    out = np.abs(denoise(_trace(noisy)).samples)
    assert np.mean((out - clean) ** 2) < np.mean((noisy - clean) ** 2)


def test_denoise_all_invalid_unchanged():
    tr = _trace(np.ones((2, 64)), validity=np.zeros(64, dtype=bool))
    assert denoise(tr) is tr


def test_denoise_preserves_validity():
    v = np.ones(128, dtype=bool)
    v[10:20] = False
    out = denoise(_trace(np.random.default_rng(1).random((2, 128)) + 1, v))
    assert np.array_equal(out.validity, v)
    assert np.all(out.samples[:, ~v] == 0)


# ---------------------------------------------------------------- end to end

@pytest.fixture(scope="module")
def quiet_run():
    sc = two_node_scene(4.0, rng_seed=1)
    return run_sounding(sc, "A", "D", 0, 0, 20.0, [], seed=1)


def test_no_activity_gives_single_block(quiet_run):
    st_a = fingerprint_stages(quiet_run.trace_a, ARTIFICIAL)
    assert st_a.B.sum() == 0
    assert len(st_a.fingerprint) == ARTIFICIAL.lsb_count
    assert len(st_a.gamma.values) == quiet_run.trace_a.width // ARTIFICIAL.downsample


def test_noise_free_traces_fingerprint_identically():
    from jellybean.simenv import ActivityParams, generate_activity_schedule, path_segments
    sc = two_node_scene(3.0, rng_seed=2)
    sched = generate_activity_schedule(
        ActivityParams(window_sec=20.0, targets=path_segments(sc, "A", "D")), 2)
    run = run_sounding(sc, "A", "D", 0, 0, 20.0, sched, seed=2, noise_scale=0.0)
    f_a, f_d = fingerprint(run.trace_a), fingerprint(run.trace_d)
    assert np.array_equal(f_a.bits, f_d.bits)
    assert f_a.event_count > 0


def test_invalid_samples_do_not_matter(quiet_run):
    tr = quiet_run.trace_a
    v = tr.validity.copy()
    v[1000:1200] = False
    s1 = tr.samples.copy()
    s2 = tr.samples.copy()
    s2[:, 1100] = 1e6
    f1 = fingerprint(CsiTrace(s1, v, "A", tr.samples_per_probe, tr.n_rounds, tr.sample_rate))
    f2 = fingerprint(CsiTrace(s2, v, "A", tr.samples_per_probe, tr.n_rounds, tr.sample_rate))
    assert np.array_equal(f1.bits, f2.bits)


def test_all_invalid_trace_raises(quiet_run):
    tr = quiet_run.trace_a
    dead = CsiTrace(tr.samples, np.zeros(tr.width, dtype=bool), "A", tr.samples_per_probe,
                    tr.n_rounds, tr.sample_rate)
    with pytest.raises(EmptyTrace):
        fingerprint(dead)
