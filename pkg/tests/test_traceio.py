import numpy as np
import pytest

from jellybean.errors import TraceFormatError
from jellybean.simenv import CsiTrace
from jellybean.traceio import (VERSION, load_trace, save_trace, save_trace_csv, trace_from_bytes,
                               trace_to_bytes)


def _trace(with_sectors=False):
    rng = np.random.default_rng(0)
    x = (rng.standard_normal((4, 60)) + 1j * rng.standard_normal((4, 60))).astype(np.complex64)
    valid = rng.random(60) > 0.2
    sec = rng.integers(0, 12, 60).astype(np.int16) if with_sectors else None
    return CsiTrace(x, valid, "A", 30, 2, 3100.0, sec)


@pytest.mark.parametrize("with_sectors", [False, True])
def test_round_trip(tmp_path, with_sectors):
    t = _trace(with_sectors)
    save_trace(t, tmp_path / "t.bin")
    back = load_trace(tmp_path / "t.bin")
    assert np.array_equal(back.samples, t.samples)
    assert np.array_equal(back.validity, t.validity)
    assert (back.owner, back.samples_per_probe, back.n_rounds, back.sample_rate) == ("A", 30, 2, 3100.0)
    if with_sectors:
        assert np.array_equal(back.sectors, t.sectors)
    else:
        assert back.sectors is None


@pytest.mark.parametrize("cut, section", [(10, "header"), (26, "owner"), (100, "samples"),
                                          (-1, "sector labels")])
def test_truncation_names_section(cut, section):
    data = trace_to_bytes(_trace(True))
    with pytest.raises(TraceFormatError, match=section):
        trace_from_bytes(data[:cut])


def test_trailing_bytes_rejected():
    with pytest.raises(TraceFormatError, match="trailing"):
        trace_from_bytes(trace_to_bytes(_trace()) + b"\0")


def test_version_and_magic_checked():
    data = bytearray(trace_to_bytes(_trace()))
    data[4] = VERSION + 1
    with pytest.raises(TraceFormatError, match="version"):
        trace_from_bytes(bytes(data))
    with pytest.raises(TraceFormatError, match="magic"):
        trace_from_bytes(b"XXXX" + bytes(data[4:]))


def test_csv_dump(tmp_path):
    save_trace_csv(_trace(), tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].split(",")[:4] == ["index", "time_sec", "valid", "amp_1"]
    assert len(lines) == 61
