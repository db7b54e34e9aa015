import math

import numpy as np
import pytest

import oracles
from jellybean.errors import InvalidDwell, NoViablePath
from jellybean.simenv import two_node_scene, two_path_scene
from jellybean.uph import (DiscoveryTiming, ViableSectorSet, discovery_time, export_hops_csv,
                           generate_hop_sequence, path_discovery, run_uph_sounding, viable_pairs)


@pytest.fixture(scope="module")
def scene():
    return two_path_scene()


def test_discovery_two_paths(scene):
    va, vd = path_discovery(scene, "A", "D")
    assert va.sectors == (1, 2) and vd.sectors == (4, 5)
    assert viable_pairs(scene, "A", "D", va, vd) == {(1, 5), (2, 4)}


def test_discovery_is_order_independent(scene):
    assert path_discovery(scene, "A", "D", seed=1)[0].sectors == path_discovery(scene, "A", "D", seed=9)[0].sectors


def test_discovery_margin_can_exclude_everything(scene):
    with pytest.raises(NoViablePath):
        path_discovery(scene, "A", "D", epsilon=200.0)


def test_discovery_time_default():
    assert discovery_time() == pytest.approx(5.12e-3, rel=1e-9)


def test_discovery_time_scales_with_sector_count():
    hop = discovery_time(DiscoveryTiming(sector_count=1))
    assert discovery_time(DiscoveryTiming(sector_count=4)) == pytest.approx(16 * hop)
    with pytest.raises(ValueError):
        DiscoveryTiming(rate_bps=0)


def test_hop_sequence_length_and_support():
    v = ViableSectorSet("A", (1, 2, 7))
    seq = generate_hop_sequence(v, 0.05, 10.0, seed=3)
    assert len(seq.entries) == 200
    assert set(seq.entries.tolist()) <= {1, 2, 7}
    assert np.array_equal(seq.entries, generate_hop_sequence(v, 0.05, 10.0, seed=3).entries)
    assert seq.sector_at(np.array([0.0, 0.051, 99.0])).tolist() == [seq.entries[0], seq.entries[1], seq.entries[-1]]


def test_hop_frequencies_uniform_within_three_sigma():
    v = ViableSectorSet("A", (0, 3, 5, 9))
    seq = generate_hop_sequence(v, 0.01, 100.0, seed=4)
    n = len(seq.entries)
    for s in v.sectors:
        frac = np.mean(seq.entries == s)
        assert abs(frac - 0.25) <= oracles.binomial_3sigma(0.25, n)


@pytest.mark.parametrize("dwell", [0.0, -0.1])
def test_invalid_dwell(dwell):
    with pytest.raises(InvalidDwell):
        generate_hop_sequence(ViableSectorSet("A", (1,)), dwell, 1.0)


def test_matched_fraction_is_about_half(scene):
    va, vd = path_discovery(scene, "A", "D")
    seq_a = generate_hop_sequence(va, 0.05, 60.0, seed=1)
    seq_d = generate_hop_sequence(vd, 0.05, 60.0, seed=2)
    run = run_uph_sounding(scene, "A", "D", seq_a, seq_d, seed=1)
    slots = len(run.slot_pairs)
    assert slots == 1200
    assert abs(run.matched / slots - 0.5) <= oracles.binomial_3sigma(0.5, slots)
    legit = {(1, 5), (2, 4)}
    assert run.matched == sum(p in legit for p in run.slot_pairs)
    # CSI exists only in matched slots
    assert np.array_equal(run.trace_a.validity, run.trace_d.validity)
    assert not run.trace_a.samples[:, ~run.trace_a.validity].any()


def test_shared_slot_clock_required(scene):
    v = ViableSectorSet("A", (1,))
    with pytest.raises(InvalidDwell):
        run_uph_sounding(scene, "A", "D", generate_hop_sequence(v, 0.05, 1.0),
                         generate_hop_sequence(ViableSectorSet("D", (5,)), 0.1, 1.0))


def test_single_path_always_matches():
    sc = two_node_scene(4.0)
    va, vd = path_discovery(sc, "A", "D")
    run = run_uph_sounding(sc, "A", "D", generate_hop_sequence(va, 0.05, 5.0, 1),
                           generate_hop_sequence(vd, 0.05, 5.0, 2), seed=0)
    assert run.matched == 100


def test_hops_csv(tmp_path, scene):
    va, vd = path_discovery(scene, "A", "D")
    sa, sd = generate_hop_sequence(va, 0.5, 2.0, 1), generate_hop_sequence(vd, 0.5, 2.0, 2)
    export_hops_csv(tmp_path / "h.csv", sa, sd, [True, False, True, True])
    rows = (tmp_path / "h.csv").read_text().splitlines()
    assert rows[0] == "slot,start_sec,sector_a,sector_d,matched"
    assert rows[2].startswith("1,0.500000,") and rows[2].endswith(",0")
