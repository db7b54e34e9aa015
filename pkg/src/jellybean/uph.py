"""Path discovery and uncoordinated path hopping (UPH).

Discovery: for every sector of A, D sweeps all of its sectors in a random
order; a sector pair is viable when probes decode in both directions with a
margin ``epsilon`` over the receiver sensitivity. Per A sector only D's
strongest sector is kept.

Hopping: each device independently hops over its own viable sectors, one
sector per dwell slot. CSI exists only in slots whose sector pair happens to
form a viable path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidDwell, NoViablePath
from .seeding import rng_for
from .simenv import (NEG_INF, ActivityEvent, CsiTrace, LinkModel, Scene, add_noise,
                     reference_noise_dbm, rss, sampling_grid)


@dataclass(frozen=True)
class ViableSectorSet:
    owner: str
    sectors: tuple[int, ...]
    per_sector_rss: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.sectors)


@dataclass(frozen=True)
class HopSequence:
    owner: str
    dwell_time_sec: float
    entries: np.ndarray
    seed: int = 0

    def sector_at(self, t: np.ndarray) -> np.ndarray:
        idx = np.minimum((np.asarray(t) / self.dwell_time_sec).astype(int), len(self.entries) - 1)
        return self.entries[idx]


@dataclass(frozen=True)
class DiscoveryTiming:
    probe_bytes: int = 26
    ack_bytes: int = 28
    sbifs_sec: float = 1e-6
    rate_bps: float = 160e6
    sector_count: int = 8
    # beam-switching gaps spent per hop; 76 gives a 5.12 ms sweep for 8 sectors
    sbifs_per_hop: float = 76.0
    round_overhead_sec: float = 0.0

    def __post_init__(self):
        if min(self.probe_bytes, self.ack_bytes, self.rate_bps, self.sector_count) <= 0:
            raise ValueError("timing parameters must be positive")
        if self.sbifs_sec < 0 or self.sbifs_per_hop < 0 or self.round_overhead_sec < 0:
            raise ValueError("overheads must be non-negative")


def discovery_time(t: DiscoveryTiming = DiscoveryTiming()) -> float:
    """Seconds for the full N x N discovery sweep."""
    hop = ((2 * t.probe_bytes + t.ack_bytes) * 8 / t.rate_bps) + t.sbifs_per_hop * t.sbifs_sec
    return t.sector_count ** 2 * hop + t.sector_count * t.round_overhead_sec


def path_discovery(scene: Scene, a: str, d: str, epsilon: float = 3.0, seed: int = 0,
                   t: float = 0.0) -> tuple[ViableSectorSet, ViableSectorSet]:
    """Round-based sector sweep; returns the viable sector sets of A and D."""
    need = scene.sensitivity_dbm + epsilon
    rng_a = rng_for(seed, "discovery", a)
    rng_d = rng_for(seed, "discovery", d)
    best_a: dict[int, float] = {}
    best_d: dict[int, float] = {}
    for sa in rng_a.permutation(scene.sector_count):
        winner, win_rss = None, NEG_INF
        for sd in rng_d.permutation(scene.sector_count):
            fwd = rss(scene, a, int(sa), d, int(sd), t)
            if fwd < need:
                continue
            # the ACK must come back on the same pair
            back = rss(scene, d, int(sd), a, int(sa), t)
            if back < need:
                continue
            level = min(fwd, back)
            if level > win_rss or (level == win_rss and int(sd) < winner):
                winner, win_rss = int(sd), level
        if winner is not None:
            best_a[int(sa)] = max(best_a.get(int(sa), NEG_INF), win_rss)
            best_d[winner] = max(best_d.get(winner, NEG_INF), win_rss)
    if not best_a:
        raise NoViablePath(f"no sector pair between {a} and {d} clears sensitivity + {epsilon} dB")
    return (ViableSectorSet(a, tuple(sorted(best_a)), best_a),
            ViableSectorSet(d, tuple(sorted(best_d)), best_d))


def viable_pairs(scene: Scene, a: str, d: str, va: ViableSectorSet, vd: ViableSectorSet,
                 epsilon: float = 3.0) -> set[tuple[int, int]]:
    """All (A sector, D sector) combinations from the two sets that form a working link."""
    need = scene.sensitivity_dbm + epsilon
    return {(sa, sd) for sa in va.sectors for sd in vd.sectors
            if rss(scene, a, sa, d, sd) >= need and rss(scene, d, sd, a, sa) >= need}


def generate_hop_sequence(v: ViableSectorSet, dwell_time: float, duration: float,
                          seed: int = 0) -> HopSequence:
    if not dwell_time > 0:
        raise InvalidDwell(f"dwell time must be > 0, got {dwell_time}")
    if not v.sectors:
        raise NoViablePath(f"{v.owner} has no viable sectors")
    n = math.ceil(duration / dwell_time - 1e-9)
    rng = rng_for(seed, "hop", v.owner)
    entries = np.asarray(v.sectors, dtype=np.int64)[rng.integers(0, len(v.sectors), n)]
    return HopSequence(v.owner, float(dwell_time), entries, seed)


@dataclass
class UphRun:
    trace_a: CsiTrace
    trace_d: CsiTrace
    matched: int
    slot_pairs: list[tuple[int, int]]
    slot_valid: np.ndarray
    seq_a: HopSequence
    seq_d: HopSequence
    scene: Scene
    a: str
    d: str
    schedule: list[ActivityEvent]
    duration: float
    ref_noise_dbm: float
    noise_scale: float
    seed: int

    def __iter__(self):
        yield self.trace_a
        yield self.trace_d
        yield self.matched


def slot_columns(scene: Scene, dwell: float, n_slots: int, width: int) -> list[np.ndarray]:
    """Columns of each slot covered by complete probing rounds.

    A device starts probing right after it switches beams, so rounds are
    aligned to the slot start; the incomplete tail of a slot carries no CSI.
    """
    alpha = scene.samples_per_probe
    rate = scene.sample_rate_hz
    cols = []
    for k in range(n_slots):
        lo = min(width, math.ceil(k * dwell * rate - 1e-9))
        hi = min(width, math.ceil((k + 1) * dwell * rate - 1e-9))
        rounds = (hi - lo) // alpha
        cols.append(np.arange(lo, lo + rounds * alpha))
    return cols


def run_uph_sounding(scene: Scene, a: str, d: str, seq_a: HopSequence, seq_d: HopSequence,
                     schedule: Sequence[ActivityEvent] = (), duration: float | None = None, *,
                     seed: int | None = None, noise_scale: float = 1.0,
                     min_rounds: int = 2) -> UphRun:
    """Probe exchange under independent hopping; returns traces plus the matched-slot count Q."""
    if seq_a.dwell_time_sec != seq_d.dwell_time_sec:
        raise InvalidDwell("both devices must share the slot clock")
    seed = scene.rng_seed if seed is None else seed
    dwell = seq_a.dwell_time_sec
    n_slots = min(len(seq_a.entries), len(seq_d.entries))
    if duration is None:
        duration = n_slots * dwell
    n_rounds, times = sampling_grid(scene, duration)
    width = times.size
    link = LinkModel(scene, a, d, times, schedule, 0.0)
    pairs = [(int(seq_a.entries[k]), int(seq_d.entries[k])) for k in range(n_slots)]
    joined = {p for p in set(pairs) if link.joined(*p)}
    try:
        link.ref_noise_dbm = reference_noise_dbm(scene, link, joined)
    except NoViablePath:
        link.ref_noise_dbm = 0.0
    cols = slot_columns(scene, dwell, n_slots, width)
    h = np.zeros((scene.subcarrier_count, width), dtype=np.complex64)
    valid = np.zeros(width, dtype=bool)
    slot_valid = np.zeros(n_slots, dtype=bool)
    sec_a = np.full(width, -1, dtype=np.int16)
    sec_d = np.full(width, -1, dtype=np.int16)
    for k, p in enumerate(pairs):
        c = cols[k]
        sec_a[c] = p[0]
        sec_d[c] = p[1]
        if p not in joined or c.size < min_rounds * scene.samples_per_probe:
            continue
        slot_valid[k] = True
        h[:, c] = link.channel(p[0], p[1], c)
        valid[c] = link.rss_dbm(p[0], p[1], c) >= scene.sensitivity_dbm
    traces = []
    for owner, sec in ((a, sec_a), (d, sec_d)):
        x = add_noise(h, noise_scale, rng_for(seed, "noise", owner))
        x[:, ~valid] = 0
        traces.append(CsiTrace(x, valid.copy(), owner, scene.samples_per_probe, n_rounds,
                               scene.sample_rate_hz, sec))
    return UphRun(traces[0], traces[1], int(slot_valid.sum()), pairs, slot_valid, seq_a, seq_d,
                  scene, a, d, list(schedule), duration, link.ref_noise_dbm, noise_scale, seed)


def export_hops_csv(path, seq_a: HopSequence, seq_d: HopSequence, slot_valid=None) -> None:
    """One row per slot: index, start time, A sector, D sector, matched flag."""
    n = min(len(seq_a.entries), len(seq_d.entries))
    with open(path, "w") as fh:
        fh.write("slot,start_sec,sector_a,sector_d,matched\n")
        for k in range(n):
            m = "" if slot_valid is None else int(bool(slot_valid[k]))
            fh.write(f"{k},{k * seq_a.dwell_time_sec:.6f},{seq_a.entries[k]},{seq_d.entries[k]},{m}\n")
