"""Adversary models: eavesdropper, keylogger, beam stealer, co-located UPH attacker.

Also the path-guessing probability model for hopping: an attacker that must
guess, for each matched hop, which of P paths the victim used succeeds on all
Q hops with probability (1/P)^Q.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import EmptyComparison, JellybeanError, InvalidArgs, NothingObserved, NoViablePath
from .fingerprint import AfParams, Fingerprint, encode_bits, fingerprint
from .keyagree import PairingOutcome, pair_fingerprints
from .metrics import bmr
from .rs import RsCode
from .seeding import rng_for
from .simenv import (ActivityEvent, CsiTrace, LinkModel, Node, Scene, SoundingRun, _angle_deg,
                     _dist, add_noise, reference_noise_dbm, run_sounding, sampling_grid)
from .uph import (HopSequence, UphRun, ViableSectorSet, generate_hop_sequence, slot_columns)

FILL_STRATEGIES = ("randomGuess", "bitReuse", "noFill")


@dataclass(frozen=True)
class AdversaryConfig:
    kind: str
    position: tuple[float, float] | None = None
    angle_deg: float = 0.0
    fill_strategy: str = "randomGuess"
    frame_rate: float = 30.0
    duration_bias: tuple[float, float] | float | None = (10.0, 30.0)
    controlled_paths: tuple = ()
    known_viable_paths: tuple = ()

    def __post_init__(self):
        if self.kind not in ("eavesdropper", "keylogger", "beamStealer", "colocatedUph"):
            raise InvalidArgs(f"unknown adversary kind {self.kind!r}")
        if not 0.0 <= self.angle_deg <= 180.0:
            raise InvalidArgs("angle must be within [0, 180] degrees")
        if self.fill_strategy not in FILL_STRATEGIES:
            raise InvalidArgs(f"unknown fill strategy {self.fill_strategy!r}")


# ---------------------------------------------------------------- eavesdropper

def eavesdropper_position(scene: Scene, a: str, d: str, phi_deg: float,
                          behind_m: float = 0.3) -> tuple[float, float]:
    """Point at |AD| from A, rotated by ``phi_deg`` off the A-D direction.

    At phi = 0 the eavesdropper cannot share D's spot, so it sits ``behind_m``
    further out on the same ray.
    """
    pa, pd = scene.node(a).position, scene.node(d).position
    r = _dist(pa, pd) + (behind_m if phi_deg == 0 else 0.0)
    ang = math.radians(_angle_deg(pa, pd) + phi_deg)
    return (pa[0] + r * math.cos(ang), pa[1] + r * math.sin(ang))


def place_eavesdropper(scene: Scene, a: str, position, name: str = "M") -> Scene:
    """Add node ``name`` at ``position`` oriented so one sector centre points at A."""
    pa = scene.node(a).position
    toward = _angle_deg(position, pa)
    node = Node(name, (float(position[0]), float(position[1])),
                toward - scene.sector_beamwidth_deg / 2.0)
    return scene.with_node(node)


def eavesdrop_trace(scene: Scene, m_config: AdversaryConfig | tuple, run: SoundingRun,
                    name: str = "M") -> CsiTrace:
    """A's probes as received by an eavesdropper.

    ``m_config`` is an :class:`AdversaryConfig` (position, or angle when no
    position is given) or a bare position. M points its best sector at A and
    sees the same absolute noise floor as the legitimate receivers.
    """
    if isinstance(m_config, AdversaryConfig):
        pos = m_config.position or eavesdropper_position(scene, run.a, run.d, m_config.angle_deg)
    else:
        pos = m_config
    sc = place_eavesdropper(scene, run.a, pos, name)
    n_rounds, times = sampling_grid(sc, run.duration)
    link = LinkModel(sc, run.a, name, times, run.schedule, run.ref_noise_dbm)
    sm = sc.sector_toward(name, sc.node(run.a).position)
    K = sc.subcarrier_count
    if not link.joined(run.tx_sector_a, sm):
        h = np.zeros((K, times.size), dtype=np.complex64)
        valid = np.zeros(times.size, dtype=bool)
    else:
        h = link.channel(run.tx_sector_a, sm)
        valid = link.rss_dbm(run.tx_sector_a, sm) >= sc.sensitivity_dbm
    x = add_noise(h, run.noise_scale, rng_for(run.seed, "noise", name))
    x[:, ~valid] = 0
    return CsiTrace(x, valid, name, sc.samples_per_probe, n_rounds, sc.sample_rate_hz)


def eavesdrop_uph_trace(scene: Scene, position, run: UphRun, name: str = "M") -> CsiTrace:
    """Eavesdropper facing A during a hopping run.

    A sends probes in every slot on its current sector, so M captures a
    slot whenever that sector happens to reach it.
    """
    sc = place_eavesdropper(scene, run.a, position, name)
    n_rounds, times = sampling_grid(sc, run.duration)
    width = times.size
    link = LinkModel(sc, run.a, name, times, run.schedule, run.ref_noise_dbm)
    sm = sc.sector_toward(name, sc.node(run.a).position)
    cols = slot_columns(sc, run.seq_a.dwell_time_sec, len(run.seq_a.entries), width)
    h = np.zeros((sc.subcarrier_count, width), dtype=np.complex64)
    valid = np.zeros(width, dtype=bool)
    sec = np.full(width, -1, dtype=np.int16)
    for k, c in enumerate(cols):
        sa = int(run.seq_a.entries[k])
        sec[c] = sa
        if c.size < 2 * sc.samples_per_probe or not link.joined(sa, sm):
            continue
        h[:, c] = link.channel(sa, sm, c)
        valid[c] = link.rss_dbm(sa, sm, c) >= sc.sensitivity_dbm
    x = add_noise(h, run.noise_scale, rng_for(run.seed, "noise", name))
    x[:, ~valid] = 0
    return CsiTrace(x, valid, name, sc.samples_per_probe, n_rounds, sc.sample_rate_hz, sec)


def fill_missing(bits, observed, strategy: str, seed=0) -> np.ndarray:
    """Fill unobserved positions of a partially known bit sequence.

    randomGuess: seeded fair coins. bitReuse: tile the observed segment just
    before each gap (the one after it for a leading gap). noFill: gaps left
    as 0; compare with ``bmr(..., mask=observed)``.
    """
    b = np.asarray(bits, dtype=np.uint8).copy()
    obs = np.asarray(observed, dtype=bool)
    if b.shape != obs.shape:
        raise InvalidArgs("bits and observed mask differ in length")
    if strategy not in FILL_STRATEGIES:
        raise InvalidArgs(f"unknown fill strategy {strategy!r}")
    gaps = ~obs
    if not gaps.any() or strategy == "noFill":
        if strategy == "noFill":
            b[gaps] = 0
        return b
    if strategy == "randomGuess":
        b[gaps] = rng_for(seed, "fill").integers(0, 2, int(gaps.sum()), dtype=np.uint8)
        return b
    if not obs.any():
        raise NothingObserved("bit reuse needs at least one observed bit")
    edges = np.flatnonzero(np.diff(np.r_[0, gaps.astype(np.int8), 0]))
    for g0, g1 in zip(edges[::2], edges[1::2]):
        if g0 > 0:
            s1 = g0
            s0 = s1
            while s0 > 0 and obs[s0 - 1]:
                s0 -= 1
        else:
            s0 = g1
            s1 = s0
            while s1 < obs.size and obs[s1]:
                s1 += 1
        seg = b[s0:s1]
        b[g0:g1] = np.resize(seg, g1 - g0)
    return b


def align_to_reference(f_ref: Fingerprint | np.ndarray, f_m: Fingerprint | np.ndarray):
    """Place M's bits against the reference: returns (bits, observed mask) of reference length.

    Positions beyond M's fingerprint are unobserved.
    """
    ref = np.asarray(getattr(f_ref, "bits", f_ref), dtype=np.uint8)
    m = np.asarray(getattr(f_m, "bits", f_m), dtype=np.uint8)
    out = np.zeros(ref.size, dtype=np.uint8)
    n = min(ref.size, m.size)
    out[:n] = m[:n]
    mask = np.zeros(ref.size, dtype=bool)
    mask[:n] = True
    return out, mask


def strategy_bmr(f_ref, f_m, strategy: str, seed=0) -> float:
    """BMR of M against the reference after filling with ``strategy``.

    An attacker that observed nothing falls back to guessing.
    """
    bits, mask = align_to_reference(f_ref, f_m)
    ref = np.asarray(getattr(f_ref, "bits", f_ref), dtype=np.uint8)
    if not mask.any():
        strategy = "randomGuess"
    filled = fill_missing(bits, mask, strategy, seed)
    if strategy == "noFill":
        return bmr(ref, filled, mask)
    return bmr(ref, filled)


def eavesdrop_fingerprint(trace_m: CsiTrace, p: AfParams) -> Fingerprint:
    """M's fingerprint from whatever it captured; empty when nothing was captured."""
    if not trace_m.validity.any():
        return Fingerprint(np.zeros(0, dtype=np.uint8))
    try:
        return fingerprint(trace_m, p)
    except JellybeanError:
        return Fingerprint(np.zeros(0, dtype=np.uint8))


def attacker_open(f_a: Fingerprint, f_m_bits, code: RsCode | None = None, seed=0) -> PairingOutcome:
    """Try to open the commitment A made for D using M's (filled) fingerprint.

    ``code`` is the code of the legitimate session; without one A sizes it to
    its own fingerprint.
    """
    f_m = Fingerprint(np.asarray(getattr(f_m_bits, "bits", f_m_bits), dtype=np.uint8))
    try:
        code = code or RsCode.fitted(len(f_a))
    except ValueError as e:
        return PairingOutcome(False, None, 1.0, f"commit failed: {e}", None, f_a, f_m)
    return pair_fingerprints(f_a, f_m, code=code, seed=seed)


# ---------------------------------------------------------------- keylogger

def _bias_factor(bias, rng) -> float:
    if bias is None or bias == 0:
        return 1.0
    if isinstance(bias, (tuple, list)):
        return float(rng.uniform(bias[0], bias[1]))
    return float(bias)


def events_to_detection(intervals: Sequence[tuple[float, float]], n: int, rate: float,
                        pad_sec: float = 0.0) -> np.ndarray:
    """Detection sequence: 1 wherever a downsampled window overlaps an (padded) interval."""
    B = np.zeros(n, dtype=np.uint8)
    for t0, t1 in intervals:
        i0 = max(0, int(math.floor((t0 - pad_sec) * rate)))
        i1 = min(n, int(math.ceil((t1 + pad_sec) * rate)))
        B[i0:i1] = 1
    return B


def keylog_fingerprint(schedule: Sequence[ActivityEvent], frame_rate: float, duration_bias,
                       af_timebase: tuple[int, float], p: AfParams, seed=0,
                       jitter_frames: float = 1.0) -> Fingerprint:
    """Fingerprint a camera observer would derive from the activity it films.

    ``af_timebase`` is (number of downsampled samples, their rate), matching
    the victim's detection sequence. Start times get +-``jitter_frames`` of
    jitter and all times are quantised to the camera frame clock.
    """
    n, rate = af_timebase
    rng = rng_for(seed, "keylogger")
    finite = math.isfinite(frame_rate) and frame_rate > 0

    def q(t):
        return round(t * frame_rate) / frame_rate if finite else t

    intervals = []
    for ev in schedule:
        start = ev.start_time
        if finite and jitter_frames:
            start += rng.uniform(-jitter_frames, jitter_frames) / frame_rate
        dur = ev.duration * _bias_factor(duration_bias, rng)
        intervals.append((q(start), q(start + dur)))
    B = events_to_detection(intervals, n, rate, pad_sec=p.window_sec / 2.0)
    return encode_bits(B, p.lsb_count)


# ---------------------------------------------------------------- beam stealing

@dataclass
class BeamStealOutcome:
    mode: str
    alignment: dict
    session_am: PairingOutcome | None = None
    session_md: PairingOutcome | None = None
    extra: dict = field(default_factory=dict)

    @property
    def mitm_success(self) -> bool:
        return bool(self.session_am and self.session_md
                    and self.session_am.accepted and self.session_md.accepted)


def beam_steal(scene: Scene, a: str, d: str, m: str | None, schedule: Sequence[ActivityEvent],
               p: AfParams, *, mode: str = "basic", duration: float = 90.0, seed=0,
               dwell: float = 0.05, discovery=None) -> BeamStealOutcome:
    """Forge sector-sweep frames so the legitimate devices beam toward M.

    basic: A and D align to M, and M pairs separately with each side over
    the two links it now sits on. plus: M's frames only add the sectors that
    point at M to the viable sets; A and D keep hopping over the other paths
    too, and M only ever sees its own links.
    """
    from .simenv import aligned_sectors  # local to keep the import list short
    if m is None:
        return BeamStealOutcome(mode, {"A-D": aligned_sectors(scene, a, d)})
    pm = scene.node(m).position
    sa_m = scene.sector_toward(a, pm)
    sd_m = scene.sector_toward(d, pm)
    sm_a = scene.sector_toward(m, scene.node(a).position)
    sm_d = scene.sector_toward(m, scene.node(d).position)
    align = {a: sa_m, d: sd_m, f"{m}->{a}": sm_a, f"{m}->{d}": sm_d}
    if mode == "basic":
        run_am = run_sounding(scene, a, m, sa_m, sm_a, duration, schedule, seed=seed)
        run_md = run_sounding(scene, m, d, sm_d, sd_m, duration, schedule, seed=seed + 1)
        f_a, f_ma = fingerprint(run_am.trace_a, p), fingerprint(run_am.trace_d, p)
        f_md, f_d = fingerprint(run_md.trace_a, p), fingerprint(run_md.trace_d, p)
        return BeamStealOutcome(mode, align,
                                pair_fingerprints(f_a, f_ma, seed=seed),
                                pair_fingerprints(f_md, f_d, seed=seed + 1))
    if mode != "plus":
        raise InvalidArgs(f"unknown mode {mode!r}")
    return _beam_steal_plus(scene, a, d, m, schedule, p, duration, seed, dwell, discovery,
                            sa_m, sd_m, sm_a, sm_d, align)


def _hop_links(scene, owner, seq, schedule, duration, links, seed, noise_ref):
    """Trace of ``owner`` hopping over ``seq``.

    ``links`` maps the owner's sector to a callable(slot) returning
    (LinkModel, tx_sector, rx_sector) or None when nobody answers.
    """
    n_rounds, times = sampling_grid(scene, duration)
    width = times.size
    cols = slot_columns(scene, seq.dwell_time_sec, len(seq.entries), width)
    h = np.zeros((scene.subcarrier_count, width), dtype=np.complex64)
    valid = np.zeros(width, dtype=bool)
    sec = np.full(width, -1, dtype=np.int16)
    for k, c in enumerate(cols):
        if c.size < 2 * scene.samples_per_probe:
            continue
        sec[c] = seq.entries[k]
        target = links(k)
        if target is None:
            continue
        link, ts, rs = target
        h[:, c] = link.channel(ts, rs, c)
        valid[c] = link.rss_dbm(ts, rs, c) >= scene.sensitivity_dbm
    x = add_noise(h, 1.0, rng_for(seed, "noise", owner, "plus"))
    x[:, ~valid] = 0
    return CsiTrace(x, valid, owner, scene.samples_per_probe, n_rounds, scene.sample_rate_hz, sec)


def _beam_steal_plus(scene, a, d, m, schedule, p, duration, seed, dwell, discovery,
                     sa_m, sd_m, sm_a, sm_d, align):
    from .uph import path_discovery, viable_pairs
    va, vd = discovery or path_discovery(scene, a, d, seed=seed)
    legit = viable_pairs(scene, a, d, va, vd)
    # M answers on the sectors facing it, so they look viable as well
    va_m = ViableSectorSet(a, tuple(sorted(set(va.sectors) | {sa_m})), va.per_sector_rss)
    vd_m = ViableSectorSet(d, tuple(sorted(set(vd.sectors) | {sd_m})), vd.per_sector_rss)
    seq_a = generate_hop_sequence(va_m, dwell, duration, seed)
    seq_d = generate_hop_sequence(vd_m, dwell, duration, seed)
    _, times = sampling_grid(scene, duration)
    ad = LinkModel(scene, a, d, times, schedule, 0.0)
    am = LinkModel(scene, a, m, times, schedule, 0.0)
    md = LinkModel(scene, m, d, times, schedule, 0.0)
    ad.ref_noise_dbm = reference_noise_dbm(scene, ad, legit) if legit else 0.0
    am.ref_noise_dbm = md.ref_noise_dbm = ad.ref_noise_dbm

    def a_side(k):
        sa, sd = int(seq_a.entries[k]), int(seq_d.entries[k])
        if sa == sa_m:
            return am, sa_m, sm_a
        if (sa, sd) in legit:
            return ad, sa, sd
        return None

    def d_side(k):
        sa, sd = int(seq_a.entries[k]), int(seq_d.entries[k])
        if sd == sd_m:
            return md, sm_d, sd_m
        if (sa, sd) in legit:
            return ad, sa, sd
        return None

    def m_from_a(k):
        return (am, sa_m, sm_a) if int(seq_a.entries[k]) == sa_m else None

    def m_from_d(k):
        return (md, sm_d, sd_m) if int(seq_d.entries[k]) == sd_m else None

    ta = _hop_links(scene, a, seq_a, schedule, duration, a_side, seed, None)
    td = _hop_links(scene, d, seq_d, schedule, duration, d_side, seed, None)
    tma = _hop_links(scene, m + "a", seq_a, schedule, duration, m_from_a, seed, None)
    tmd = _hop_links(scene, m + "d", seq_d, schedule, duration, m_from_d, seed, None)
    f_a, f_ma = fingerprint(ta, p), eavesdrop_fingerprint(tma, p)
    f_md, f_d = eavesdrop_fingerprint(tmd, p), fingerprint(td, p)
    return BeamStealOutcome("plus", align,
                            pair_fingerprints(f_a, f_ma, seed=seed),
                            pair_fingerprints(f_md, f_d, seed=seed + 1),
                            {"uncontrolled_paths": len(legit)})


# ---------------------------------------------------------------- path guessing

def _check_pq(P, Q):
    if int(P) != P or P < 1 or int(Q) != Q or Q < 0:
        raise InvalidArgs(f"need integer P >= 1 and Q >= 0, got P={P}, Q={Q}")


def prop1_probability(P: int, Q: int) -> float:
    _check_pq(P, Q)
    return (1.0 / P) ** Q


def partial_match_probability(P: int, Q: int, K: int) -> float:
    """Probability of guessing exactly K of Q hops right: Binomial(Q, 1/P) at K."""
    _check_pq(P, Q)
    if not 0 <= K <= Q:
        raise InvalidArgs("K must lie in [0, Q]")
    p = 1.0 / P
    return math.comb(Q, K) * p ** K * (1 - p) ** (Q - K)


def monte_carlo_match(P: int, Q: int, trials: int, seed=0, chunk: int = 200_000) -> float:
    """Fraction of trials where M's uniform path guesses equal D's on all Q hops."""
    _check_pq(P, Q)
    if trials < 1:
        raise InvalidArgs("trials must be >= 1")
    rng = rng_for(seed, "path-guess", P, Q)
    hits = 0
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        victim = rng.integers(0, P, (n, Q), dtype=np.int8)
        guess = rng.integers(0, P, (n, Q), dtype=np.int8)
        hits += int(np.all(victim == guess, axis=1).sum())
        done += n
    return hits / trials


def enumerate_match_probability(P: int, Q: int) -> Fraction:
    """Exact match probability by enumerating every pair of hop sequences."""
    _check_pq(P, Q)
    seqs = np.array(list(itertools.product(range(P), repeat=Q)), dtype=np.int8).reshape(P ** Q, Q)
    total = 0
    hits = 0
    for v in seqs:
        hits += int(np.all(seqs == v, axis=1).sum())
        total += len(seqs)
    return Fraction(hits, total)


# ---------------------------------------------------------------- co-located UPH attacker

@dataclass
class ColocatedResult:
    f_m: Fingerprint
    bmr_vs_a: float
    trace_m: CsiTrace
    seq_m: HopSequence | None


def colocated_uph_attack(run: UphRun, known_viable_paths: Sequence[tuple[int, int]],
                         dwell_time: float | None, seed_m, p: AfParams, f_a: Fingerprint | None = None,
                         mode: str = "hop", name: str = "M") -> ColocatedResult:
    """Attacker next to D that knows every viable path and hops on its own.

    M observes the A-D channel (it sits where D is) through its own noise.
    In a slot it captures CSI when A's sector and M's chosen path agree,
    whether or not D happened to be on that path. ``mode="antennas"``
    samples every path at once but still has to guess per slot which one
    D used (equivalent draw, one guess per victim slot).
    """
    paths = [tuple(int(s) for s in pth) for pth in known_viable_paths]
    if not paths:
        raise NoViablePath("attacker knows no viable paths")
    scene = run.scene
    dwell = run.seq_a.dwell_time_sec if mode == "antennas" or dwell_time is None else dwell_time
    n_slots = math.ceil(run.duration / dwell - 1e-9)
    vm = ViableSectorSet(name, tuple(range(len(paths))))
    seq_m = generate_hop_sequence(vm, dwell, run.duration, seed_m)
    n_rounds, times = sampling_grid(scene, run.duration)
    width = times.size
    link = LinkModel(scene, run.a, run.d, times, run.schedule, run.ref_noise_dbm)
    # A's sector per column (A's own slot clock), M's guessed path per column
    a_cols = slot_columns(scene, run.seq_a.dwell_time_sec, len(run.seq_a.entries), width)
    a_sector = np.full(width, -1, dtype=np.int64)
    for k, c in enumerate(a_cols):
        a_sector[c] = run.seq_a.entries[k]
    m_cols = slot_columns(scene, dwell, n_slots, width)
    m_path = np.full(width, -1, dtype=np.int64)
    for k, c in enumerate(m_cols):
        if c.size >= 2 * scene.samples_per_probe:
            m_path[c] = seq_m.entries[k]
    h = np.zeros((scene.subcarrier_count, width), dtype=np.complex64)
    valid = np.zeros(width, dtype=bool)
    for j, (sa, sd) in enumerate(paths):
        c = np.flatnonzero((m_path == j) & (a_sector == sa))
        if c.size == 0:
            continue
        h[:, c] = link.channel(sa, sd, c)
        valid[c] = link.rss_dbm(sa, sd, c) >= scene.sensitivity_dbm
    sectors = np.where(m_path >= 0, np.array([s for _, s in paths] + [-1])[m_path], -1).astype(np.int16)
    x = add_noise(h, run.noise_scale, rng_for(run.seed, "noise", name, seed_m))
    x[:, ~valid] = 0
    trace_m = CsiTrace(x, valid, name, scene.samples_per_probe, n_rounds, scene.sample_rate_hz, sectors)
    f_m = eavesdrop_fingerprint(trace_m, p)
    if f_a is None:
        f_a = fingerprint(run.trace_a, p)
    try:
        rate = strategy_bmr(f_a, f_m, "randomGuess", seed_m)
    except EmptyComparison:
        rate = float("nan")
    return ColocatedResult(f_m, rate, trace_m, seq_m)
