"""Deterministic 2D geometric mmWave channel and activity simulator.

The world is a set of nodes with sectored antennas plus flat reflectors.
Propagation is LoS plus single-bounce image paths with free-space loss.
People and hands are discs; while a disc intersects a path segment the
path suffers extra attenuation. Channel sounding produces per-subcarrier
complex CSI at both ends of a link, with independent measurement noise.

CSI values are expressed in units of the reference noise standard deviation,
so a unit-power complex Gaussian is the measurement noise at ``noise_scale=1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidConfig, InvalidParams, NoViablePath
from .seeding import derive_seed, rng_for

SPEED_OF_LIGHT = 299_792_458.0
NEG_INF = float("-inf")

Point = tuple[float, float]
Segment = tuple[Point, Point]


# ---------------------------------------------------------------- geometry

def _angle_deg(p: Point, q: Point) -> float:
    """Direction of q seen from p, degrees in [0, 360)."""
    return math.degrees(math.atan2(q[1] - p[1], q[0] - p[0])) % 360.0


def _dist(p: Point, q: Point) -> float:
    return math.hypot(q[0] - p[0], q[1] - p[1])


def point_segment_distance(c: Point, seg: Segment) -> float:
    (x1, y1), (x2, y2) = seg
    dx, dy = x2 - x1, y2 - y1
    L2 = dx * dx + dy * dy
    if L2 == 0.0:
        return _dist(c, seg[0])
    u = ((c[0] - x1) * dx + (c[1] - y1) * dy) / L2
    u = min(1.0, max(0.0, u))
    return math.hypot(x1 + u * dx - c[0], y1 + u * dy - c[1])


def _cross(o: Point, a: Point, b: Point) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def segments_cross(s1: Segment, s2: Segment) -> bool:
    """Proper intersection test (touching endpoints do not count)."""
    p1, p2 = s1
    q1, q2 = s2
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def _mirror(p: Point, seg: Segment) -> Point:
    (x1, y1), (x2, y2) = seg
    dx, dy = x2 - x1, y2 - y1
    L2 = dx * dx + dy * dy
    u = ((p[0] - x1) * dx + (p[1] - y1) * dy) / L2
    fx, fy = x1 + u * dx, y1 + u * dy
    return (2 * fx - p[0], 2 * fy - p[1])


def _line_intersection(p1: Point, p2: Point, seg: Segment) -> tuple[float, float] | None:
    """Intersection of segment p1-p2 with ``seg``; returns (u along p1p2, v along seg)."""
    (x3, y3), (x4, y4) = seg
    x1, y1 = p1
    x2, y2 = p2
    den = (x1 - x2) * (y3 - y4) - (y1 - y2) * (x3 - x4)
    if abs(den) < 1e-12:
        return None
    u = ((x1 - x3) * (y3 - y4) - (y1 - y3) * (x3 - x4)) / den
    v = -((x1 - x2) * (y1 - y3) - (y1 - y2) * (x1 - x3)) / den
    return u, v


def fspl_db(length_m: float, freq_hz: float) -> float:
    return 20.0 * math.log10(4.0 * math.pi * length_m * freq_hz / SPEED_OF_LIGHT)


# ---------------------------------------------------------------- domain types

@dataclass(frozen=True)
class Node:
    id: str
    position: Point
    orientation_deg: float = 0.0


@dataclass(frozen=True)
class Reflector:
    start: Point
    end: Point
    loss_db: float = 10.0

    @property
    def segment(self) -> Segment:
        return (self.start, self.end)


@dataclass(frozen=True)
class Scene:
    nodes: tuple[Node, ...]
    reflectors: tuple[Reflector, ...] = ()
    carrier_frequency_hz: float = 28e9
    bandwidth_hz: float = 5e6
    subcarrier_count: int = 52
    sector_count: int = 12
    sector_beamwidth_deg: float = 30.0
    # None: noise referenced to the sounded link (snr_db below its unblocked power)
    noise_floor_dbm: float | None = None
    snr_db: float = 20.0
    tx_power_dbm: float = 20.0
    sector_gain_dbi: float = 15.0
    sensitivity_dbm: float = -78.0
    pattern: str = "ideal"
    rolloff_deg: float = 15.0
    sample_rate_hz: float = 3100.0
    samples_per_probe: int = 30
    rng_seed: int = 0

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def has_node(self, node_id: str) -> bool:
        return any(n.id == node_id for n in self.nodes)

    def with_node(self, node: Node) -> "Scene":
        others = tuple(n for n in self.nodes if n.id != node.id)
        return replace(self, nodes=others + (node,))

    def sector_of(self, node: Node | str, angle_deg: float) -> int:
        """The unique sector whose span contains ``angle_deg`` (absolute)."""
        if isinstance(node, str):
            node = self.node(node)
        rel = (angle_deg - node.orientation_deg) % 360.0
        s = int(rel // self.sector_beamwidth_deg)
        return min(s, self.sector_count - 1)

    def sector_center_deg(self, node: Node | str, sector: int) -> float:
        if isinstance(node, str):
            node = self.node(node)
        return (node.orientation_deg + (sector + 0.5) * self.sector_beamwidth_deg) % 360.0

    def sector_toward(self, node_id: str, target: Point) -> int:
        n = self.node(node_id)
        return self.sector_of(n, _angle_deg(n.position, target))

    def sector_gain_db(self, node: Node | str, sector: int, angle_deg: float) -> float:
        """Antenna gain of ``sector`` in direction ``angle_deg``."""
        if isinstance(node, str):
            node = self.node(node)
        if self.pattern == "ideal":
            return self.sector_gain_dbi if self.sector_of(node, angle_deg) == sector else NEG_INF
        off = abs((angle_deg - self.sector_center_deg(node, sector) + 180.0) % 360.0 - 180.0)
        half = self.sector_beamwidth_deg / 2.0
        if off <= half:
            return self.sector_gain_dbi
        if off >= half + self.rolloff_deg:
            return NEG_INF
        amp = 0.5 * (1.0 + math.cos(math.pi * (off - half) / self.rolloff_deg))
        return self.sector_gain_dbi + 20.0 * math.log10(amp)

    def subcarrier_offsets_hz(self) -> np.ndarray:
        K = self.subcarrier_count
        spacing = self.bandwidth_hz / K
        return (np.arange(K) - (K - 1) / 2.0) * spacing


@dataclass(frozen=True)
class ActivityEvent:
    start_time: float
    duration: float
    center: Point
    radius: float
    attenuation_db: float = 20.0
    kind: str = "artificial"
    # body-motion modulation of the attenuation; 0 gives a flat (binary) blockage
    fluctuation: float = 0.0
    wobble_hz: float = 0.0
    wobble_phase: float = 0.0

    @property
    def end_time(self) -> float:
        return self.start_time + self.duration

    def active(self, t: float) -> bool:
        return self.start_time <= t < self.end_time

    def attenuation_at(self, t: np.ndarray | float):
        """Attenuation in dB while active (callers mask the active interval)."""
        if self.fluctuation == 0.0:
            return self.attenuation_db + 0.0 * np.asarray(t, dtype=float)
        phase = 2.0 * np.pi * self.wobble_hz * (np.asarray(t, dtype=float) - self.start_time)
        depth = 0.5 + 0.5 * np.sin(phase + self.wobble_phase)
        return self.attenuation_db * (1.0 - self.fluctuation * depth)

    def blocks(self, segments: Iterable[Segment]) -> bool:
        return any(point_segment_distance(self.center, s) <= self.radius for s in segments)


@dataclass(frozen=True)
class ActivityParams:
    kind: str = "artificial"
    rate_per_min: float = 20.0
    window_sec: float = 90.0
    duration_range: tuple[float, float] | None = None
    attenuation_db: float = 20.0
    radius_m: float | None = None
    targets: tuple[Segment, ...] = ()
    fluctuation: float | None = None
    wobble_hz_range: tuple[float, float] = (2.0, 3.0)
    # artificial events sit this far from a target endpoint (hand at an antenna)
    near_endpoint_m: tuple[float, float] = (0.2, 0.6)
    # which endpoint artificial events gather at: "start", "end" or "either"
    anchor: str = "either"
    # daily events sit at this fraction range along a target segment
    interior_fraction: tuple[float, float] = (0.15, 0.85)

    def resolved(self) -> "ActivityParams":
        defaults = {
            "artificial": dict(duration_range=(0.08, 0.1), radius_m=0.1, fluctuation=0.0),
            "daily": dict(duration_range=(1.0, 3.0), radius_m=0.25, fluctuation=0.85),
        }
        if self.kind not in defaults:
            raise InvalidParams(f"unknown activity kind {self.kind!r}")
        d = defaults[self.kind]
        return replace(
            self,
            duration_range=self.duration_range or d["duration_range"],
            radius_m=self.radius_m if self.radius_m is not None else d["radius_m"],
            fluctuation=self.fluctuation if self.fluctuation is not None else d["fluctuation"],
        )


@dataclass(frozen=True)
class PropagationPath:
    kind: str
    vertices: tuple[Point, ...]
    length_m: float
    base_loss_db: float
    tx_sector: int
    rx_sector: int
    departure_deg: float
    arrival_deg: float

    @property
    def segments(self) -> list[Segment]:
        return [(self.vertices[i], self.vertices[i + 1]) for i in range(len(self.vertices) - 1)]


@dataclass
class CsiTrace:
    """Per-subcarrier CSI of one link direction, as received by ``owner``.

    ``samples`` has shape (K, alpha * n_rounds). ``sectors`` optionally labels
    each column with the owner's antenna sector (set by path hopping).
    """

    samples: np.ndarray
    validity: np.ndarray
    owner: str
    samples_per_probe: int
    n_rounds: int
    sample_rate: float = 3100.0
    sectors: np.ndarray | None = None

    def __post_init__(self):
        width = self.samples_per_probe * self.n_rounds
        if self.samples.ndim != 2 or self.samples.shape[1] != width:
            raise ValueError(
                f"samples must be (K, {width}), got {self.samples.shape}")
        if self.validity.shape != (width,):
            raise ValueError("validity length must equal the matrix width")
        if self.sectors is not None and self.sectors.shape != (width,):
            raise ValueError("sector labels must match the matrix width")

    @property
    def K(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    def amplitude(self) -> np.ndarray:
        return np.abs(self.samples)

    def times(self) -> np.ndarray:
        return np.arange(self.width) / self.sample_rate


# ---------------------------------------------------------------- scene building

_SCENE_KEYS = {
    "carrier_frequency_hz", "bandwidth_hz", "subcarrier_count", "sector_count",
    "sector_beamwidth_deg", "noise_floor_dbm", "snr_db", "tx_power_dbm",
    "sector_gain_dbi", "sensitivity_dbm", "pattern", "rolloff_deg",
    "sample_rate_hz", "samples_per_probe", "rng_seed",
}


def _point(v, what) -> Point:
    try:
        x, y = (float(v[0]), float(v[1]))
    except (TypeError, ValueError, IndexError, KeyError):
        raise InvalidConfig(f"{what}: expected a 2D point, got {v!r}")
    if not (math.isfinite(x) and math.isfinite(y)) or len(v) != 2:
        raise InvalidConfig(f"{what}: point must be two finite numbers")
    return (x, y)


def build_scene(config: Mapping) -> Scene:
    """Build and validate a :class:`Scene` from a plain mapping (parsed JSON)."""
    if "nodes" not in config or not config["nodes"]:
        raise InvalidConfig("scene needs at least one node")
    nodes = []
    seen = set()
    for i, n in enumerate(config["nodes"]):
        nid = str(n.get("id", ""))
        if not nid:
            raise InvalidConfig(f"nodes[{i}]: missing id")
        if nid in seen:
            raise InvalidConfig(f"nodes[{i}]: duplicate id {nid!r}")
        seen.add(nid)
        nodes.append(Node(nid, _point(n.get("position"), f"nodes[{i}].position"),
                          float(n.get("orientation_deg", 0.0))))
    reflectors = []
    for i, r in enumerate(config.get("reflectors", [])):
        s = _point(r.get("start"), f"reflectors[{i}].start")
        e = _point(r.get("end"), f"reflectors[{i}].end")
        if s == e:
            raise InvalidConfig(f"reflectors[{i}]: zero-length segment")
        reflectors.append(Reflector(s, e, float(r.get("loss_db", 10.0))))
    kwargs = {k: config[k] for k in _SCENE_KEYS if k in config}
    unknown = set(config) - _SCENE_KEYS - {"nodes", "reflectors"}
    if unknown:
        raise InvalidConfig(f"unknown scene keys: {sorted(unknown)}")
    scene = Scene(nodes=tuple(nodes), reflectors=tuple(reflectors), **kwargs)
    validate_scene(scene)
    return scene


def validate_scene(scene: Scene) -> None:
    if scene.subcarrier_count < 2:
        raise InvalidConfig("subcarrier_count must be >= 2")
    if scene.sector_count < 1:
        raise InvalidConfig("sector_count must be >= 1")
    if abs(scene.sector_count * scene.sector_beamwidth_deg - 360.0) > 1e-9:
        raise InvalidConfig(
            f"{scene.sector_count} sectors x {scene.sector_beamwidth_deg} deg "
            "must tile exactly 360 deg")
    if scene.pattern not in ("ideal", "raised_cosine"):
        raise InvalidConfig(f"unknown antenna pattern {scene.pattern!r}")
    if scene.samples_per_probe < 1 or scene.sample_rate_hz <= 0:
        raise InvalidConfig("probing cadence must be positive")
    for n in scene.nodes:
        for r in scene.reflectors:
            if point_segment_distance(n.position, r.segment) < 1e-6:
                raise InvalidConfig(f"reflector passes through node {n.id!r}")


# ---------------------------------------------------------------- paths and RSS

def enumerate_paths(scene: Scene, a: str, d: str) -> list[PropagationPath]:
    """LoS plus one single-bounce image path per reflector, cheapest first."""
    na, nd = scene.node(a), scene.node(d)
    pa, pd = na.position, nd.position
    f = scene.carrier_frequency_hz
    walls = [r.segment for r in scene.reflectors]
    paths = []
    if _dist(pa, pd) > 0 and not any(segments_cross((pa, pd), w) for w in walls):
        L = _dist(pa, pd)
        dep = _angle_deg(pa, pd)
        arr = _angle_deg(pd, pa)
        paths.append(PropagationPath("los", (pa, pd), L, fspl_db(L, f),
                                     scene.sector_of(na, dep), scene.sector_of(nd, arr), dep, arr))
    for j, refl in enumerate(scene.reflectors):
        seg = refl.segment
        # both endpoints must be on the same side of the reflector line
        if _cross(seg[0], seg[1], pa) * _cross(seg[0], seg[1], pd) <= 0:
            continue
        image = _mirror(pd, seg)
        hit = _line_intersection(pa, image, seg)
        if hit is None:
            continue
        u, v = hit
        if not (0.0 < u < 1.0 and 0.0 <= v <= 1.0):
            continue
        rp = (pa[0] + u * (image[0] - pa[0]), pa[1] + u * (image[1] - pa[1]))
        legs = [(pa, rp), (rp, pd)]
        others = [w for k, w in enumerate(walls) if k != j]
        if any(segments_cross(leg, w) for leg in legs for w in others):
            continue
        L = _dist(pa, rp) + _dist(rp, pd)
        dep = _angle_deg(pa, rp)
        arr = _angle_deg(pd, rp)
        paths.append(PropagationPath("reflected", (pa, rp, pd), L, fspl_db(L, f) + refl.loss_db,
                                     scene.sector_of(na, dep), scene.sector_of(nd, arr), dep, arr))
    paths.sort(key=lambda p: p.base_loss_db)
    return paths


def _path_gain_db(scene: Scene, tx: str, tx_sector: int, rx: str, rx_sector: int,
                  path: PropagationPath) -> float:
    """Antenna gains for a path enumerated from tx to rx."""
    return (scene.sector_gain_db(tx, tx_sector, path.departure_deg)
            + scene.sector_gain_db(rx, rx_sector, path.arrival_deg))


def _blocking_db(path: PropagationPath, schedule: Sequence[ActivityEvent], t: float) -> float:
    segs = path.segments
    total = 0.0
    for ev in schedule:
        if ev.active(t) and ev.blocks(segs):
            total += float(ev.attenuation_at(t))
    return total


def rss(scene: Scene, tx: str, tx_sector: int, rx: str, rx_sector: int, t: float = 0.0,
        schedule: Sequence[ActivityEvent] = ()) -> float:
    """Received power in dBm for a sector pair at time ``t``; -inf when no path joins them.

    Multiple paths joining the same sector pair add in power.
    """
    for s in (tx_sector, rx_sector):
        if not 0 <= s < scene.sector_count:
            raise IndexError(f"sector {s} out of range")
    total_mw = 0.0
    for p in enumerate_paths(scene, tx, rx):
        g = _path_gain_db(scene, tx, tx_sector, rx, rx_sector, p)
        if g == NEG_INF:
            continue
        dbm = scene.tx_power_dbm + g - p.base_loss_db - _blocking_db(p, schedule, t)
        total_mw += 10.0 ** (dbm / 10.0)
    return 10.0 * math.log10(total_mw) if total_mw > 0 else NEG_INF


# ---------------------------------------------------------------- activity

def generate_activity_schedule(params: ActivityParams, seed: int) -> list[ActivityEvent]:
    """Poisson arrivals with uniform durations; each event blocks one target segment."""
    p = params.resolved()
    lo, hi = p.duration_range
    if p.rate_per_min <= 0 or not math.isfinite(p.rate_per_min):
        raise InvalidParams("rate_per_min must be > 0")
    if not (0 < lo <= hi) or p.window_sec <= 0:
        raise InvalidParams("invalid duration range or window")
    if p.attenuation_db <= 0:
        raise InvalidParams("attenuation_db must be > 0")
    if p.anchor not in ("start", "end", "either"):
        raise InvalidParams(f"unknown anchor {p.anchor!r}")
    rng = rng_for(seed, "activity", p.kind)
    mean_gap = 60.0 / p.rate_per_min
    events = []
    t = rng.exponential(mean_gap)
    while t < p.window_sec:
        dur = float(rng.uniform(lo, hi))
        center = _place_event(p, rng)
        wobble = float(rng.uniform(*p.wobble_hz_range)) if p.fluctuation else 0.0
        phase = float(rng.uniform(0, 2 * np.pi)) if p.fluctuation else 0.0
        events.append(ActivityEvent(float(t), dur, center, float(p.radius_m), p.attenuation_db,
                                    p.kind, float(p.fluctuation), wobble, phase))
        t += rng.exponential(mean_gap)
    return events


def link_activity_schedule(params: ActivityParams, scene: "Scene", links: Sequence[tuple[str, str]],
                           seed: int, kinds: Iterable[str] = ("los", "reflected")) -> list[ActivityEvent]:
    """Merged schedule where every listed link sees activity at ``params.rate_per_min``.

    People move around the whole room, so a link that an attacker creates
    is disrupted as often as the legitimate one.
    """
    events = []
    for tx, rx in links:
        targets = path_segments(scene, tx, rx, kinds)
        if targets:
            events += generate_activity_schedule(replace(params, targets=targets),
                                                 derive_seed(seed, "link", tx, rx))
    return sorted(events, key=lambda e: e.start_time)


def _place_event(p: ActivityParams, rng: np.random.Generator) -> Point:
    if not p.targets:
        return (0.0, 0.0)
    (x1, y1), (x2, y2) = p.targets[int(rng.integers(len(p.targets)))]
    L = math.hypot(x2 - x1, y2 - y1)
    if p.kind == "artificial" and L > 0:
        off = min(float(rng.uniform(*p.near_endpoint_m)), L / 2)
        frac = off / L
        flip = rng.random() < 0.5
        if p.anchor == "end" or (p.anchor == "either" and flip):
            frac = 1.0 - frac
    else:
        frac = float(rng.uniform(*p.interior_fraction))
    return (x1 + frac * (x2 - x1), y1 + frac * (y2 - y1))


# ---------------------------------------------------------------- sounding

class LinkModel:
    """Time-resolved channel between two nodes over a fixed sampling grid."""

    def __init__(self, scene: Scene, tx: str, rx: str, times: np.ndarray,
                 schedule: Sequence[ActivityEvent], ref_noise_dbm: float):
        self.scene = scene
        self.tx, self.rx = tx, rx
        self.times = times
        self.paths = enumerate_paths(scene, tx, rx)
        self.ref_noise_dbm = ref_noise_dbm
        offsets = scene.subcarrier_offsets_hz()
        fk = scene.carrier_frequency_hz + offsets
        self._phase = [np.exp(-2j * np.pi * fk * p.length_m / SPEED_OF_LIGHT).astype(np.complex64)
                       for p in self.paths]
        self._atten = [self._path_attenuation(p, schedule) for p in self.paths]
        # weak diffuse echo: static, smooth ripple across subcarriers, shared by both link ends
        rng = rng_for(scene.rng_seed, "ripple", *sorted((tx, rx)))
        beta = rng.uniform(0.05, 0.15)
        tau = rng.uniform(5e-9, 30e-9)
        phi = rng.uniform(0, 2 * np.pi)
        self._ripple = (1.0 + beta * np.exp(-2j * np.pi * offsets * tau + 1j * phi)).astype(np.complex64)

    def _path_attenuation(self, path: PropagationPath, schedule) -> np.ndarray:
        att = np.zeros(self.times.shape, dtype=np.float64)
        segs = path.segments
        rate = self.scene.sample_rate_hz
        n = len(self.times)
        for ev in schedule:
            if not ev.blocks(segs):
                continue
            i0 = max(0, int(math.ceil(ev.start_time * rate - 1e-9)))
            i1 = min(n, int(math.ceil(ev.end_time * rate - 1e-9)))
            if i1 > i0:
                att[i0:i1] += ev.attenuation_at(self.times[i0:i1])
        return att

    def path_powers_dbm(self, tx_sector: int, rx_sector: int, cols=slice(None)):
        out = []
        for p, att in zip(self.paths, self._atten):
            g = _path_gain_db(self.scene, self.tx, tx_sector, self.rx, rx_sector, p)
            if g == NEG_INF:
                continue
            out.append((p, self.scene.tx_power_dbm + g - p.base_loss_db - att[cols]))
        return out

    def joined(self, tx_sector: int, rx_sector: int) -> bool:
        return any(_path_gain_db(self.scene, self.tx, tx_sector, self.rx, rx_sector, p) != NEG_INF
                   for p in self.paths)

    def rss_dbm(self, tx_sector: int, rx_sector: int, cols=slice(None)) -> np.ndarray:
        n = len(self.times[cols])
        total = np.zeros(n)
        for _, dbm in self.path_powers_dbm(tx_sector, rx_sector, cols):
            total += 10.0 ** (dbm / 10.0)
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(total)

    def channel(self, tx_sector: int, rx_sector: int, cols=slice(None)) -> np.ndarray:
        """Noise-free CSI of shape (K, n_cols) in reference-noise units."""
        n = len(self.times[cols])
        h = np.zeros((self.scene.subcarrier_count, n), dtype=np.complex64)
        for phase, p, att in zip(self._phase, self.paths, self._atten):
            g = _path_gain_db(self.scene, self.tx, tx_sector, self.rx, rx_sector, p)
            if g == NEG_INF:
                continue
            dbm = self.scene.tx_power_dbm + g - p.base_loss_db - att[cols]
            amp = (10.0 ** ((dbm - self.ref_noise_dbm) / 20.0)).astype(np.float32)
            h += phase[:, None] * amp[None, :]
        return h * self._ripple[:, None]


def add_noise(h: np.ndarray, noise_scale: float, rng: np.random.Generator) -> np.ndarray:
    if noise_scale == 0:
        return h.copy()
    noise = rng.standard_normal((h.shape[0], 2 * h.shape[1]), dtype=np.float32).view(np.complex64)
    noise *= np.float32(noise_scale / math.sqrt(2.0))
    noise += h
    return noise


def sampling_grid(scene: Scene, duration: float) -> tuple[int, np.ndarray]:
    alpha = scene.samples_per_probe
    n_rounds = int(duration * scene.sample_rate_hz // alpha)
    if n_rounds < 1:
        raise InvalidParams("duration shorter than one probing round")
    return n_rounds, np.arange(alpha * n_rounds) / scene.sample_rate_hz


def reference_noise_dbm(scene: Scene, link: LinkModel, pairs: Iterable[tuple[int, int]]) -> float:
    if scene.noise_floor_dbm is not None:
        return scene.noise_floor_dbm
    best = NEG_INF
    for sa, sd in pairs:
        for p in link.paths:
            g = _path_gain_db(scene, link.tx, sa, link.rx, sd, p)
            if g != NEG_INF:
                best = max(best, scene.tx_power_dbm + g - p.base_loss_db)
    if best == NEG_INF:
        raise NoViablePath("no path joins the chosen sectors")
    return best - scene.snr_db


@dataclass
class SoundingRun:
    """Both ends of a fixed-beam sounding plus what an eavesdropper needs to replay it."""

    trace_a: CsiTrace
    trace_d: CsiTrace
    scene: Scene
    a: str
    d: str
    tx_sector_a: int
    rx_sector_d: int
    schedule: list[ActivityEvent]
    duration: float
    ref_noise_dbm: float
    noise_scale: float
    seed: int
    extra: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.trace_a
        yield self.trace_d


def run_sounding(scene: Scene, a: str, d: str, tx_sector_a: int, rx_sector_d: int,
                 duration: float, schedule: Sequence[ActivityEvent] = (), *,
                 seed: int | None = None, noise_scale: float = 1.0) -> SoundingRun:
    """Probe exchange between ``a`` (on ``tx_sector_a``) and ``d`` (on ``rx_sector_d``).

    Unpacks as ``trace_a, trace_d = run_sounding(...)``.
    """
    seed = scene.rng_seed if seed is None else seed
    n_rounds, times = sampling_grid(scene, duration)
    link = LinkModel(scene, a, d, times, schedule, 0.0)
    if not link.joined(tx_sector_a, rx_sector_d):
        raise NoViablePath(f"no path joins {a}:{tx_sector_a} and {d}:{rx_sector_d}")
    ref = reference_noise_dbm(scene, link, [(tx_sector_a, rx_sector_d)])
    link.ref_noise_dbm = ref
    h = link.channel(tx_sector_a, rx_sector_d)
    valid = link.rss_dbm(tx_sector_a, rx_sector_d) >= scene.sensitivity_dbm
    traces = []
    for owner in (a, d):
        x = add_noise(h, noise_scale, rng_for(seed, "noise", owner))
        x[:, ~valid] = 0
        traces.append(CsiTrace(x, valid.copy(), owner, scene.samples_per_probe, n_rounds,
                               scene.sample_rate_hz))
    return SoundingRun(traces[0], traces[1], scene, a, d, tx_sector_a, rx_sector_d,
                       list(schedule), duration, ref, noise_scale, seed)


def aligned_sectors(scene: Scene, a: str, d: str) -> tuple[int, int]:
    """Sector pair of the strongest path between a and d (what beam alignment picks)."""
    paths = enumerate_paths(scene, a, d)
    if not paths:
        raise NoViablePath(f"no path between {a} and {d}")
    return paths[0].tx_sector, paths[0].rx_sector


def path_segments(scene: Scene, a: str, d: str, kinds: Iterable[str] = ("los", "reflected")) -> tuple[Segment, ...]:
    kinds = set(kinds)
    segs = []
    for p in enumerate_paths(scene, a, d):
        if p.kind in kinds:
            segs.extend(p.segments)
    return tuple(segs)


def two_node_scene(distance_m: float = 4.0, *, reflector_offset_m: float | None = None,
                   **scene_kwargs) -> Scene:
    """A at the origin facing D along +x, D centred in A's boresight sector.

    With ``reflector_offset_m`` a wall parallel to the link is added that far
    to the side, giving one reflected path.
    """
    bw = scene_kwargs.get("sector_beamwidth_deg", 30.0)
    # orient so the link direction sits at the middle of sector 0 on both ends
    a = Node("A", (0.0, 0.0), -bw / 2.0)
    d = Node("D", (float(distance_m), 0.0), 180.0 - bw / 2.0)
    refl = ()
    if reflector_offset_m is not None:
        y = float(reflector_offset_m)
        refl = (Reflector((-2.0, y), (distance_m + 2.0, y), 10.0),)
    scene = Scene(nodes=(a, d), reflectors=refl, **scene_kwargs)
    validate_scene(scene)
    return scene


def two_path_scene(distance_m: float = 4.0, *, separation_deg: float = 30.0, **scene_kwargs) -> Scene:
    """A and D with one LoS path and one wall reflection.

    With the default 12 x 30 deg sectors the LoS path joins A's sector 1 and
    D's sector 5, and the reflection joins A's sector 2 and D's sector 4; the
    other two combinations of those sectors are dead.
    """
    bw = scene_kwargs.get("sector_beamwidth_deg", 30.0)
    los = 45.0
    ux, uy = math.cos(math.radians(los)), math.sin(math.radians(los))
    a = Node("A", (0.0, 0.0), los - 1.5 * bw)
    d = Node("D", (distance_m * ux, distance_m * uy), los + 180.0 - 5.5 * bw)
    # wall parallel to A-D, offset to the left so both ends see it separation_deg off the LoS
    h = distance_m / 2.0 * math.tan(math.radians(separation_deg))
    ox, oy = -uy * h, ux * h
    start = (ox - 2.0 * ux, oy - 2.0 * uy)
    end = (ox + (distance_m + 2.0) * ux, oy + (distance_m + 2.0) * uy)
    scene = Scene(nodes=(a, d), reflectors=(Reflector(start, end, 10.0),), **scene_kwargs)
    validate_scene(scene)
    return scene
