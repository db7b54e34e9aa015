"""Scenario runner: config file -> simulate -> fingerprint -> pair -> attacks -> metrics.

Every random draw of run ``i`` derives from ``derive_seed(master_seed, "run", i)``,
so results do not depend on run order or on how many workers execute them.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import math
import re
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import adversary as adv
from .errors import ConfigError, JellybeanError, UnknownParam
from .fingerprint import AfParams, AfStages, default_af_params, fingerprint_stages
from .keyagree import pair_fingerprints
from .metrics import report as metric_report
from .rs import RsCode
from .seeding import derive_seed
from .simenv import (ActivityParams, Scene, SoundingRun, aligned_sectors, build_scene,
                     generate_activity_schedule, link_activity_schedule, path_segments, run_sounding, two_node_scene,
                     two_path_scene)
from .uph import (UphRun, generate_hop_sequence, path_discovery, run_uph_sounding, viable_pairs)

REPORT_VERSION = 1

# parameters a sweep may vary; "af.*" and "code.*" reuse the simulated traces
SWEEP_PARAMS = {
    "af.window_sec": float,
    "af.downsample": int,
    "af.lsb_count": int,
    "af.threshold_window_sec": float,
    "af.threshold_guard": float,
    "code.tolerance": float,
    "activity.rate_per_min": float,
    "scene.distance_m": float,
    "uph.dwell_sec": float,
    "adversary.angle_deg": float,
    "duration_sec": float,
}

# a camera sees the whole body move, so it over-estimates how long the beam was blocked
KEYLOGGER_BIAS = {"artificial": (10.0, 30.0), "daily": (1.5, 3.0)}

BASE_COLUMNS = [
    "run", "run_seed", "sweep_param", "sweep_value", "protocol", "activity", "events",
    "matched_slots", "bits_A", "bits_D", "code_n", "code_k", "bmr_AD", "accepted",
    "sbr", "apen", "apen_p", "nist_pass",
]

ADVERSARY_COLUMNS = {
    "eavesdropper": ["observed_bits", "bmr_randomGuess", "bmr_bitReuse", "bmr_noFill", "accepted"],
    "keylogger": ["bits", "bmr", "accepted"],
    "beamStealer": ["am_accepted", "md_accepted", "mitm_success"],
    "colocatedUph": ["bits", "bmr", "accepted"],
}


# ---------------------------------------------------------------- config loading

def load_schema(name: str) -> dict:
    return json.loads(resources.files("jellybean").joinpath("schemas", name).read_text())


def _json_lines(text: str) -> dict[tuple, int]:
    """Line number of every value in a (valid) JSON document, keyed by its path."""
    dec = json.JSONDecoder()
    ws = re.compile(r"\s*")
    where: dict[tuple, int] = {}

    def skip(i):
        return ws.match(text, i).end()

    def value(i, path):
        i = skip(i)
        where[path] = i
        if text[i] == "{":
            i = skip(i + 1)
            if text[i] == "}":
                return i + 1
            while True:
                key, i = dec.raw_decode(text, skip(i))
                i = skip(i)
                i = skip(value(i + 1, path + (key,)))
                if text[i] == ",":
                    i += 1
                    continue
                return i + 1
        if text[i] == "[":
            i = skip(i + 1)
            if text[i] == "]":
                return i + 1
            k = 0
            while True:
                i = skip(value(i, path + (k,)))
                k += 1
                if text[i] == ",":
                    i += 1
                    continue
                return i + 1
        return dec.raw_decode(text, i)[1]

    value(0, ())
    return {p: text.count("\n", 0, i) + 1 for p, i in where.items()}


def _path_str(path) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


@dataclass
class ScenarioConfig:
    raw: dict
    source: str = "<config>"
    lines: dict = field(default_factory=dict, repr=False)

    def error(self, path, msg) -> ConfigError:
        path = tuple(path)
        probe = path
        while probe and probe not in self.lines:
            probe = probe[:-1]
        line = self.lines.get(probe)
        at = f"{self.source}:{line}" if line else self.source
        return ConfigError(f"{at}: {_path_str(path)}: {msg}")

    @property
    def name(self) -> str:
        return self.raw.get("name") or Path(self.source).stem

    @property
    def master_seed(self) -> int:
        return int(self.raw.get("master_seed", 0))

    @property
    def protocol(self) -> str:
        return self.raw.get("protocol", "jellybean")

    @property
    def runs(self) -> int:
        return int(self.raw.get("runs", 1))

    @property
    def duration(self) -> float:
        return float(self.raw.get("duration_sec", 90.0))

    @property
    def link(self) -> tuple[str, str]:
        lk = self.raw.get("link", {})
        return lk.get("a", "A"), lk.get("d", "D")

    @property
    def activity_kind(self) -> str:
        return self.raw.get("activity", {}).get("kind", "artificial")

    def with_seed(self, seed: int) -> "ScenarioConfig":
        raw = copy.deepcopy(self.raw)
        raw["master_seed"] = int(seed)
        return ScenarioConfig(raw, self.source, self.lines)


def config_from_dict(raw: dict, source: str = "<config>", lines: dict | None = None) -> ScenarioConfig:
    cfg = ScenarioConfig(copy.deepcopy(raw), source, lines or {})
    validator = jsonschema.Draft202012Validator(load_schema("config.schema.json"))
    errors = sorted(validator.iter_errors(cfg.raw), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        raise cfg.error(e.absolute_path, e.message)
    _check_semantics(cfg)
    return cfg


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"{path}: cannot read config: {e.strerror}") from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: invalid JSON: {e.msg} (column {e.colno})") from e
    return config_from_dict(raw, str(path), _json_lines(text))


def _check_semantics(cfg: ScenarioConfig) -> None:
    """Checks a schema cannot express: node references, sweep whitelist."""
    scene_cfg = cfg.raw.get("scene", {})
    if "nodes" in scene_cfg:
        ids = {n["id"] for n in scene_cfg["nodes"]}
    else:
        ids = {"A", "D"}
    for key in ("a", "d"):
        node = cfg.raw.get("link", {}).get(key, key.upper())
        if node not in ids:
            raise cfg.error(("link", key), f"unknown node {node!r} (scene has {sorted(ids)})")
    a, d = cfg.link
    if a == d:
        raise cfg.error(("link",), "link endpoints must differ")
    for i, spec in enumerate(cfg.raw.get("adversaries", [])):
        pos = spec.get("position")
        if isinstance(pos, str) and pos not in ids:
            raise cfg.error(("adversaries", i, "position"), f"unknown node {pos!r}")
        if spec["kind"] == "colocatedUph" and cfg.protocol != "jellybeanPlus":
            raise cfg.error(("adversaries", i, "kind"), "colocatedUph needs protocol jellybeanPlus")
        if spec["kind"] == "beamStealer" and "position" not in spec:
            raise cfg.error(("adversaries", i), "beamStealer needs a position")
    sw = cfg.raw.get("sweep")
    if sw is not None:
        if sw["param"] not in SWEEP_PARAMS:
            raise cfg.error(("sweep", "param"),
                            f"unknown sweep parameter {sw['param']!r}; allowed: {sorted(SWEEP_PARAMS)}")
        if sw["param"] == "scene.distance_m" and "preset" not in scene_cfg:
            raise cfg.error(("sweep", "param"), "scene.distance_m needs a scene preset")


# ---------------------------------------------------------------- building blocks

def scene_from_config(cfg: ScenarioConfig, seed: int = 0) -> Scene:
    sc = dict(cfg.raw.get("scene", {}))
    try:
        if "preset" in sc:
            preset = sc.pop("preset")
            dist = float(sc.pop("distance_m", 4.0))
            sc.setdefault("rng_seed", seed)
            if preset == "two_node":
                off = sc.pop("reflector_offset_m", None)
                return two_node_scene(dist, reflector_offset_m=off, **sc)
            sep = float(sc.pop("separation_deg", 30.0))
            return two_path_scene(dist, separation_deg=sep, **sc)
        sc.setdefault("rng_seed", seed)
        return build_scene(sc)
    except (JellybeanError, TypeError) as e:
        raise cfg.error(("scene",), str(e)) from e


def activity_from_config(cfg: ScenarioConfig, scene: Scene) -> ActivityParams:
    act = dict(cfg.raw.get("activity", {}))
    target = act.pop("targets", "link")
    a, d = cfg.link
    kinds = ("los",) if target == "los" else ("los", "reflected")
    for k in ("duration_range", "wobble_hz_range", "near_endpoint_m", "interior_fraction"):
        if k in act:
            act[k] = tuple(act[k])
    return ActivityParams(window_sec=cfg.duration, targets=path_segments(scene, a, d, kinds), **act)


def af_from_config(cfg: ScenarioConfig, kind: str | None = None) -> AfParams:
    kind = kind or cfg.activity_kind
    base = default_af_params(kind)
    over = cfg.raw.get("af_params", {}).get(kind, {})
    try:
        return replace(base, **over)
    except ValueError as e:
        raise cfg.error(("af_params", kind), str(e)) from e


def code_from_config(cfg: ScenarioConfig, n_bits: int) -> RsCode:
    c = cfg.raw.get("code", {})
    m = int(c.get("m", 8))
    if "n" in c:
        return RsCode(m, int(c["n"]), int(c["k"]))
    return RsCode.fitted(n_bits, m=m, tolerance=float(c.get("tolerance", 0.2)))


@dataclass
class Simulation:
    scene: Scene
    schedule: list
    run: SoundingRun | UphRun
    run_seed: int
    viable: set = field(default_factory=set)
    discovery: tuple | None = None


def simulate(cfg: ScenarioConfig, run_index: int) -> Simulation:
    run_seed = derive_seed(cfg.master_seed, "run", run_index)
    scene = scene_from_config(cfg, run_seed)
    a, d = cfg.link
    params = activity_from_config(cfg, scene)
    schedule = generate_activity_schedule(params, derive_seed(run_seed, "activity"))
    noise = float(cfg.raw.get("noise_scale", 1.0))
    if cfg.protocol == "jellybean":
        sa, sd = aligned_sectors(scene, a, d)
        run = run_sounding(scene, a, d, sa, sd, cfg.duration, schedule, seed=run_seed,
                           noise_scale=noise)
        return Simulation(scene, schedule, run, run_seed, {(sa, sd)})
    uph = cfg.raw.get("uph", {})
    eps = float(uph.get("epsilon_db", 3.0))
    dwell = float(uph.get("dwell_sec", 0.05))
    va, vd = path_discovery(scene, a, d, epsilon=eps, seed=run_seed)
    seq_a = generate_hop_sequence(va, dwell, cfg.duration, derive_seed(run_seed, "hop"))
    seq_d = generate_hop_sequence(vd, dwell, cfg.duration, derive_seed(run_seed, "hop"))
    run = run_uph_sounding(scene, a, d, seq_a, seq_d, schedule, cfg.duration, seed=run_seed,
                           noise_scale=noise)
    return Simulation(scene, schedule, run, run_seed, viable_pairs(scene, a, d, va, vd, eps), (va, vd))


def _stages(trace, p: AfParams) -> AfStages | None:
    try:
        return fingerprint_stages(trace, p)
    except JellybeanError:
        return None


def _num(x):
    if x is None:
        return None
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    return None if math.isnan(x) else x


def _adversary_position(cfg: ScenarioConfig, spec: dict, scene: Scene):
    pos = spec.get("position")
    if isinstance(pos, str):
        return scene.node(pos).position
    if pos is not None:
        return (float(pos[0]), float(pos[1]))
    a, d = cfg.link
    return adv.eavesdropper_position(scene, a, d, float(spec.get("angle_deg", 0.0)))


def _attack(cfg, sim: Simulation, p: AfParams, spec: dict, idx: int, st_a: AfStages | None,
            code: RsCode | None) -> dict:
    kind = spec["kind"]
    seed = derive_seed(sim.run_seed, "adversary", idx)
    a, d = cfg.link
    f_a = st_a.fingerprint if st_a is not None else None
    out = {}
    if kind == "eavesdropper":
        pos = _adversary_position(cfg, spec, sim.scene)
        if isinstance(sim.run, UphRun):
            trace_m = adv.eavesdrop_uph_trace(sim.scene, pos, sim.run)
        else:
            trace_m = adv.eavesdrop_trace(sim.scene, pos, sim.run)
        f_m = adv.eavesdrop_fingerprint(trace_m, p)
        out["observed_bits"] = len(f_m)
        if f_a is None or len(f_a) == 0:
            return out
        for s in adv.FILL_STRATEGIES:
            out[f"bmr_{s}"] = adv.strategy_bmr(f_a, f_m, s, seed)
        bits, mask = adv.align_to_reference(f_a, f_m)
        strategy = spec.get("fill_strategy", "randomGuess")
        if not mask.any():
            strategy = "randomGuess"
        filled = adv.fill_missing(bits, mask, strategy, seed)
        out["accepted"] = adv.attacker_open(f_a, filled, code, seed).accepted if code else False
    elif kind == "keylogger":
        if st_a is None:
            return out
        bias = spec.get("duration_bias", KEYLOGGER_BIAS[cfg.activity_kind])
        bias = tuple(bias) if isinstance(bias, list) else bias
        f_k = adv.keylog_fingerprint(sim.schedule, float(spec.get("frame_rate", 30.0)), bias,
                                     (len(st_a.gamma.values), st_a.gamma.sample_rate), p, seed)
        out["bits"] = len(f_k)
        out["bmr"] = adv.strategy_bmr(f_a, f_k, "randomGuess", seed)
        out["accepted"] = adv.attacker_open(f_a, f_k, code, seed).accepted if code else False
    elif kind == "beamStealer":
        pos = _adversary_position(cfg, spec, sim.scene)
        scene_m = adv.place_eavesdropper(sim.scene, a, pos)
        mode = "basic" if cfg.protocol == "jellybean" else "plus"
        dwell = float(cfg.raw.get("uph", {}).get("dwell_sec", 0.05))
        extra = link_activity_schedule(activity_from_config(cfg, sim.scene), scene_m,
                                       [(a, "M"), ("M", d)], derive_seed(sim.run_seed, "activity", "M"),
                                       kinds=("los",))
        schedule = sorted(sim.schedule + extra, key=lambda e: e.start_time)
        res = adv.beam_steal(scene_m, a, d, "M", schedule, p, mode=mode, duration=cfg.duration,
                             seed=seed, dwell=dwell, discovery=sim.discovery)
        out["am_accepted"] = bool(res.session_am and res.session_am.accepted)
        out["md_accepted"] = bool(res.session_md and res.session_md.accepted)
        out["mitm_success"] = res.mitm_success
    elif kind == "colocatedUph":
        dwell = spec.get("dwell_sec")
        res = adv.colocated_uph_attack(sim.run, sorted(sim.viable), dwell, seed, p, f_a=f_a,
                                       mode=spec.get("mode", "hop"))
        out["bits"] = len(res.f_m)
        if f_a is None or len(f_a) == 0:
            return out
        out["bmr"] = res.bmr_vs_a
        out["accepted"] = adv.attacker_open(f_a, res.f_m, code, seed).accepted if code else False
    return out


def evaluate(cfg: ScenarioConfig, sim: Simulation, run_index: int, p: AfParams | None = None,
             sweep: tuple[str, object] | None = None, with_attacks: bool = True,
             dump_dir: Path | None = None) -> dict:
    """One report row for a simulated run."""
    p = p or af_from_config(cfg)
    run = sim.run
    st_a, st_d = _stages(run.trace_a, p), _stages(run.trace_d, p)
    row = {c: None for c in BASE_COLUMNS}
    row.update(run=run_index, run_seed=str(sim.run_seed), protocol=cfg.protocol,
               activity=cfg.activity_kind, events=len(sim.schedule),
               matched_slots=getattr(run, "matched", None), accepted=False)
    if sweep is not None:
        row["sweep_param"], row["sweep_value"] = sweep[0], _num(sweep[1])
    code = None
    if st_a is not None and st_d is not None:
        f_a, f_d = st_a.fingerprint, st_d.fingerprint
        row["bits_A"], row["bits_D"] = len(f_a), len(f_d)
        try:
            code = code_from_config(cfg, min(len(f_a), len(f_d)))
        except ValueError:
            code = None
        outcome = pair_fingerprints(f_a, f_d, code=code, seed=derive_seed(sim.run_seed, "pair"))
        row["accepted"] = outcome.accepted
        row["bmr_AD"] = outcome.bmr if len(f_a) and len(f_d) else None
        if code is not None:
            row["code_n"], row["code_k"] = code.n, code.k
        if len(f_a) and len(f_d):
            rep = metric_report(f_a, f_d, sim.schedule)
            row.update(sbr=rep.sbr, apen=rep.apen, apen_p=rep.apen_p, nist_pass=rep.nist_pass)
    if with_attacks:
        for i, spec in enumerate(cfg.raw.get("adversaries", [])):
            got = _attack(cfg, sim, p, spec, i, st_a, code)
            for col in ADVERSARY_COLUMNS[spec["kind"]]:
                row[f"{spec['kind']}{i}_{col}"] = got.get(col)
    if dump_dir is not None:
        tag = f"run{run_index:03d}" + ("" if sweep is None else f"_{sweep[0]}={sweep[1]}")
        for owner, st in ((run.trace_a.owner, st_a), (run.trace_d.owner, st_d)):
            if st is not None:
                write_stage_dump(dump_dir / f"{tag}_{owner}.csv", st)
    return {k: _num(v) if not isinstance(v, str) else v for k, v in row.items()}


def write_stage_dump(path: Path, st: AfStages) -> None:
    """Downsampled variance, detection bits and threshold of one pipeline run."""
    path.parent.mkdir(parents=True, exist_ok=True)
    g = st.gamma
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "time_sec", "gamma", "B", "tau"])
        for i, (v, b) in enumerate(zip(g.values, st.B)):
            w.writerow([i, repr(i / g.sample_rate), repr(float(v)), int(b), repr(float(st.tau))])
    Path(str(path)[:-4] + "_fingerprint.txt").write_text(str(st.fingerprint) + "\n")


# ---------------------------------------------------------------- orchestration

def apply_param(raw: dict, param: str, value) -> dict:
    """Copy of ``raw`` with one whitelisted parameter set to ``value``."""
    if param not in SWEEP_PARAMS:
        raise UnknownParam(f"unknown sweep parameter {param!r}; allowed: {sorted(SWEEP_PARAMS)}")
    value = SWEEP_PARAMS[param](value)
    out = copy.deepcopy(raw)
    section, _, key = param.partition(".")
    if param == "duration_sec":
        out["duration_sec"] = value
    elif section == "af":
        kind = out.get("activity", {}).get("kind", "artificial")
        out.setdefault("af_params", {}).setdefault(kind, {})[key] = value
    elif section == "adversary":
        for spec in out.get("adversaries", []):
            if spec["kind"] == "eavesdropper":
                spec.pop("position", None)
                spec[key] = value
    else:
        out.setdefault(section, {})[key] = value
    return out


def _sim_key(raw: dict) -> str:
    """Parts of the config that influence the simulated traces."""
    keep = {k: v for k, v in raw.items() if k not in ("af_params", "code", "adversaries",
                                                       "sweep", "output", "runs", "name")}
    return json.dumps(keep, sort_keys=True)


def _run_job(args) -> list[dict]:
    raw, source, run_index, points, with_attacks, dump_dir = args
    base = config_from_dict(raw, source)
    rows = []
    cached_key, cached = None, None
    for sweep in points:
        cfg = base if sweep is None else config_from_dict(apply_param(base.raw, *sweep), source)
        key = _sim_key(cfg.raw)
        if key != cached_key:
            cached_key, cached = key, None
            cached = simulate(cfg, run_index)
        rows.append(evaluate(cfg, cached, run_index, sweep=sweep, with_attacks=with_attacks,
                             dump_dir=None if dump_dir is None else Path(dump_dir)))
    return rows


def _execute(cfg: ScenarioConfig, points: list, with_attacks: bool, parallel: int,
             dump_dir: Path | None) -> list[dict]:
    """Rows ordered by (sweep point, run) whatever the execution order."""
    jobs = [(cfg.raw, cfg.source, i, points, with_attacks, None if dump_dir is None else str(dump_dir))
            for i in range(cfg.runs)]
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            per_run = list(pool.map(_run_job, jobs))
    else:
        per_run = [_run_job(j) for j in jobs]
    return [per_run[r][k] for k in range(len(points)) for r in range(cfg.runs)]


def columns_for(cfg: ScenarioConfig, with_attacks: bool = True) -> list[str]:
    cols = list(BASE_COLUMNS)
    if with_attacks:
        for i, spec in enumerate(cfg.raw.get("adversaries", [])):
            cols += [f"{spec['kind']}{i}_{c}" for c in ADVERSARY_COLUMNS[spec["kind"]]]
    return cols


def _mean(xs):
    xs = [x for x in xs if x is not None]
    return statistics.fmean(xs) if xs else None


def _fraction(xs):
    xs = [x for x in xs if x is not None]
    return sum(bool(x) for x in xs) / len(xs) if xs else None


def summarize(rows: list[dict]) -> dict:
    ps = [r["apen_p"] for r in rows if r["apen_p"] is not None]
    return {
        "runs": len(rows),
        "accepted_fraction": _fraction([r["accepted"] for r in rows]),
        "bmr_AD_mean": _mean([r["bmr_AD"] for r in rows]),
        "bmr_AD_max": max((r["bmr_AD"] for r in rows if r["bmr_AD"] is not None), default=None),
        "apen_p_median": statistics.median(ps) if ps else None,
        "nist_pass_fraction": _fraction([r["nist_pass"] for r in rows]),
    }


def _trend(values: list[float]) -> str:
    d = np.diff(values)
    if np.all(d <= 1e-12):
        return "non_increasing"
    if np.all(d >= -1e-12):
        return "non_decreasing"
    return "mixed"


SELECTION_RULE = "smallest value with mean bmr_AD < 0.2 and median ApEn p-value > 0.01"


def sweep_summary(param: str, values: list, rows: list[dict]) -> dict:
    points = []
    for v in values:
        sel = [r for r in rows if r["sweep_value"] == _num(SWEEP_PARAMS[param](v))]
        s = summarize(sel)
        s["value"] = _num(SWEEP_PARAMS[param](v))
        points.append(s)
    ok = [pt["value"] for pt in points
          if pt["bmr_AD_mean"] is not None and pt["bmr_AD_mean"] < 0.2
          and pt["apen_p_median"] is not None and pt["apen_p_median"] > 0.01]
    ordered = sorted(points, key=lambda pt: pt["value"])
    bmrs = [pt["bmr_AD_mean"] for pt in ordered]
    return {
        "param": param,
        "points": points,
        "selection_rule": SELECTION_RULE,
        "selected": min(ok) if ok else None,
        "bmr_trend": _trend(bmrs) if None not in bmrs and len(bmrs) > 1 else None,
    }


@dataclass
class ScenarioReport:
    rows: list[dict]
    columns: list[str]
    document: dict
    csv_text: str
    json_text: str


def rows_to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if r.get(c) is None else (repr(r[c]) if isinstance(r[c], float) else
                    str(int(r[c])) if isinstance(r[c], bool) else str(r[c])) for c in columns])
    return buf.getvalue()


def build_report(cfg: ScenarioConfig, rows: list[dict], columns: list[str],
                 sweep: dict | None = None) -> ScenarioReport:
    doc = {
        "format": "jellybean-report",
        "version": REPORT_VERSION,
        "scenario": cfg.name,
        "master_seed": cfg.master_seed,
        "protocol": cfg.protocol,
        "activity": cfg.activity_kind,
        "duration_sec": cfg.duration,
        "columns": columns,
        "rows": [{c: r.get(c) for c in columns} for r in rows],
        "summary": summarize(rows),
    }
    if sweep is not None:
        doc["sweep"] = sweep
    jsonschema.validate(doc, load_schema("report.schema.json"))
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    return ScenarioReport(rows, columns, doc, rows_to_csv(rows, columns), text)


def write_report(rep: ScenarioReport, out_dir: Path, stem: str) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out_dir / f"{stem}.csv", out_dir / f"{stem}.json"
    csv_path.write_text(rep.csv_text)
    json_path.write_text(rep.json_text)
    return csv_path, json_path


def run_scenario(cfg: ScenarioConfig, out_dir=None, *, parallel: int = 1, dump_stages: bool = False,
                 with_attacks: bool = True) -> ScenarioReport:
    """Run every seeded repetition of a scenario; writes ``<name>.csv/json`` when ``out_dir`` is set."""
    out = None if out_dir is None else Path(out_dir)
    dump = out / "stages" if (dump_stages and out is not None) else None
    rows = _execute(cfg, [None], with_attacks, parallel, dump)
    rep = build_report(cfg, rows, columns_for(cfg, with_attacks))
    if out is not None:
        write_report(rep, out, cfg.name)
    return rep


def run_sweep(cfg: ScenarioConfig, param: str | None = None, values=None, out_dir=None, *,
              parallel: int = 1, dump_stages: bool = False, with_attacks: bool = False) -> ScenarioReport:
    """Run the scenario once per value; reports per-value metrics plus the selected value."""
    sw = cfg.raw.get("sweep", {})
    param = param or sw.get("param")
    values = list(sw.get("values", []) if values is None else values)
    if param not in SWEEP_PARAMS:
        raise UnknownParam(f"unknown sweep parameter {param!r}; allowed: {sorted(SWEEP_PARAMS)}")
    if not values:
        raise UnknownParam(f"sweep over {param!r} needs at least one value")
    for v in values:
        config_from_dict(apply_param(cfg.raw, param, v), cfg.source)
    out = None if out_dir is None else Path(out_dir)
    dump = out / "stages" if (dump_stages and out is not None) else None
    points = [(param, SWEEP_PARAMS[param](v)) for v in values]
    rows = _execute(cfg, points, with_attacks, parallel, dump)
    rep = build_report(cfg, rows, columns_for(cfg, with_attacks), sweep_summary(param, values, rows))
    if out is not None:
        write_report(rep, out, f"{cfg.name}-sweep-{param}")
    return rep
