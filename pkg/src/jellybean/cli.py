"""Command-line entry point: ``jellybean <subcommand> ...``.

Exit status is 0 when a run completes (a rejected pairing is a result, not
an error), 1 for pipeline errors and 2 for bad arguments or configs.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import jsonschema

from . import scenario as sc
from .errors import ConfigError, JellybeanError, UnknownParam
from .fingerprint import AfParams, bits_to_str, default_af_params, fingerprint
from .keyagree import pair_fingerprints
from .seeding import derive_seed
from .traceio import load_trace, save_trace
from .uph import DiscoveryTiming, discovery_time, export_hops_csv

log = logging.getLogger("jellybean")

OUT_ENV = "JELLYBEAN_OUT"
DEFAULT_OUT = "jellybean-out"
FINGERPRINT_FORMAT = "jellybean-fingerprint"


def output_dir(args, cfg: sc.ScenarioConfig | None = None) -> Path:
    """--out, then $JELLYBEAN_OUT, then the config's output.dir, then ./jellybean-out."""
    if getattr(args, "out", None):
        return Path(args.out)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    if cfg is not None and cfg.raw.get("output", {}).get("dir"):
        return Path(cfg.raw["output"]["dir"])
    return Path(DEFAULT_OUT)


def _config(args) -> sc.ScenarioConfig:
    if not args.config:
        raise ConfigError("--config is required for this subcommand")
    cfg = sc.load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _print_summary(rep: sc.ScenarioReport, paths=None) -> None:
    s = rep.document["summary"]
    def fmt(v):
        return "-" if v is None else (f"{v:.4f}" if isinstance(v, float) else str(v))

    print(f"scenario {rep.document['scenario']}: {s['runs']} run(s)")
    for k in ("accepted_fraction", "bmr_AD_mean", "bmr_AD_max", "apen_p_median", "nist_pass_fraction"):
        print(f"  {k:20s} {fmt(s[k])}")
    sw = rep.document.get("sweep")
    if sw:
        print(f"  sweep over {sw['param']}:")
        for pt in sw["points"]:
            print(f"    {pt['value']!s:>10}  bmr={fmt(pt['bmr_AD_mean'])}  p_med={fmt(pt['apen_p_median'])}"
                  f"  nist={fmt(pt['nist_pass_fraction'])}  acc={fmt(pt['accepted_fraction'])}")
        print(f"  selected: {fmt(sw['selected'])}  ({sw['selection_rule']})")
        print(f"  bmr trend: {sw['bmr_trend']}")
    for p in paths or ():
        print(f"wrote {p}")


# ---------------------------------------------------------------- subcommands

def cmd_simulate(args) -> int:
    """Simulate one run and save both traces plus the activity schedule."""
    cfg = _config(args)
    out = output_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    sim = sc.simulate(cfg, args.run)
    stem = f"{cfg.name}-run{args.run:03d}"
    for tr in (sim.run.trace_a, sim.run.trace_d):
        path = out / f"{stem}-{tr.owner}.jbt"
        save_trace(tr, path)
        print(f"wrote {path}")
    path = out / f"{stem}-events.csv"
    with open(path, "w") as fh:
        fh.write("start_sec,duration_sec,center_x,center_y,radius_m,attenuation_db,kind\n")
        for e in sim.schedule:
            fh.write(f"{e.start_time!r},{e.duration!r},{e.center[0]!r},{e.center[1]!r},"
                     f"{e.radius!r},{e.attenuation_db!r},{e.kind}\n")
    print(f"wrote {path}")
    print(f"{len(sim.schedule)} events, {sim.run.trace_a.width} samples per trace")
    return 0


def cmd_pair(args) -> int:
    if args.trace_a or args.trace_d:
        if not (args.trace_a and args.trace_d):
            raise ConfigError("--trace-a and --trace-d go together")
        p = _af_from_args(args)
        f_a = fingerprint(load_trace(args.trace_a), p)
        f_d = fingerprint(load_trace(args.trace_d), p)
        seed = derive_seed(args.seed or 0, "pair")
        o = pair_fingerprints(f_a, f_d, seed=seed)
        doc = {
            "accepted": o.accepted,
            "bmr": o.bmr,
            "bits_A": len(f_a),
            "bits_D": len(f_d),
            "code": None if o.code is None else {"m": o.code.m, "n": o.code.n, "k": o.code.k},
            "reason": o.reason,
            "key_sha256": None if o.key is None else o.key.digest().hex(),
        }
        sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return 0
    cfg = _config(args)
    out = output_dir(args, cfg)
    rep = sc.run_scenario(cfg, out, parallel=args.parallel, dump_stages=args.dump_stages,
                          with_attacks=False)
    _print_summary(rep, [out / f"{cfg.name}.csv", out / f"{cfg.name}.json"])
    return 0


def _attack_overrides(cfg: sc.ScenarioConfig, args) -> sc.ScenarioConfig:
    """Fold --kind/--phi/--fill/--dwell/--trials into the config."""
    raw = json.loads(json.dumps(cfg.raw))
    if args.kind:
        raw["adversaries"] = [{"kind": args.kind}]
    for spec in raw.get("adversaries", []):
        if args.phi is not None and spec["kind"] == "eavesdropper":
            spec.pop("position", None)
            spec["angle_deg"] = args.phi
        if args.fill and spec["kind"] == "eavesdropper":
            spec["fill_strategy"] = args.fill
        if args.dwell is not None and spec["kind"] == "colocatedUph":
            spec["dwell_sec"] = args.dwell
    if args.trials is not None:
        raw["runs"] = args.trials
    if raw == cfg.raw:
        return cfg
    return sc.config_from_dict(raw, cfg.source, cfg.lines)


def cmd_attack(args) -> int:
    cfg = _attack_overrides(_config(args), args)
    if not cfg.raw.get("adversaries"):
        log.warning("config lists no adversaries; reporting the legitimate pairing only")
    out = output_dir(args, cfg)
    rep = sc.run_scenario(cfg, out, parallel=args.parallel, dump_stages=args.dump_stages)
    _print_summary(rep, [out / f"{cfg.name}.csv", out / f"{cfg.name}.json"])
    adv_cols = [c for c in rep.columns if c not in sc.BASE_COLUMNS]
    for c in adv_cols:
        vals = [r[c] for r in rep.rows if r[c] is not None]
        if vals and isinstance(vals[0], bool):
            print(f"  {c:34s} true in {sum(vals)}/{len(vals)}")
        elif vals:
            print(f"  {c:34s} mean {sum(vals) / len(vals):.4f}")
    return 0


def cmd_discover(args) -> int:
    from .uph import path_discovery, viable_pairs
    cfg = _config(args)
    seed = derive_seed(cfg.master_seed, "run", args.run)
    scene = sc.scene_from_config(cfg, seed)
    a, d = cfg.link
    eps = float(cfg.raw.get("uph", {}).get("epsilon_db", 3.0))
    va, vd = path_discovery(scene, a, d, epsilon=eps, seed=seed)
    pairs = sorted(viable_pairs(scene, a, d, va, vd, eps))
    timing = DiscoveryTiming(sector_count=scene.sector_count if args.full_sweep else 8)
    doc = {
        "viable_sectors": {a: list(va.sectors), d: list(vd.sectors)},
        "viable_pairs": [list(p) for p in pairs],
        "discovery_time_sec": discovery_time(timing),
        "timing": asdict(timing),
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    out = output_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{cfg.name}-discovery.json"
    path.write_text(text)
    print(f"{a} viable sectors: {list(va.sectors)}")
    print(f"{d} viable sectors: {list(vd.sectors)}")
    print(f"viable pairs: {pairs}")
    print(f"discovery time: {doc['discovery_time_sec'] * 1e3:.3f} ms ({timing.sector_count} sectors)")
    print(f"wrote {path}")
    return 0


def cmd_uph(args) -> int:
    cfg = _config(args)
    if cfg.protocol != "jellybeanPlus":
        raw = dict(cfg.raw, protocol="jellybeanPlus")
        cfg = sc.config_from_dict(raw, cfg.source, cfg.lines)
    sim = sc.simulate(cfg, args.run)
    run = sim.run
    out = output_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    hops = out / f"{cfg.name}-run{args.run:03d}-hops.csv"
    export_hops_csv(hops, run.seq_a, run.seq_d, run.slot_valid)
    row = sc.evaluate(cfg, sim, args.run, with_attacks=False,
                      dump_dir=out / "stages" if args.dump_stages else None)
    print(f"viable pairs: {sorted(sim.viable)}")
    print(f"matched slots Q = {run.matched} of {len(run.slot_pairs)}")
    print(f"bits A={row['bits_A']} D={row['bits_D']}  bmr={row['bmr_AD']}  accepted={row['accepted']}")
    if args.save_traces:
        for tr in (run.trace_a, run.trace_d):
            p = out / f"{cfg.name}-run{args.run:03d}-{tr.owner}.jbt"
            save_trace(tr, p)
            print(f"wrote {p}")
    print(f"wrote {hops}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    values = None
    if args.values is not None:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    param = args.param or cfg.raw.get("sweep", {}).get("param")
    out = output_dir(args, cfg)
    rep = sc.run_sweep(cfg, param, values, out, parallel=args.parallel,
                       dump_stages=args.dump_stages, with_attacks=args.with_attacks)
    stem = f"{cfg.name}-sweep-{param}"
    _print_summary(rep, [out / f"{stem}.csv", out / f"{stem}.json"])
    return 0


def _af_from_args(args) -> AfParams:
    p = default_af_params(args.kind)
    over = {k: getattr(args, k) for k in ("window_sec", "downsample", "lsb_count")
            if getattr(args, k, None) is not None}
    return AfParams(**{**asdict(p), **over})


def cmd_encode(args) -> int:
    """Fingerprint a recorded trace file."""
    p = _af_from_args(args)
    trace = load_trace(args.trace)
    f = fingerprint(trace, p)
    doc = {
        "format": FINGERPRINT_FORMAT,
        "version": 1,
        "source": Path(args.trace).name,
        "owner": trace.owner,
        "af_params": asdict(p),
        "length": len(f),
        "gray_bits": f.gray_bits,
        "bits": bits_to_str(f.bits),
    }
    jsonschema.validate(doc, sc.load_schema("fingerprint.schema.json"))
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
        print(f"{len(f)} bits -> {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_report(args) -> int:
    """Validate a report JSON and print its summary."""
    try:
        doc = json.loads(Path(args.report).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"{args.report}: cannot read report: {e}") from e
    try:
        jsonschema.validate(doc, sc.load_schema("report.schema.json"))
    except jsonschema.ValidationError as e:
        path = "/".join(map(str, e.absolute_path)) or "<root>"
        raise ConfigError(f"{args.report}: {path}: {e.message}") from e
    rep = sc.ScenarioReport(doc["rows"], doc["columns"], doc,
                            sc.rows_to_csv(doc["rows"], doc["columns"]), "")
    _print_summary(rep)
    if args.csv:
        Path(args.csv).write_text(rep.csv_text)
        print(f"wrote {args.csv}")
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario config (JSON)")
    common.add_argument("--seed", type=int, help="override master_seed")
    common.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or {DEFAULT_OUT})")
    common.add_argument("--dump-stages", action="store_true",
                        help="write per-run intermediate series (variance, detection bits)")
    common.add_argument("--parallel", type=int, default=1, metavar="N",
                        help="worker processes for independent runs")
    common.add_argument("-v", "--verbose", action="store_true")

    af = argparse.ArgumentParser(add_help=False)
    af.add_argument("--kind", choices=["artificial", "daily"], default="artificial",
                    help="activity kind selecting default pipeline parameters")
    af.add_argument("--window-sec", type=float, help="moving-variance window in seconds")
    af.add_argument("--downsample", type=int, help="samples averaged per output value")
    af.add_argument("--lsb-count", type=int, help="Gray-code bits kept per run")

    ap = argparse.ArgumentParser(prog="jellybean", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate one run and save traces")
    p.add_argument("--run", type=int, default=0, help="run index within the seed tree")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pair", parents=[common, af], help="legitimate pairing only (config or trace files)")
    p.add_argument("--trace-a")
    p.add_argument("--trace-d")
    p.set_defaults(func=cmd_pair)

    p = sub.add_parser("discover", parents=[common], help="path discovery and sweep timing")
    p.add_argument("--run", type=int, default=0)
    p.add_argument("--full-sweep", action="store_true",
                   help="time a sweep over all scene sectors instead of 8")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("uph", parents=[common], help="one path-hopping run with hop log")
    p.add_argument("--run", type=int, default=0)
    p.add_argument("--save-traces", action="store_true")
    p.set_defaults(func=cmd_uph)

    p = sub.add_parser("attack", parents=[common], help="full scenario including adversaries")
    p.add_argument("--kind", choices=["eavesdropper", "keylogger", "beamStealer", "colocatedUph"],
                   help="replace the config's adversaries with one of this kind")
    p.add_argument("--phi", type=float, help="eavesdropper angle off the A-D line, degrees")
    p.add_argument("--fill", choices=["randomGuess", "bitReuse", "noFill"],
                   help="eavesdropper fill strategy used for its open attempt")
    p.add_argument("--dwell", type=float, help="co-located attacker dwell time, seconds")
    p.add_argument("--trials", type=int, help="number of seeded runs (overrides runs)")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("sweep", parents=[common], help="parameter sweep with selection rule")
    p.add_argument("--param", help=f"one of: {', '.join(sorted(sc.SWEEP_PARAMS))}")
    p.add_argument("--values", help="comma-separated values")
    p.add_argument("--with-attacks", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("encode", parents=[af], help="fingerprint a recorded trace file")
    p.add_argument("trace")
    p.add_argument("--out", help="fingerprint JSON path (default: stdout)")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("report", help="validate and summarise a report JSON")
    p.add_argument("report")
    p.add_argument("--csv", help="also write the rows as CSV")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if getattr(args, "parallel", 1) < 1:
        print("error: --parallel must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigError, UnknownParam) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except JellybeanError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
