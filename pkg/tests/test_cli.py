import json

import numpy as np
import pytest

from jellybean.cli import main
from jellybean.simenv import CsiTrace
from jellybean.traceio import save_trace


def _write_cfg(tmp_path, **over):
    raw = {
        "name": "tiny", "master_seed": 5, "runs": 1, "duration_sec": 20,
        "scene": {"preset": "two_node", "distance_m": 4.0},
        "activity": {"kind": "artificial", "rate_per_min": 20, "targets": "los"},
    }
    raw.update(over)
    p = tmp_path / "tiny.json"
    p.write_text(json.dumps(raw, indent=2))
    return p


def test_bad_node_exits_2_with_line(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, link={"a": "A", "d": "Q"})
    assert main(["pair", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "tiny.json:" in err and "unknown node 'Q'" in err


def test_missing_config_exits_2(capsys):
    assert main(["pair"]) == 2


def test_simulate_then_pair_traces(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    out = tmp_path / "o"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    a, d = out / "tiny-run000-A.jbt", out / "tiny-run000-D.jbt"
    assert a.exists() and d.exists() and (out / "tiny-run000-events.csv").exists()
    capsys.readouterr()
    assert main(["pair", "--trace-a", str(a), "--trace-d", str(d)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert {"accepted", "bmr", "bits_A", "bits_D", "code"} <= set(doc)


def test_encode_writes_fingerprint(tmp_path):
    cfg = _write_cfg(tmp_path)
    out = tmp_path / "o"
    main(["simulate", "--config", str(cfg), "--out", str(out)])
    assert main(["encode", str(out / "tiny-run000-A.jbt"), "--out", str(out / "f.json")]) == 0
    doc = json.loads((out / "f.json").read_text())
    assert doc["length"] == len(doc["bits"]) and set(doc["bits"]) <= {"0", "1"}


def test_encode_all_invalid_trace_fails(tmp_path, capsys):
    t = CsiTrace(np.zeros((52, 300), np.complex64), np.zeros(300, bool), "A", 30, 10)
    save_trace(t, tmp_path / "dead.jbt")
    assert main(["encode", str(tmp_path / "dead.jbt")]) != 0
    assert "EmptyTrace" in capsys.readouterr().err


def test_env_output_dir(tmp_path, monkeypatch):
    cfg = _write_cfg(tmp_path)
    monkeypatch.setenv("JELLYBEAN_OUT", str(tmp_path / "env"))
    assert main(["pair", "--config", str(cfg)]) == 0
    assert (tmp_path / "env" / "tiny.csv").exists()
    # --out wins over the environment
    assert main(["pair", "--config", str(cfg), "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "tiny.csv").exists()


def test_report_round_trip(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    main(["pair", "--config", str(cfg), "--out", str(tmp_path)])
    capsys.readouterr()
    assert main(["report", str(tmp_path / "tiny.json"), "--csv", str(tmp_path / "again.csv")]) == 0
    assert (tmp_path / "again.csv").read_text() == (tmp_path / "tiny.csv").read_text()
    (tmp_path / "broken.json").write_text('{"rows": 3}')
    assert main(["report", str(tmp_path / "broken.json")]) == 2


def test_sweep_empty_values_exit_2(tmp_path):
    cfg = _write_cfg(tmp_path)
    assert main(["sweep", "--config", str(cfg), "--param", "af.lsb_count", "--values", "",
                 "--out", str(tmp_path)]) == 2
    assert main(["sweep", "--config", str(cfg), "--param", "af.bogus", "--values", "1",
                 "--out", str(tmp_path)]) == 2


def test_discover_two_path(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, protocol="jellybeanPlus",
                     scene={"preset": "two_path", "distance_m": 4.0})
    assert main(["discover", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "tiny-discovery.json").read_text())
    assert doc["viable_pairs"] == [[1, 5], [2, 4]]
    assert doc["discovery_time_sec"] == pytest.approx(5.12e-3)


def test_attack_overrides(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    assert main(["attack", "--config", str(cfg), "--kind", "eavesdropper", "--phi", "0",
                 "--fill", "noFill", "--out", str(tmp_path)]) == 0
    header = (tmp_path / "tiny.csv").read_text().splitlines()[0]
    assert "eavesdropper0_bmr_noFill" in header and "keylogger0_bmr" not in header


def test_parallel_must_be_positive(tmp_path):
    assert main(["pair", "--config", str(_write_cfg(tmp_path)), "--parallel", "0"]) == 2


def test_encode_matches_in_memory_fingerprint(tmp_path):
    from jellybean import scenario as sc
    from jellybean.fingerprint import ARTIFICIAL, bits_to_str, fingerprint
    cfg_path = _write_cfg(tmp_path)
    out = tmp_path / "o"
    main(["simulate", "--config", str(cfg_path), "--out", str(out)])
    main(["encode", str(out / "tiny-run000-D.jbt"), "--out", str(out / "f.json")])
    sim = sc.simulate(sc.load_config(cfg_path), 0)
    expect = bits_to_str(fingerprint(sim.run.trace_d, ARTIFICIAL).bits)
    assert json.loads((out / "f.json").read_text())["bits"] == expect
