"""End-to-end runner artifacts, worker determinism, CLI exit codes."""

import copy
import json
import os

import numpy as np
import pytest

from zrp import cli, runner
from zrp.plans import plan_from_dict

STAT_CFG = {"experiment": "stationarity",
            "model": {"d": 1, "alpha": 1.5, "L": 16, "gamma": 1.0,
                      "rate": {"kind": "affine", "a": 1.0, "b": 0.5}},
            "N_grid": [1], "t_grid": [5.0],
            "replicas": 4, "master_seed": 99}

AUTOCOV_CFG = {"experiment": "autocov",
               "model": {"d": 1, "alpha": 3.0, "L": 64, "gamma": 1.0,
                         "rate": {"kind": "linear", "a": 1.0}},
               "N_grid": [1], "t_grid": [4.0, 8.0],
               "replicas": 2, "master_seed": 11,
               "series": {"dt": 0.25, "t_max": 200.0, "watch": 4}}

SCALING_CFG = {"experiment": "scaling",
               "model": {"d": 1, "alpha": 0.5, "L": 64, "gamma": 1.0,
                         "rate": {"kind": "linear", "a": 1.0}},
               "N_grid": [5, 10, 20], "t_grid": [1.0],
               "replicas": 10, "master_seed": 3,
               "series": {"dt": 0.25, "t_max": 50.0, "watch": 4}}


def _run(cfg, out, **kw):
    plan = plan_from_dict(copy.deepcopy(cfg))
    return runner.run_plan(plan, out_dir=str(out), **kw)


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_stationarity_artifacts(tmp_path):
    s = _run(STAT_CFG, tmp_path)
    assert s["experiment"] == "stationarity"
    assert len(s["p_values"]) == 4
    assert s["total_events"] > 0
    for name in ("paths.csv", "summary.json", "constants.json",
                 "manifest.json"):
        assert (tmp_path / name).exists()
    man = json.loads(_read(tmp_path / "manifest.json"))
    assert man["complete"] is True
    assert man["plan"]["experiment"] == "stationarity"
    head = _read(tmp_path / "paths.csv").decode().splitlines()
    assert head[0] == "replica,N,t,A"
    assert len(head) == 1 + 4  # one record time per replica
    row = head[1].split(",")
    assert int(row[0]) == 0 and float(row[1]) == 1.0 and float(row[2]) == 5.0


def test_worker_count_cannot_change_output(tmp_path):
    # same seed, 1 vs 3 workers: data artifacts byte-identical (the
    # stationarity plan has no series block, which also exercises the
    # null-series echo round trip in the pool initializer)
    _run(STAT_CFG, tmp_path / "w1", workers=1)
    _run(STAT_CFG, tmp_path / "w3", workers=3)
    for name in ("paths.csv", "summary.json", "constants.json"):
        assert _read(tmp_path / "w1" / name) == _read(tmp_path / "w3" / name)


def test_autocov_summary_shape(tmp_path):
    s = _run(AUTOCOV_CFG, tmp_path)
    assert len(s["probes"]) == 2
    for pr in s["probes"]:
        assert pr["se"] > 0 and np.isfinite(pr["product"])
    assert s["target"] == pytest.approx(0.155527, rel=1e-4)
    assert s["target_exponent"] == -0.5
    assert np.isfinite(s["decay_exponent"])
    names = [r["check"] for r in s["verdicts"]]
    assert any("decay" in n for n in names)


@pytest.mark.filterwarnings("ignore:autocovariance window never closed")
def test_scaling_summary_shape(tmp_path):
    s = _run(SCALING_CFG, tmp_path)
    assert s["slope_target_theta"] == 0.5
    assert np.isfinite(s["slope"]) and s["slope_se"] > 0
    assert s["sigma2_hat"] > 0
    assert np.isfinite(s["ratio"])
    cols = np.loadtxt(tmp_path / "paths.csv", delimiter=",", skiprows=1)
    assert cols.shape == (10 * 3, 4)


def test_verify_exit_codes(tmp_path):
    plan = plan_from_dict(copy.deepcopy(STAT_CFG))
    code, rows = runner.verify(plan, str(tmp_path))
    assert code == 1  # nothing there yet
    runner.run_plan(plan, out_dir=str(tmp_path))
    code, rows = runner.verify(plan, str(tmp_path))
    assert code in (0, 2)
    assert all(set(r) >= {"check", "target", "estimate", "passed"}
               for r in rows)
    # stored summary drives the verdicts: breaking it must flip to 2
    with open(tmp_path / "summary.json") as fh:
        summary = json.load(fh)
    summary["p_values"] = [0.0] * 4
    with open(tmp_path / "summary.json", "w") as fh:
        json.dump(summary, fh)
    code, _ = runner.verify(plan, str(tmp_path))
    assert code == 2
    # a plan for a different experiment cannot verify this directory
    other = plan_from_dict(copy.deepcopy(AUTOCOV_CFG))
    code, rows = runner.verify(other, str(tmp_path))
    assert code == 1 and rows[0]["check"] == "experiment"


def test_incomplete_manifest_detected(tmp_path):
    plan = plan_from_dict(copy.deepcopy(STAT_CFG))
    runner.run_plan(plan, out_dir=str(tmp_path))
    with open(tmp_path / "manifest.json") as fh:
        man = json.load(fh)
    man["complete"] = False
    man["error"] = "interrupted"
    with open(tmp_path / "manifest.json", "w") as fh:
        json.dump(man, fh)
    code, rows = runner.verify(plan, str(tmp_path))
    assert code == 1
    assert "interrupted" in rows[0]["estimate"]


def _write_cfg(tmp_path, cfg, name="plan.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_cli_run_and_verify(tmp_path, capsys):
    # stationarity has no named subcommand; simulate runs what the plan says
    cfg = dict(copy.deepcopy(STAT_CFG), outputs=str(tmp_path / "out"))
    path = _write_cfg(tmp_path, cfg)
    assert cli.main(["simulate", "--config", path]) == 0
    shown = capsys.readouterr().out
    assert "PASS" in shown or "FAIL" in shown
    assert cli.main(["verify", "--config", path]) in (0, 2)
    # named commands guard against running the wrong experiment
    assert cli.main(["autocov", "--config", path]) == 1
    err = capsys.readouterr().err
    assert "declares experiment 'stationarity'" in err


def test_cli_seed_precedence(tmp_path, monkeypatch):
    cfg = dict(copy.deepcopy(STAT_CFG), outputs=str(tmp_path / "o1"))
    path = _write_cfg(tmp_path, cfg)
    assert cli.main(["simulate", "--config", path,
                     "--out", str(tmp_path / "a")]) == 0
    monkeypatch.setenv("ZRP_SEED", "99")
    assert cli.main(["simulate", "--config", path,
                     "--out", str(tmp_path / "b")]) == 0
    monkeypatch.setenv("ZRP_SEED", "123")
    assert cli.main(["simulate", "--config", path,
                     "--out", str(tmp_path / "c")]) == 0
    # --seed outranks the environment
    assert cli.main(["simulate", "--config", path, "--seed", "99",
                     "--out", str(tmp_path / "d")]) == 0
    monkeypatch.delenv("ZRP_SEED")
    a, b, c, d = (_read(tmp_path / k / "paths.csv") for k in "abcd")
    assert a == b == d
    assert c != a
    monkeypatch.setenv("ZRP_SEED", "pi")
    assert cli.main(["simulate", "--config", path,
                     "--out", str(tmp_path / "e")]) == 1


def test_cli_sample_equilibrium(tmp_path, capsys):
    cfg = dict(copy.deepcopy(STAT_CFG))
    path = _write_cfg(tmp_path, cfg)
    out = str(tmp_path / "field")
    assert cli.main(["sample-equilibrium", "--config", path,
                     "--out", out]) == 0
    assert os.path.exists(os.path.join(out, "profile.json"))
    field = open(os.path.join(out, "field.csv")).read().splitlines()
    assert field[0] == "site,occupancy"
    assert len(field) == 1 + 16
    out2 = str(tmp_path / "fjson")
    assert cli.main(["sample-equilibrium", "--config", path, "--out", out2,
                     "--format", "json"]) == 0
    blob = json.load(open(os.path.join(out2, "field.json")))
    assert len(blob["occupancy"]) == 16
    assert blob["seed"] == 99


def test_cli_bad_config(tmp_path, capsys):
    missing = str(tmp_path / "none.json")
    assert cli.main(["simulate", "--config", missing]) == 1
    assert "not found" in capsys.readouterr().err
    bad = _write_cfg(tmp_path, {"experiment": "nope"}, "bad.json")
    assert cli.main(["simulate", "--config", bad]) == 1
