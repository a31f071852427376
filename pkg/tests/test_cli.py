# tests/test_cli.py
import argparse
import json

import numpy as np
import pandas as pd
import pytest

import ptwalk_launcher as launcher
import utils.config_manager as cfg
from sampler.state import PENALTY


def _run(tmp_path, stem="ex", *extra):
    out = tmp_path / stem
    code = launcher.main(["run", "--target", "example1", "--iters", "2000", "--seed", "3",
                          "--out", str(out), *extra])
    return code, out


# ─────────────────────────────────────────────────────── run
def test_run_writes_trace_and_report(tmp_path):
    code, out = _run(tmp_path)
    assert code == 0
    for suffix in (".csv", ".json", ".moves.npz", ".diag.json"):
        assert (tmp_path / f"ex{suffix}").exists()
    with np.load(tmp_path / "ex.moves.npz") as moves:
        kinds = moves["kinds"]
    assert len(kinds) == 2000
    assert np.mean(kinds == PENALTY) == pytest.approx(0.10, abs=0.03)
    report = json.loads((tmp_path / "ex.diag.json").read_text())
    assert len(report["iat_per_coordinate"]) == 2


def test_run_without_penalty(tmp_path):
    code, _ = _run(tmp_path, "plain", "--penalty", "none")
    assert code == 0
    with np.load(tmp_path / "plain.moves.npz") as moves:
        assert not np.any(moves["kinds"] == PENALTY)


def test_run_is_reproducible(tmp_path):
    _run(tmp_path, "a")
    _run(tmp_path, "b")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_run_unknown_target(tmp_path):
    assert launcher.main(["run", "--target", "example9", "--iters", "10", "--out", str(tmp_path / "x")]) == 2


def test_run_spec_file_target(tmp_path):
    spec = tmp_path / "n2.json"
    spec.write_text(json.dumps({"dim": 2, "components": [
        {"weight": 1.0, "mean": [0.0, 0.0], "cov": [[1.0, 0.0], [0.0, 1.0]]}]}))
    code = launcher.main(["run", "--target", str(spec), "--iters", "300", "--x0", "0.1,0.2",
                          "--y0=-0.5,0.4", "--out", str(tmp_path / "n2")])
    assert code == 0
    df = pd.read_csv(tmp_path / "n2.csv")
    assert (df.loc[0, "x_0"], df.loc[0, "x_1"]) == (pytest.approx(0.1), pytest.approx(0.2))


def test_run_with_config_file(tmp_path, monkeypatch):
    monkeypatch.setattr(cfg, "_cfg", cfg.all())
    settings = tmp_path / "settings.json"
    settings.write_text(json.dumps({"PENALTY_PROB": 0.0, "ITERS": 400}))
    code = launcher.main(["--config", str(settings), "run", "--target", "example1", "--seed", "1",
                          "--out", str(tmp_path / "cfg")])
    assert code == 0
    with np.load(tmp_path / "cfg.moves.npz") as moves:
        assert len(moves["kinds"]) == 400
        assert not np.any(moves["kinds"] == PENALTY)


def test_config_file_layers_over_repo_settings(tmp_path, monkeypatch):
    monkeypatch.setattr(cfg, "_cfg", cfg.all())
    repo = tmp_path / "config.json"
    repo.write_text(json.dumps({"KAPPA": 4.0, "SEED": 2}))
    monkeypatch.setattr(cfg, "CONFIG_FILE", repo)
    user = tmp_path / "user.json"
    user.write_text(json.dumps({"SEED": 5}))
    settings = cfg.reload(user)
    assert (settings["KAPPA"], settings["SEED"]) == (4.0, 5)
    assert settings["PENALTY_PROB"] == cfg.DEFAULTS["PENALTY_PROB"]


def test_config_flag_is_top_level(tmp_path):
    with pytest.raises(SystemExit) as err:
        launcher.main(["run", "--config", str(tmp_path / "s.json"), "--iters", "10"])
    assert err.value.code == 2


def test_missing_config_file(tmp_path, monkeypatch):
    monkeypatch.setattr(cfg, "_cfg", cfg.all())
    assert launcher.main(["--config", str(tmp_path / "nope.json"), "run", "--iters", "10",
                          "--out", str(tmp_path / "x")]) == 2


# ─────────────────────────────────────────────────────── combine
def test_combine_component_draws(tmp_path):
    out = tmp_path / "combined.csv"
    code = launcher.main(["combine", "--target", "example1_weighted", "--component-draws", "500",
                          "--iters", "5000", "--oracle-weights", "0.1,0.9", "--out", str(out)])
    assert code == 0
    df = pd.read_csv(out)
    assert list(df.columns[:3]) == ["step", "region", "index"]
    assert len(df) == 5000
    summary = json.loads((tmp_path / "combined.summary.json").read_text())
    assert summary["occupancy"][0] == pytest.approx(0.1, abs=0.05)
    assert summary["oracle_occupancy"][0] == pytest.approx(0.1, abs=0.02)
    assert summary["overlap_warning"] is False


def test_combine_rejects_zero_iters(tmp_path):
    with pytest.raises(SystemExit) as err:
        launcher.main(["combine", "--component-draws", "100", "--iters", "0",
                       "--out", str(tmp_path / "c.csv")])
    assert err.value.code == 2


def test_combine_needs_inputs(tmp_path):
    assert launcher.main(["combine", "--iters", "10", "--out", str(tmp_path / "c.csv")]) == 2


def test_combine_bad_oracle_weights(tmp_path):
    assert launcher.main(["combine", "--component-draws", "100", "--iters", "10",
                          "--oracle-weights", "0.2,0.3,0.5", "--out", str(tmp_path / "c.csv")]) == 2


def test_combine_identical_traces_overlap(tmp_path):
    _run(tmp_path, "t")
    out = tmp_path / "same.csv"
    code = launcher.main(["combine", "--target", "example1", "--trace-a", str(tmp_path / "t.csv"),
                          "--trace-b", str(tmp_path / "t.csv"), "--iters", "200", "--out", str(out)])
    assert code == 0
    summary = json.loads((tmp_path / "same.summary.json").read_text())
    assert summary["overlap_warning"] is True


# ─────────────────────────────────────────────────────── table1
def test_table1_small_grid(tmp_path):
    out = tmp_path / "t1.csv"
    code = launcher.main(["table1", "--dims", "2", "--kappas", "2,3", "--samples", "1e4",
                          "--seed", "4", "--out", str(out)])
    assert code == 0
    df = pd.read_csv(out)
    assert len(df) == 4
    assert set(df["penalty_shape"]) == {"flipped_gaussian", "flipped_t2"}
    assert (df["n"] == 10_000).all()


def test_table1_needs_enough_samples(tmp_path):
    assert launcher.main(["table1", "--samples", "5000", "--out", str(tmp_path / "t1.csv")]) == 2


# ─────────────────────────────────────────────────────── diag
def test_diag_outputs(tmp_path):
    _run(tmp_path, "d")
    code = launcher.main(["diag", "--trace", str(tmp_path / "d"), "--target", "example1",
                          "--burn-in", "100", "--grid", "20"])
    assert code == 0
    report = json.loads((tmp_path / "d.diag.json").read_text())
    assert report["burn_in"] == 100
    assert len(report["mode_occupancy"]) == 2
    grid = pd.read_csv(tmp_path / "d.kde.csv")
    assert list(grid.columns) == ["x", "y", "density"]
    assert len(grid) == 400


def test_diag_explicit_centres(tmp_path):
    _run(tmp_path, "c")
    code = launcher.main(["diag", "--trace", str(tmp_path / "c"), "--centres", "0,0;20,-20",
                          "--grid", "0"])
    assert code == 0
    assert not (tmp_path / "c.kde.csv").exists()


def test_diag_missing_trace(tmp_path):
    assert launcher.main(["diag", "--trace", str(tmp_path / "none")]) == 2


# ─────────────────────────────────────────────────────── flag parsers
def test_count_parser():
    assert launcher.count("5e5") == 500_000
    assert launcher.count("12") == 12
    with pytest.raises(argparse.ArgumentTypeError):
        launcher.count("1.5")
    with pytest.raises(argparse.ArgumentTypeError):
        launcher.positive_count("0")


def test_point_parsers():
    np.testing.assert_array_equal(launcher.point("1,-2.5"), [1.0, -2.5])
    pts = launcher.point_list("0,0;20,-20")
    assert len(pts) == 2 and pts[1][1] == -20.0


def test_subcommand_required():
    with pytest.raises(SystemExit):
        launcher.main([])
