# tests/test_trace_io.py
import json

import numpy as np
import pandas as pd
import pytest

from sampler.errors import DataError
from sampler.targets import make_builtin
from sampler.twalk_core import KernelConfig, run
from utils.trace_io import (TABLE1_COLUMNS, read_points, read_trace, trace_paths, write_table1,
                            write_trace)


@pytest.fixture(scope="module")
def trace():
    return run(make_builtin("example1"), KernelConfig(seed=13), [0.0, 0.0], [1.0, 1.0], 500, thin=5)


def test_trace_paths():
    csv, js, npz = trace_paths("runs/example1")
    assert (csv.name, js.name, npz.name) == ("example1.csv", "example1.json", "example1.moves.npz")
    assert trace_paths("runs/example1.csv") == trace_paths("runs/example1")


def test_write_read_trace(trace, tmp_path):
    write_trace(trace, tmp_path / "t")
    back = read_trace(tmp_path / "t")
    np.testing.assert_array_equal(back.x, trace.x)
    np.testing.assert_array_equal(back.y, trace.y)
    np.testing.assert_array_equal(back.log_gamma_x, trace.log_gamma_x)
    np.testing.assert_array_equal(back.iters, trace.iters)
    np.testing.assert_array_equal(back.kinds, trace.kinds)
    np.testing.assert_array_equal(back.trials, trace.trials)
    assert back.thin == 5
    assert back.tallies() == trace.tallies()
    assert back.config["seed"] == 13


def test_csv_layout(trace, tmp_path):
    csv, js, _ = write_trace(trace, tmp_path / "t")
    df = pd.read_csv(csv)
    assert list(df.columns) == ["iter", "kind", "accepted", "log_gamma_x", "log_gamma_y",
                                "x_0", "x_1", "y_0", "y_1"]
    assert df.loc[0, "kind"] == "init"
    assert pd.isna(df.loc[0, "accepted"])
    assert set(df["kind"].iloc[1:]) <= {"walk", "traverse", "hop", "blow", "penalty"}
    header = json.loads(js.read_text())
    assert header["dim"] == 2 and header["n_iters"] == 500
    assert header["kernel"]["penalty"]["kappa"] == 3.0


def test_read_points(trace, tmp_path):
    csv, _, _ = write_trace(trace, tmp_path / "t")
    pts = read_points(csv, burn_in=100)
    np.testing.assert_array_equal(pts, trace.x[trace.iters > 100])

    bare = tmp_path / "bare.csv"
    pd.DataFrame({"a": [1.0, 2.0], "b": [3.0, 4.0]}).to_csv(bare, index=False)
    np.testing.assert_array_equal(read_points(bare), [[1.0, 3.0], [2.0, 4.0]])


def test_missing_files(tmp_path):
    with pytest.raises(DataError):
        read_trace(tmp_path / "nothing")
    with pytest.raises(DataError):
        read_points(tmp_path / "nothing.csv")


def test_table1_csv(tmp_path):
    rows = [{"penalty_shape": "flipped_gaussian", "proposal": "t1", "d": 2, "kappa": 2.0,
             "n": 10_000, "z_hat": 0.84, "deficit": 0.16, "std_err": 0.003}]
    path = write_table1(rows, tmp_path / "out" / "table1.csv")
    df = pd.read_csv(path)
    assert list(df.columns) == TABLE1_COLUMNS
    assert df.loc[0, "z_hat"] == pytest.approx(0.84)
