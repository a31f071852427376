# utils/trace_io.py
"""
Files written and read by the launcher.

A chain trace is three files sharing one stem:
  • <stem>.csv        thinned states  (iter, kind, accepted, log_gamma_x, log_gamma_y, x_*, y_*)
  • <stem>.json       header: kernel config, seed, target, tallies
  • <stem>.moves.npz  full per-iteration move log
"""
import json
import logging
import pathlib
from typing import Dict, Iterable, Tuple

import numpy as np
import pandas as pd

from sampler.errors import DataError
from sampler.state import INIT_LABEL, KIND_NAMES
from sampler.twalk_core import Trace

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
TABLE1_COLUMNS = ["penalty_shape", "proposal", "d", "kappa", "n", "z_hat", "deficit", "std_err"]


def trace_paths(out) -> Tuple[pathlib.Path, pathlib.Path, pathlib.Path]:
    stem = pathlib.Path(out)
    if stem.suffix.lower() in (".csv", ".json"):
        stem = stem.with_suffix("")
    return (stem.with_name(stem.name + ".csv"), stem.with_name(stem.name + ".json"),
            stem.with_name(stem.name + ".moves.npz"))


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def write_json(obj, path) -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, default=_json_default))
    return path


# ─────────────────────────────────────────────────────── traces
def write_trace(trace: Trace, out) -> Tuple[pathlib.Path, pathlib.Path, pathlib.Path]:
    csv_path, json_path, npz_path = trace_paths(out)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    d = trace.dim

    it = trace.iters
    kinds = [INIT_LABEL if t == 0 else KIND_NAMES[trace.kinds[t - 1]] for t in it]
    accepted = pd.array([None if t == 0 else bool(trace.accepted[t - 1]) for t in it], dtype="boolean")
    df = pd.DataFrame({"iter": it, "kind": kinds, "accepted": accepted,
                       "log_gamma_x": trace.log_gamma_x, "log_gamma_y": trace.log_gamma_y})
    for j in range(d):
        df[f"x_{j}"] = trace.x[:, j]
    for j in range(d):
        df[f"y_{j}"] = trace.y[:, j]
    df.to_csv(csv_path, index=False, float_format=FLOAT_FORMAT)

    header = dict(trace.config)
    header.update({"dim": d, "n_iters": trace.n_iters, "thin": trace.thin,
                   "tallies": trace.tallies(), "global_acceptance": trace.global_acceptance()})
    write_json(header, json_path)

    np.savez_compressed(npz_path, kinds=trace.kinds, accepted=trace.accepted,
                        log_mh_ratio=trace.log_mh_ratio, trials=trace.trials, failed=trace.failed)
    logger.info("trace written to %s (+ .json, .moves.npz)", csv_path)
    return csv_path, json_path, npz_path


def read_trace(path) -> Trace:
    csv_path, json_path, npz_path = trace_paths(path)
    for p in (csv_path, json_path, npz_path):
        if not p.exists():
            raise DataError(f"trace file missing: {p}")
    header = json.loads(json_path.read_text())
    df = pd.read_csv(csv_path, float_precision="round_trip")
    d = int(header["dim"])
    try:
        x = df[[f"x_{j}" for j in range(d)]].to_numpy(dtype=float)
        y = df[[f"y_{j}" for j in range(d)]].to_numpy(dtype=float)
    except KeyError as e:
        raise DataError(f"{csv_path}: missing state column {e}") from e

    with np.load(npz_path) as moves:
        arrays = {k: moves[k] for k in ("kinds", "accepted", "log_mh_ratio", "trials", "failed")}
    config = {k: v for k, v in header.items()
              if k not in ("dim", "n_iters", "tallies", "global_acceptance")}
    return Trace(iters=df["iter"].to_numpy(dtype=np.int64), x=x, y=y,
                 log_gamma_x=df["log_gamma_x"].to_numpy(dtype=float),
                 log_gamma_y=df["log_gamma_y"].to_numpy(dtype=float),
                 thin=int(header.get("thin", 1)), config=config, **arrays)


def read_points(path, burn_in: int = 0) -> np.ndarray:
    """x-states of a trace CSV (after burn-in), or every column of a bare point CSV."""
    path = pathlib.Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    df = pd.read_csv(path, float_precision="round_trip")
    xcols = [c for c in df.columns if c.startswith("x_")]
    if xcols:
        if "iter" in df.columns:
            df = df[df["iter"] > burn_in]
        pts = df[sorted(xcols, key=lambda c: int(c[2:]))]
    else:
        pts = df.select_dtypes("number")
    if pts.empty:
        raise DataError(f"{path}: no points found")
    return pts.to_numpy(dtype=float)


# ─────────────────────────────────────────────────────── other outputs
def write_combined(regions, indices, points, path) -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame({"step": np.arange(1, len(regions) + 1), "region": regions, "index": indices})
    for j in range(points.shape[1]):
        df[f"x_{j}"] = points[:, j]
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def write_table1(rows: Iterable[Dict], path) -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(list(rows), columns=TABLE1_COLUMNS).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def write_kde_grid(grid, path) -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(grid.rows(), columns=["x", "y", "density"]).to_csv(path, index=False,
                                                                     float_format=FLOAT_FORMAT)
    return path
