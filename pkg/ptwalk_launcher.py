# ptwalk_launcher.py
"""
Command-line entry point.

    python ptwalk_launcher.py run     --target example1 --iters 5e5 --seed 7
    python ptwalk_launcher.py table1  --samples 1e6
    python ptwalk_launcher.py combine --target example1_weighted --component-draws 1e4
    python ptwalk_launcher.py diag    --trace runs/example1 --target example1

Settings precedence: flags > --config file > config.json > built-in defaults.
`--config` is a top-level flag: `python ptwalk_launcher.py --config my.json run ...`.
"""
import argparse
import logging
import pathlib
import sys
from typing import Dict, List, Optional

import numpy as np

import utils.config_manager as cfg
from postproc.combine import LooKdeConfig, combine_run, resample_oracle
from postproc.diagnostics import diagnose, kde_grid
from sampler.errors import InputError, PTWalkError
from sampler.penalty import normconst_table
from sampler.targets import resolve_target, sample_components
from sampler.twalk_core import KernelConfig, default_start, run
from utils.rng_streams import CHAIN_STREAM, START_STREAM, make_rng
from utils.trace_io import (read_points, read_trace, trace_paths, write_combined, write_json,
                            write_kde_grid, write_table1, write_trace)

logger = logging.getLogger("ptwalk")

EXIT_USAGE = 2


# ─────────────────────────────────────────────────────── flag parsers
def count(text: str) -> int:
    """Integer flag that also accepts scientific notation ('5e5')."""
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value.is_integer():
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(value)


def positive_count(text: str) -> int:
    value = count(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text!r}")
    return value


def point(text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def point_list(text: str) -> List[np.ndarray]:
    return [point(chunk) for chunk in text.split(";") if chunk.strip()]


def number_list(text: str) -> List[float]:
    return [float(t) for t in text.split(",")]


# ─────────────────────────────────────────────────────── settings
def _settings(args) -> Dict:
    """config.json (or --config) merged with explicit flags."""
    settings = cfg.reload(args.config) if getattr(args, "config", None) else cfg.all()
    overrides = {
        "PENALTY_VARIANT": getattr(args, "penalty", None),
        "PENALTY_PROB": getattr(args, "penalty_prob", None),
        "PENALTY_SHAPE": getattr(args, "penalty_shape", None),
        "PENALTY_DF": getattr(args, "penalty_df", None),
        "PROPOSAL_FAMILY": getattr(args, "proposal", None),
        "PROPOSAL_DF": getattr(args, "proposal_df", None),
        "KAPPA": getattr(args, "kappa", None),
        "ITERS": getattr(args, "iters", None),
        "THIN": getattr(args, "thin", None),
        "SEED": getattr(args, "seed", None),
        "BURN_IN": getattr(args, "burn_in", None),
        "KDE_BANDWIDTH": getattr(args, "bandwidth", None),
        "GRID_RESOLUTION": getattr(args, "grid", None),
        "TABLE1_SAMPLES": getattr(args, "samples", None),
    }
    settings.update({k: v for k, v in overrides.items() if v is not None})
    return settings


# ─────────────────────────────────────────────────────── subcommands
def cmd_run(args) -> int:
    s = _settings(args)
    target = resolve_target(args.target)
    kernel = KernelConfig.from_settings(s)
    x0, y0 = default_start(target, kernel.seed)
    if args.x0 is not None:
        x0 = args.x0
    if args.y0 is not None:
        y0 = args.y0

    trace = run(target, kernel, x0, y0, int(s["ITERS"]), int(s["THIN"]), progress=args.progress)
    out = args.out or pathlib.Path("runs") / target.name
    csv_path, _, _ = write_trace(trace, out)

    burn_in = min(int(s["BURN_IN"]), trace.n_iters - 1)
    report = diagnose(trace, target.centres, burn_in)
    diag_path = write_json(report.to_dict(), trace_paths(out)[0].with_suffix(".diag.json"))
    logger.info("global acceptance %.3f, per move %s", report.global_acceptance,
                {k: round(v, 4) for k, v in report.per_move_acceptance.items()})
    logger.info("wrote %s and %s", csv_path, diag_path)
    return 0


def cmd_table1(args) -> int:
    s = _settings(args)
    n = int(s["TABLE1_SAMPLES"])
    if n < 10_000:
        raise InputError(f"table1 needs at least 1e4 samples per cell, got {n}")
    dims = args.dims or s["TABLE1_DIMS"]
    kappas = args.kappas or s["TABLE1_KAPPAS"]
    rows = normconst_table(dims, kappas, n, seed=int(s["SEED"]), workers=args.workers,
                           penalty_df=s["PENALTY_DF"], proposal_df=float(s["PROPOSAL_DF"]))
    for r in rows:
        logger.info("%-18s d=%-3d kappa=%-4g z=%.6f ± %.1e", r["penalty_shape"], r["d"], r["kappa"],
                    r["z_hat"], r["std_err"])
    path = write_table1(rows, args.out)
    logger.info("wrote %s", path)
    return 0


def cmd_combine(args) -> int:
    s = _settings(args)
    target = resolve_target(args.target)
    seed = int(s["SEED"])
    if args.component_draws:
        pts_1 = sample_components(target, 0, args.component_draws, make_rng(seed, START_STREAM))
        pts_2 = sample_components(target, 1, args.component_draws, make_rng(seed, START_STREAM + 1))
    elif args.trace_a and args.trace_b:
        burn_in = int(s["BURN_IN"])
        pts_1 = read_points(args.trace_a, burn_in)
        pts_2 = read_points(args.trace_b, burn_in)
    else:
        raise InputError("combine needs --trace-a and --trace-b, or --component-draws")
    if pts_1.shape[1] != pts_2.shape[1]:
        raise InputError(f"inputs differ in dimension: {pts_1.shape[1]} vs {pts_2.shape[1]}")
    if args.oracle_weights and len(args.oracle_weights) != 2:
        raise InputError("--oracle-weights takes exactly two numbers")

    kde = LooKdeConfig.parse(s["KDE_BANDWIDTH"])
    result = combine_run(pts_1, pts_2, target, kde, int(s["ITERS"]), make_rng(seed, CHAIN_STREAM),
                         progress=args.progress)
    out = pathlib.Path(args.out)
    write_combined(result.sample.regions, result.sample.indices, result.sample.points, out)
    summary = result.summary()
    if args.oracle_weights:
        w1, w2 = args.oracle_weights
        oracle = resample_oracle(pts_1, pts_2, w1, w2, int(s["ITERS"]), make_rng(seed, START_STREAM + 2))
        summary["oracle_occupancy"] = list(oracle.occupancy())
    write_json(summary, out.with_suffix(".summary.json"))
    logger.info("acceptance %.3f, occupancy %.3f / %.3f", result.acceptance, *result.occupancy)
    return 0


def cmd_diag(args) -> int:
    s = _settings(args)
    trace = read_trace(args.trace)
    centres: Optional[list] = args.centres
    if centres is None and args.target:
        centres = list(resolve_target(args.target).centres)
    burn_in = int(s["BURN_IN"])
    report = diagnose(trace, centres, burn_in)

    stem = trace_paths(args.out or args.trace)[0]
    path = write_json(report.to_dict(), stem.with_suffix(".diag.json"))
    logger.info("IAT %s, acceptance %.3f", [round(t, 1) for t in report.iat_per_coordinate],
                report.global_acceptance)
    grid_n = int(s["GRID_RESOLUTION"])
    if grid_n and trace.dim < 2:
        logger.info("1-d trace; no KDE grid")
    elif grid_n:
        xs = trace.x[trace.iters > burn_in]
        grid = kde_grid(xs, tuple(args.dims), grid_n, s["KDE_BANDWIDTH"])
        write_kde_grid(grid, stem.with_suffix(".kde.csv"))
    logger.info("wrote %s", path)
    return 0


# ─────────────────────────────────────────────────────── parser
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ptwalk", description="Penalised t-walk sampler and tools")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    p.add_argument("--config", type=pathlib.Path,
                   help="settings JSON merged over config.json; goes before the subcommand")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one chain and write its trace")
    r.add_argument("--target", default="example1", help="builtin name or mixture spec JSON")
    r.add_argument("--iters", type=positive_count)
    r.add_argument("--thin", type=positive_count)
    r.add_argument("--seed", type=count)
    r.add_argument("--burn-in", type=count)
    r.add_argument("--penalty", choices=("rejection", "gradient", "none"))
    r.add_argument("--penalty-prob", type=float)
    r.add_argument("--penalty-shape", choices=("flipped_gaussian", "flipped_t", "flipped_bump"))
    r.add_argument("--penalty-df", type=float)
    r.add_argument("--proposal", choices=("gaussian", "student_t"))
    r.add_argument("--proposal-df", type=float)
    r.add_argument("--kappa", type=float)
    r.add_argument("--x0", type=point)
    r.add_argument("--y0", type=point)
    r.add_argument("--out", type=pathlib.Path, help="output stem (default runs/<target>)")
    r.add_argument("--progress", action="store_true")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("table1", help="normalising-constant grid under a t1 proposal")
    t.add_argument("--dims", type=lambda s: [int(v) for v in number_list(s)])
    t.add_argument("--kappas", type=number_list)
    t.add_argument("--samples", type=positive_count)
    t.add_argument("--seed", type=count)
    t.add_argument("--penalty-df", type=float)
    t.add_argument("--workers", type=positive_count, default=1)
    t.add_argument("--out", type=pathlib.Path, default=pathlib.Path("table1.csv"))
    t.set_defaults(func=cmd_table1)

    c = sub.add_parser("combine", help="merge two single-mode samples")
    c.add_argument("--target", default="example1_weighted")
    c.add_argument("--trace-a", type=pathlib.Path)
    c.add_argument("--trace-b", type=pathlib.Path)
    c.add_argument("--component-draws", type=positive_count,
                   help="use N exact draws from mixture components 1 and 2 instead of traces")
    c.add_argument("--iters", type=positive_count)
    c.add_argument("--seed", type=count)
    c.add_argument("--burn-in", type=count)
    c.add_argument("--bandwidth", help="scott, silverman or a fixed bandwidth")
    c.add_argument("--oracle-weights", type=number_list,
                   help="w1,w2: also report a resampling reference with known weights")
    c.add_argument("--out", type=pathlib.Path, default=pathlib.Path("combined.csv"))
    c.add_argument("--progress", action="store_true")
    c.set_defaults(func=cmd_combine)

    d = sub.add_parser("diag", help="diagnostics report and KDE grid for a trace")
    d.add_argument("--trace", type=pathlib.Path, required=True)
    d.add_argument("--target", help="take mode centres from this target")
    d.add_argument("--centres", type=point_list, help="'x,y;x,y' overrides the target's centres")
    d.add_argument("--burn-in", type=count)
    d.add_argument("--grid", type=count, help="KDE grid resolution (0 skips the grid)")
    d.add_argument("--dims", type=lambda s: [int(v) for v in number_list(s)], default=[0, 1])
    d.add_argument("--bandwidth")
    d.add_argument("--out", type=pathlib.Path)
    d.set_defaults(func=cmd_diag)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (PTWalkError, OSError, ValueError) as e:
        logger.error("%s", e)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
