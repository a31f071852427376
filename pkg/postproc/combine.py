# postproc/combine.py
"""
Merge two mode-trapped samples into one sample with (approximately) correct
region weights.

Each stored point X_i of region j yields R_j^(i) = π̂_j^(−i)(X_i) / γ(X_i), an
unbiased estimate of 1/Z_j from a KDE that leaves X_i out. An index chain over
(region, sample index) then jumps between regions, accepting with the ratio of
leave-one-out averages of those estimates.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist
from scipy.special import logsumexp
from tqdm import tqdm

from sampler.errors import ConfigError, DataError, InputError

logger = logging.getLogger(__name__)

BANDWIDTH_RULES = ("scott", "silverman", "fixed")
PAIR_BUDGET = 4_000_000     # kernel evaluations held in memory at once
LOG_2PI = math.log(2.0 * math.pi)


# ─────────────────────────────────────────────────────── types
@dataclass(frozen=True)
class RegionSample:
    points: np.ndarray            # (N, d)
    region_id: int                # 1 or 2
    log_gamma_at_points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        lg = np.asarray(self.log_gamma_at_points, dtype=float)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "log_gamma_at_points", lg)
        if self.region_id not in (1, 2):
            raise InputError(f"region id must be 1 or 2, got {self.region_id}")
        if pts.shape[0] < 2:
            raise InputError(f"region {self.region_id}: leave-one-out needs at least 2 points")
        if lg.shape != (pts.shape[0],):
            raise InputError(f"region {self.region_id}: expected {pts.shape[0]} cached log densities")
        bad = np.flatnonzero(~np.isfinite(lg))
        if bad.size:
            raise DataError(f"region {self.region_id}: γ = 0 at stored point {int(bad[0])} (outside support)")

    @classmethod
    def from_points(cls, points, region_id: int, target) -> "RegionSample":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != target.dim:
            raise InputError(f"region {region_id}: points have d={pts.shape[1]}, target has d={target.dim}")
        return cls(pts, region_id, np.array([target.log_density(p) for p in pts]))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class LooKdeConfig:
    bandwidth_rule: str = "scott"
    h: Optional[Union[float, Tuple[float, ...]]] = None     # fixed rule only

    def __post_init__(self):
        if self.bandwidth_rule not in BANDWIDTH_RULES:
            raise ConfigError(f"bandwidth rule must be one of {BANDWIDTH_RULES}, got {self.bandwidth_rule!r}")
        if self.bandwidth_rule == "fixed":
            if self.h is None or np.any(np.asarray(self.h, dtype=float) <= 0):
                raise ConfigError("fixed bandwidth needs a positive h")

    @classmethod
    def parse(cls, rule) -> "LooKdeConfig":
        """'scott', 'silverman', or a number (fixed bandwidth)."""
        try:
            return cls("fixed", float(rule))
        except ValueError:
            return cls(str(rule))


@dataclass(frozen=True)
class IndexChainState:
    m: int      # region, 1 or 2
    i: int      # 0-based index within the region's sample


@dataclass
class MaterialisedSample:
    regions: np.ndarray
    indices: np.ndarray
    points: np.ndarray

    def occupancy(self) -> Tuple[float, float]:
        f1 = float(np.mean(self.regions == 1)) if len(self.regions) else 0.0
        return f1, 1.0 - f1


@dataclass
class CombineResult:
    sample: MaterialisedSample
    accepted: np.ndarray
    bandwidths: Tuple[np.ndarray, np.ndarray]
    ratios: Tuple[np.ndarray, np.ndarray]
    overlap: bool

    @property
    def acceptance(self) -> float:
        return float(self.accepted.mean())

    @property
    def occupancy(self) -> Tuple[float, float]:
        return self.sample.occupancy()

    def summary(self) -> Dict:
        return {
            "iters": int(len(self.accepted)),
            "acceptance": self.acceptance,
            "occupancy": list(self.occupancy),
            "bandwidths": [h.tolist() for h in self.bandwidths],
            "mean_ratio": [float(np.mean(r)) for r in self.ratios],
            "overlap_warning": bool(self.overlap),
        }


# ─────────────────────────────────────────────────────── KDE
def bandwidths(points, cfg: LooKdeConfig) -> np.ndarray:
    """Per-coordinate bandwidths of the product Gaussian kernel."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = pts.shape
    if cfg.bandwidth_rule == "fixed":
        return np.broadcast_to(np.asarray(cfg.h, dtype=float), (d,)).copy()
    std = pts.std(axis=0, ddof=1)
    if np.any(std <= 0):
        raise ConfigError("a coordinate has zero spread; use a fixed bandwidth")
    if cfg.bandwidth_rule == "scott":
        factor = n ** (-1.0 / (d + 4))
    else:
        factor = (n * (d + 2) / 4.0) ** (-1.0 / (d + 4))
    return std * factor


def _log_kernel(x, centres, h) -> np.ndarray:
    """log K_h(x − c) for rows of x against rows of centres, shape (len(x), len(centres))."""
    sq = cdist(np.atleast_2d(x) / h, centres / h, "sqeuclidean")
    return -0.5 * sq - 0.5 * len(h) * LOG_2PI - np.log(h).sum()


def duplicate_groups(points) -> Tuple[np.ndarray, np.ndarray]:
    """Group id of every row and the size of each group of identical rows."""
    _, inverse, counts = np.unique(np.asarray(points, dtype=float), axis=0,
                                   return_inverse=True, return_counts=True)
    return inverse.reshape(-1), counts


def log_kde_eval_loo(sample: RegionSample, cfg: LooKdeConfig, i: Optional[int], x,
                     h: Optional[np.ndarray] = None) -> float:
    """
    log π̂^(−i)(x); i = None keeps every point.

    Leaving X_i out drops every stored copy of X_i as well, since rejected
    chain moves repeat states.
    """
    h = bandwidths(sample.points, cfg) if h is None else h
    lk = _log_kernel(np.asarray(x, dtype=float), sample.points, h)[0]
    if i is None:
        return float(logsumexp(lk) - math.log(sample.n))
    if not 0 <= i < sample.n:
        raise InputError(f"index {i} out of range 0..{sample.n - 1}")
    same = np.all(sample.points == sample.points[i], axis=1)
    kept = sample.n - int(same.sum())
    if kept == 0:
        raise DataError(f"region {sample.region_id}: every stored point equals point {i}")
    lk[same] = -np.inf
    return float(logsumexp(lk) - math.log(kept))


def kde_eval_loo(sample: RegionSample, cfg: LooKdeConfig, i: Optional[int], x,
                 h: Optional[np.ndarray] = None) -> float:
    return math.exp(log_kde_eval_loo(sample, cfg, i, x, h))


def loo_log_densities(sample: RegionSample, h: np.ndarray) -> np.ndarray:
    """log π̂^(−i)(X_i) for every i, copies of X_i left out too, chunked over rows."""
    n = sample.n
    groups, counts = duplicate_groups(sample.points)
    kept = n - counts[groups]
    if np.any(kept == 0):
        raise DataError(f"region {sample.region_id}: all stored points are identical")
    if len(counts) < n:
        logger.info("region %d: %d repeated states left out of their own estimates",
                    sample.region_id, n - len(counts))
    out = np.empty(n)
    chunk = max(1, PAIR_BUDGET // n)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        lk = _log_kernel(sample.points[start:stop], sample.points, h)
        lk[groups[start:stop, None] == groups[None, :]] = -np.inf
        out[start:stop] = logsumexp(lk, axis=1)
    return out - np.log(kept)


# ─────────────────────────────────────────────────────── ratio estimators
def unbiased_ratio(sample: RegionSample, cfg: LooKdeConfig, i: int, target=None) -> float:
    """R^(i) = π̂^(−i)(X_i) / γ(X_i)."""
    lg = sample.log_gamma_at_points[i] if target is None else target.log_density(sample.points[i])
    if lg == -np.inf:
        raise DataError(f"γ = 0 at point {i} of region {sample.region_id}")
    return math.exp(log_kde_eval_loo(sample, cfg, i, sample.points[i]) - lg)


def unbiased_ratios(sample: RegionSample, cfg: LooKdeConfig,
                    h: Optional[np.ndarray] = None) -> np.ndarray:
    h = bandwidths(sample.points, cfg) if h is None else h
    return np.exp(loo_log_densities(sample, h) - sample.log_gamma_at_points)


# ─────────────────────────────────────────────────────── index chain
def jump_step(state: IndexChainState, ratios_1: np.ndarray, ratios_2: np.ndarray,
              rng: np.random.Generator,
              totals: Optional[Tuple[float, float]] = None) -> IndexChainState:
    """One jumping-modes iteration; a region change means the jump was accepted."""
    ratios = (ratios_1, ratios_2)
    if totals is None:
        totals = (math.fsum(ratios_1), math.fsum(ratios_2))
    m, i = state.m, state.i
    n = 3 - m
    r_m, r_n = ratios[m - 1], ratios[n - 1]
    j = int(rng.integers(len(r_n)))
    # leave-one-out averages of the 1/Z estimates on each side
    num = (totals[m - 1] - r_m[i]) / (len(r_m) - 1)
    den = (totals[n - 1] - r_n[j]) / (len(r_n) - 1)
    u = rng.random()
    if den <= 0 or u < min(1.0, num / den):
        return IndexChainState(n, j)
    return state


def _check_pair(sample_1: RegionSample, sample_2: RegionSample):
    if sample_1.dim != sample_2.dim:
        raise InputError(f"samples differ in dimension: {sample_1.dim} vs {sample_2.dim}")


def overlap_check(sample_1: RegionSample, sample_2: RegionSample, h: np.ndarray) -> bool:
    """True when some point of region 1 lies within one bandwidth of a point of region 2."""
    tree = cKDTree(sample_2.points / h)
    dist, _ = tree.query(sample_1.points / h, k=1)
    return bool(np.any(dist < 1.0))


def _as_region(sample, region_id: int, target) -> RegionSample:
    if isinstance(sample, RegionSample):
        return sample
    return RegionSample.from_points(sample, region_id, target)


def combine_run(sample_1, sample_2, target, cfg: LooKdeConfig, iters: int,
                rng: np.random.Generator, progress: bool = False) -> CombineResult:
    if int(iters) < 1:
        raise InputError(f"iters must be >= 1, got {iters}")
    s1 = _as_region(sample_1, 1, target)
    s2 = _as_region(sample_2, 2, target)
    _check_pair(s1, s2)
    if target is not None and s1.dim != target.dim:
        raise InputError(f"samples have d={s1.dim}, target has d={target.dim}")

    h1, h2 = bandwidths(s1.points, cfg), bandwidths(s2.points, cfg)
    overlap = overlap_check(s1, s2, np.maximum(h1, h2))
    if overlap:
        logger.warning("regions overlap: a point of sample 1 is within one bandwidth of sample 2")

    r1, r2 = unbiased_ratios(s1, cfg, h1), unbiased_ratios(s2, cfg, h2)
    totals = (math.fsum(r1), math.fsum(r2))
    logger.debug("mean ratios %.6g / %.6g", np.mean(r1), np.mean(r2))

    iters = int(iters)
    regions = np.empty(iters, dtype=np.int8)
    indices = np.empty(iters, dtype=np.int64)
    accepted = np.zeros(iters, dtype=bool)
    state = IndexChainState(1, 0)
    for t in tqdm(range(iters), desc="combine", disable=not progress, mininterval=1.0):
        new = jump_step(state, r1, r2, rng, totals)
        accepted[t] = new.m != state.m
        state = new
        regions[t], indices[t] = state.m, state.i

    points = np.where((regions == 1)[:, None],
                      s1.points[np.minimum(indices, s1.n - 1)],
                      s2.points[np.minimum(indices, s2.n - 1)])
    return CombineResult(sample=MaterialisedSample(regions, indices, points), accepted=accepted,
                         bandwidths=(h1, h2), ratios=(r1, r2), overlap=overlap)


def resample_oracle(sample_1, sample_2, w1: float, w2: float, n: int,
                    rng: np.random.Generator) -> MaterialisedSample:
    """Reference sample with known region weights: region m w.p. w_m, uniform index within."""
    if abs(w1 + w2 - 1.0) > 1e-9 or w1 < 0 or w2 < 0:
        raise InputError(f"weights must be nonnegative and sum to 1, got {w1}, {w2}")
    p1 = np.atleast_2d(np.asarray(getattr(sample_1, "points", sample_1), dtype=float))
    p2 = np.atleast_2d(np.asarray(getattr(sample_2, "points", sample_2), dtype=float))
    regions = np.where(rng.random(n) < w1, 1, 2).astype(np.int8)
    indices = np.where(regions == 1, rng.integers(len(p1), size=n), rng.integers(len(p2), size=n))
    points = np.where((regions == 1)[:, None],
                      p1[np.minimum(indices, len(p1) - 1)],
                      p2[np.minimum(indices, len(p2) - 1)])
    return MaterialisedSample(regions, indices, points)
