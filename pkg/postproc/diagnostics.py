# postproc/diagnostics.py
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import logsumexp

from postproc.combine import PAIR_BUDGET, LooKdeConfig, bandwidths
from sampler.errors import InputError
from sampler.state import KIND_NAMES
from sampler.twalk_core import Trace

logger = logging.getLogger(__name__)

MIN_IAT_LENGTH = 100


# ─────────────────────────────────────────────────────── autocorrelation
class IATEstimate(NamedTuple):
    tau: float
    degenerate: bool


def autocorrelation(series) -> np.ndarray:
    """Normalised autocorrelation at every lag, via zero-padded FFT."""
    x = np.asarray(series, dtype=float)
    n = len(x)
    x = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    return acov / acov[0]


def iat_estimate(series) -> IATEstimate:
    """Geyer initial positive sequence: τ = −1 + 2 Σ (ρ_2k + ρ_2k+1), stopped at the first non-positive pair."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or len(x) < MIN_IAT_LENGTH:
        raise InputError(f"IAT needs a 1-d series of length >= {MIN_IAT_LENGTH}, got {x.shape}")
    if np.ptp(x) == 0:
        logger.warning("constant series; IAT reported as 1")
        return IATEstimate(1.0, True)
    rho = autocorrelation(x)
    m = len(rho) // 2
    pairs = rho[: 2 * m : 2] + rho[1 : 2 * m : 2]
    nonpos = np.flatnonzero(pairs <= 0)
    k = nonpos[0] if nonpos.size else m
    tau = -1.0 + 2.0 * pairs[:k].sum()
    return IATEstimate(max(1.0, float(tau)), False)


def iat(series) -> float:
    return iat_estimate(series).tau


def ess(series) -> float:
    return len(series) / iat(series)


# ─────────────────────────────────────────────────────── trace summaries
def _retained(trace: Trace, burn_in: int = 0) -> np.ndarray:
    if burn_in < 0:
        raise InputError("burn-in must be >= 0")
    if burn_in >= trace.n_iters:
        raise InputError(f"burn-in {burn_in} leaves nothing of a {trace.n_iters}-iteration trace")
    window = trace.x[trace.iters > burn_in]
    if len(window) == 0:
        raise InputError("no retained states after burn-in")
    return window


def _points(source: Union[Trace, np.ndarray], burn_in: int = 0) -> np.ndarray:
    if isinstance(source, Trace):
        return _retained(source, burn_in)
    return np.atleast_2d(np.asarray(source, dtype=float))


def ergodic_average(trace: Trace, h: Callable[[np.ndarray], float], burn_in: int = 0) -> float:
    """(1/T′) Σ_{t>b} h(X_t) over the retained x-chain."""
    xs = _retained(trace, burn_in)
    return float(np.mean([h(p) for p in xs]))


def nearest_centre(points: np.ndarray, centres: Sequence) -> np.ndarray:
    centres = np.atleast_2d(np.asarray(centres, dtype=float))
    if centres.size == 0:
        raise InputError("need at least one centre")
    _, labels = cKDTree(centres).query(points, k=1)
    return labels


def mode_occupancy(source: Union[Trace, np.ndarray], centres: Sequence, burn_in: int = 0) -> np.ndarray:
    pts = _points(source, burn_in)
    labels = nearest_centre(pts, centres)
    return np.bincount(labels, minlength=len(centres)) / len(labels)


def basin_switches(source: Union[Trace, np.ndarray], centres: Sequence, burn_in: int = 0) -> int:
    labels = nearest_centre(_points(source, burn_in), centres)
    return int(np.count_nonzero(np.diff(labels)))


# ─────────────────────────────────────────────────────── KDE grid
@dataclass
class KdeGrid:
    xs: np.ndarray          # (gx,)
    ys: np.ndarray          # (gy,)
    density: np.ndarray     # (gy, gx), density[j, i] at (xs[i], ys[j])
    dims: Tuple[int, int] = (0, 1)

    @property
    def cell_area(self) -> float:
        return float((self.xs[1] - self.xs[0]) * (self.ys[1] - self.ys[0]))

    def argmax(self) -> Tuple[float, float]:
        j, i = np.unravel_index(np.argmax(self.density), self.density.shape)
        return float(self.xs[i]), float(self.ys[j])

    def rows(self):
        gx, gy = np.meshgrid(self.xs, self.ys)
        return np.column_stack([gx.ravel(), gy.ravel(), self.density.ravel()])


def kde_grid(points, dims: Tuple[int, int] = (0, 1), grid: int = 100,
             bandwidth: Union[str, float] = "scott") -> KdeGrid:
    """2-d marginal product-Gaussian KDE on a regular grid over the data range padded by 10%."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] < 2:
        raise InputError("kde_grid needs at least 2 points")
    if int(grid) < 2:
        raise InputError("grid resolution must be >= 2")
    sub = pts[:, list(dims)]
    h = bandwidths(sub, LooKdeConfig.parse(bandwidth))

    lo, hi = sub.min(axis=0), sub.max(axis=0)
    span = hi - lo
    pad = np.where(span > 0, 0.1 * span, 3.0 * h)
    xs = np.linspace(lo[0] - pad[0], hi[0] + pad[0], int(grid))
    ys = np.linspace(lo[1] - pad[1], hi[1] + pad[1], int(grid))
    gx, gy = np.meshgrid(xs, ys)
    nodes = np.column_stack([gx.ravel(), gy.ravel()])

    log_dens = np.empty(len(nodes))
    chunk = max(1, PAIR_BUDGET // len(sub))
    norm = -math.log(2.0 * math.pi) - np.log(h).sum() - math.log(len(sub))
    for start in range(0, len(nodes), chunk):
        block = nodes[start:start + chunk]
        z = ((block[:, None, :] - sub[None, :, :]) / h) ** 2
        log_dens[start:start + chunk] = logsumexp(-0.5 * z.sum(axis=2), axis=1) + norm
    return KdeGrid(xs, ys, np.exp(log_dens).reshape(gy.shape), tuple(dims))


# ─────────────────────────────────────────────────────── report
@dataclass
class DiagnosticsReport:
    iat_per_coordinate: List[float]
    ess: List[float]
    global_acceptance: float
    per_move_acceptance: Dict[str, float]
    mode_occupancy: List[float] = field(default_factory=list)
    basin_switches: Optional[int] = None
    degenerate_coordinates: List[int] = field(default_factory=list)
    n_retained: int = 0
    burn_in: int = 0

    def to_dict(self) -> Dict:
        return asdict(self)


def diagnose(trace: Trace, centres: Optional[Sequence] = None, burn_in: int = 0) -> DiagnosticsReport:
    xs = _retained(trace, burn_in)
    taus, degenerate = [], []
    for j in range(xs.shape[1]):
        if len(xs) < MIN_IAT_LENGTH:
            taus.append(float("nan"))
            continue
        est = iat_estimate(xs[:, j])
        taus.append(est.tau)
        if est.degenerate:
            degenerate.append(j)
    if len(xs) < MIN_IAT_LENGTH:
        logger.warning("only %d retained states; IAT not estimated", len(xs))

    kinds = trace.kinds[burn_in:]
    acc = trace.accepted[burn_in:]
    per_move = {}
    for code, name in enumerate(KIND_NAMES):
        mask = kinds == code
        if mask.any():
            per_move[name] = float(acc[mask].mean())

    report = DiagnosticsReport(
        iat_per_coordinate=taus,
        ess=[len(xs) / t for t in taus],
        global_acceptance=float(acc.mean()),
        per_move_acceptance=per_move,
        degenerate_coordinates=degenerate,
        n_retained=int(len(xs)),
        burn_in=int(burn_in),
    )
    if centres is not None and len(centres):
        report.mode_occupancy = mode_occupancy(xs, centres).tolist()
        report.basin_switches = basin_switches(xs, centres)
    return report
