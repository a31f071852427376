# sampler/twalk_core.py
"""
The t-walk on the product space: two points (x, y) targeting π(x)π(y).

Each step picks one of
  • walk / traverse / hop / blow  – the base moves, updating x or y (fair coin)
    on a random coordinate subset of expected size min(d, n₁)
  • penalty                       – the penalised pair move (sampler.penalty)
and accepts by Metropolis-Hastings in log space.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from sampler.errors import ConfigError, InitError, InputError
from sampler.penalty import PenaltyConfig, penalised_move
from sampler.state import (BASE_KINDS, BLOW, HOP, KIND_NAMES, PENALTY, TRAVERSE, WALK,
                           MoveRecord, PairState)
from utils.rng_streams import CHAIN_STREAM, START_STREAM, log_uniform, make_rng

logger = logging.getLogger(__name__)

DEFAULT_MOVE_WEIGHTS = (0.4918, 0.4918, 0.0082, 0.0082)   # walk, traverse, hop, blow


# ─────────────────────────────────────────────────────── configuration
@dataclass(frozen=True)
class KernelConfig:
    base_move_probs: Tuple[float, float, float, float] = DEFAULT_MOVE_WEIGHTS
    penalty_prob: float = 0.10
    walk_param: float = 1.5
    traverse_param: float = 6.0
    coord_update_target: int = 4
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    seed: int = 0

    def __post_init__(self):
        probs = np.asarray(self.base_move_probs, dtype=float)
        if probs.shape != (4,) or np.any(probs < 0) or not probs.sum() > 0:
            raise ConfigError(f"move weights must be 4 nonnegative numbers, got {self.base_move_probs}")
        # stored normalised so (1 − p)·probs + p sums to 1
        object.__setattr__(self, "base_move_probs", tuple(float(p) for p in probs / probs.sum()))
        if not 0.0 <= self.penalty_prob <= 1.0:
            raise ConfigError(f"penalty probability must lie in [0, 1], got {self.penalty_prob}")
        if not self.walk_param > 0:
            raise ConfigError("walk parameter must be positive")
        if not self.traverse_param > 1:
            raise ConfigError("traverse parameter must exceed 1")
        if int(self.coord_update_target) < 1:
            raise ConfigError("coordinate update target must be >= 1")

    @classmethod
    def from_settings(cls, s: Dict, seed: Optional[int] = None) -> "KernelConfig":
        penalty_prob = 0.0 if s.get("PENALTY_VARIANT") == "none" else float(s.get("PENALTY_PROB", 0.10))
        return cls(
            base_move_probs=tuple(s.get("MOVE_WEIGHTS", DEFAULT_MOVE_WEIGHTS)),
            penalty_prob=penalty_prob,
            walk_param=float(s.get("WALK_PARAM", 1.5)),
            traverse_param=float(s.get("TRAVERSE_PARAM", 6.0)),
            coord_update_target=int(s.get("COORD_UPDATE_TARGET", 4)),
            penalty=PenaltyConfig.from_settings(s),
            seed=int(s.get("SEED", 0) if seed is None else seed),
        )

    def to_dict(self) -> Dict:
        out = asdict(self)
        out["base_move_probs"] = list(self.base_move_probs)
        return out

    @property
    def cumulative_probs(self) -> np.ndarray:
        return np.cumsum(self.base_move_probs)


# ─────────────────────────────────────────────────────── trace
@dataclass
class Trace:
    """
    Thinned states plus the full per-iteration move log.
      • row 0 of the state arrays is the initial state (iteration 0)
      • move arrays have one entry per iteration 1..T
    """
    iters: np.ndarray
    x: np.ndarray
    y: np.ndarray
    log_gamma_x: np.ndarray
    log_gamma_y: np.ndarray
    kinds: np.ndarray
    accepted: np.ndarray
    log_mh_ratio: np.ndarray
    trials: np.ndarray          # 0 where the move has no trial count
    failed: np.ndarray
    thin: int = 1
    config: Dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def n_iters(self) -> int:
        return len(self.kinds)

    @property
    def states(self) -> List[PairState]:
        return [PairState(self.x[k], self.y[k], float(self.log_gamma_x[k]), float(self.log_gamma_y[k]))
                for k in range(len(self.iters))]

    @property
    def records(self) -> List[MoveRecord]:
        return [MoveRecord(t + 1, int(self.kinds[t]), bool(self.accepted[t]), float(self.log_mh_ratio[t]),
                           int(self.trials[t]) if self.trials[t] > 0 else None, bool(self.failed[t]))
                for t in range(self.n_iters)]

    def global_acceptance(self) -> float:
        return float(self.accepted.mean()) if self.n_iters else 0.0

    def acceptance_by_kind(self) -> Dict[str, float]:
        """Acceptance rate per move kind that was actually proposed."""
        out = {}
        for code, name in enumerate(KIND_NAMES):
            mask = self.kinds == code
            if mask.any():
                out[name] = float(self.accepted[mask].mean())
        return out

    def tallies(self) -> Dict[str, Dict[str, int]]:
        return {name: {"proposed": int((self.kinds == code).sum()),
                       "accepted": int(self.accepted[self.kinds == code].sum())}
                for code, name in enumerate(KIND_NAMES)}


# ─────────────────────────────────────────────────────── init
def init_chain(target, x0, y0, cfg: Optional[KernelConfig] = None) -> PairState:
    x0 = np.array(x0, dtype=float)
    y0 = np.array(y0, dtype=float)
    if x0.shape != (target.dim,) or y0.shape != (target.dim,):
        raise InitError(f"start points must have length {target.dim}")
    clash = np.flatnonzero(x0 == y0)
    if clash.size:
        raise InitError(f"x0 and y0 coincide in coordinate(s) {clash.tolist()}; jitter one of them")
    lg_x = target.log_density(x0)
    lg_y = target.log_density(y0)
    if not math.isfinite(lg_x) or not math.isfinite(lg_y):
        raise InitError(f"start points need finite log density (got {lg_x}, {lg_y})")
    return PairState(x0, y0, lg_x, lg_y)


def default_start(target, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """First declared centre plus unit Gaussian jitter, from the start-point stream."""
    rng = make_rng(seed, START_STREAM)
    centre = target.centres[0] if target.centres else np.zeros(target.dim)
    return centre + rng.standard_normal(target.dim), centre + rng.standard_normal(target.dim)


# ─────────────────────────────────────────────────────── base moves
def walk_factors(aw: float, d: int, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(d)
    return (aw / (1.0 + aw)) * (aw * u * u + 2.0 * u - 1.0)


def walk_proposal(cur, other, phi, z) -> np.ndarray:
    return np.where(phi, cur + (cur - other) * z, cur)


def draw_beta(at: float, rng: np.random.Generator) -> float:
    if rng.random() < (at - 1.0) / (2.0 * at):
        return (1.0 - rng.random()) ** (1.0 / (at + 1.0))
    return (1.0 - rng.random()) ** (1.0 / (1.0 - at))


def traverse_proposal(cur, other, phi, beta: float) -> np.ndarray:
    return np.where(phi, other + beta * (other - cur), cur)


def _log_gauss(diff: np.ndarray, sigma: float) -> float:
    return -diff.size * math.log(sigma) - 0.5 * float(diff @ diff) / sigma ** 2


def base_move(state: PairState, kind: int, target, cfg: KernelConfig,
              rng: np.random.Generator, it: int = 0) -> Tuple[PairState, MoveRecord]:
    d = state.dim
    update_x = rng.random() < 0.5
    cur, other = (state.x, state.y) if update_x else (state.y, state.x)
    lg_cur = state.log_gamma_x if update_x else state.log_gamma_y

    # colliding coordinates never enter the subset
    phi = (rng.random(d) < min(d, cfg.coord_update_target) / d) & (cur != other)
    nphi = int(phi.sum())
    log_hastings = 0.0

    if nphi == 0:
        h = cur.copy()
    elif kind == WALK:
        h = walk_proposal(cur, other, phi, walk_factors(cfg.walk_param, d, rng))
    elif kind == TRAVERSE:
        beta = draw_beta(cfg.traverse_param, rng)
        h = traverse_proposal(cur, other, phi, beta)
        log_hastings = (nphi - 2) * math.log(beta)
    elif kind == HOP:
        sigma = np.abs(other - cur)[phi].max() / 3.0
        h = cur.copy()
        h[phi] = cur[phi] + sigma * rng.standard_normal(nphi)
        sigma_back = np.abs(other - h)[phi].max() / 3.0
        if sigma_back > 0:
            step_ = (h - cur)[phi]
            log_hastings = _log_gauss(step_, sigma_back) - _log_gauss(step_, sigma)
    elif kind == BLOW:
        sigma = np.abs(other - cur)[phi].max()
        h = cur.copy()
        h[phi] = other[phi] + sigma * rng.standard_normal(nphi)
        sigma_back = np.abs(other - h)[phi].max()
        if sigma_back > 0:
            log_hastings = (_log_gauss((cur - other)[phi], sigma_back)
                            - _log_gauss((h - other)[phi], sigma))
    else:
        raise InputError(f"not a base move kind: {kind}")

    if np.any(h[phi] == other[phi]):
        return state, MoveRecord(it, kind, False, -np.inf)
    lg_h = target.log_density(h)
    if lg_h == -np.inf:
        return state, MoveRecord(it, kind, False, -np.inf)

    log_r = lg_h - lg_cur + log_hastings
    accepted = log_uniform(rng) <= log_r
    if accepted:
        state = (PairState(h, state.y, lg_h, state.log_gamma_y) if update_x
                 else PairState(state.x, h, state.log_gamma_x, lg_h))
    return state, MoveRecord(it, kind, bool(accepted), float(log_r))


def step(state: PairState, target, cfg: KernelConfig, rng: np.random.Generator,
         it: int = 0) -> Tuple[PairState, MoveRecord]:
    if rng.random() < cfg.penalty_prob:
        return penalised_move(state, target, cfg.penalty, rng, it)
    kind = BASE_KINDS[min(int(np.searchsorted(cfg.cumulative_probs, rng.random(), side="right")), 3)]
    return base_move(state, kind, target, cfg, rng, it)


# ─────────────────────────────────────────────────────── chain
def run(target, cfg: KernelConfig, x0, y0, iters: int, thin: int = 1,
        progress: bool = False) -> Trace:
    if int(iters) < 1:
        raise InputError(f"iters must be >= 1, got {iters}")
    if int(thin) < 1:
        raise InputError(f"thin must be >= 1, got {thin}")
    if cfg.penalty_prob > 0 and cfg.penalty.variant == "gradient" and not target.has_gradient:
        raise ConfigError(f"target {target.name!r} has no gradient; use the rejection penalty")
    iters, thin = int(iters), int(thin)

    state = init_chain(target, x0, y0, cfg)
    rng = make_rng(cfg.seed, CHAIN_STREAM)

    n_keep = iters // thin + 1
    d = target.dim
    xs, ys = np.empty((n_keep, d)), np.empty((n_keep, d))
    lgx, lgy = np.empty(n_keep), np.empty(n_keep)
    kept = np.zeros(n_keep, dtype=np.int64)
    kinds = np.empty(iters, dtype=np.int8)
    accepted = np.zeros(iters, dtype=bool)
    log_r = np.empty(iters)
    trials = np.zeros(iters, dtype=np.int32)
    failed = np.zeros(iters, dtype=bool)

    xs[0], ys[0], lgx[0], lgy[0] = state.x, state.y, state.log_gamma_x, state.log_gamma_y
    k = 1
    logger.debug("running %d iterations on %s (d=%d, thin=%d)", iters, target.name, d, thin)
    for t in tqdm(range(1, iters + 1), desc=target.name, disable=not progress, mininterval=1.0):
        state, rec = step(state, target, cfg, rng, t)
        kinds[t - 1] = rec.kind
        accepted[t - 1] = rec.accepted
        log_r[t - 1] = rec.log_mh_ratio
        trials[t - 1] = rec.rejection_trials or 0
        failed[t - 1] = rec.failed
        if t % thin == 0:
            xs[k], ys[k], lgx[k], lgy[k] = state.x, state.y, state.log_gamma_x, state.log_gamma_y
            kept[k] = t
            k += 1

    n_failed = int(failed.sum())
    if n_failed:
        logger.warning("%d of %d penalised moves failed and were rejected", n_failed,
                       int((kinds == PENALTY).sum()))
    return Trace(iters=kept, x=xs, y=ys, log_gamma_x=lgx, log_gamma_y=lgy, kinds=kinds,
                 accepted=accepted, log_mh_ratio=log_r, trials=trials, failed=failed,
                 thin=thin, config={"kernel": cfg.to_dict(), "target": target.name,
                                    "iters": iters, "thin": thin, "seed": cfg.seed})
