# sampler/penalty.py
"""
Penalised proposals for the fifth t-walk move.

A penalty φ_xy(w) = 1 − ρ(Σ^{-1/2}(w − μ)) / ρ(0) vanishes at the pair centre
μ_xy and tends to 1 far away, so g·φ pushes proposals off the occupied mode.
Two samplers draw from the penalised proposal:

  • rejection (default): g is a location-scale family with scale κ·Σ^{1/2};
    the per-trial acceptance 𝔷 does not depend on the state.
  • gradient: Barker-type φ̃ built from ∇log π at the centre; exact draws via
    a single flip through μ, normaliser exactly 1/2.

The accepted draw w moves the whole pair rigidly (keep or swap), and the move
is corrected by a Metropolis-Hastings ratio in log space.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, gammaln

from sampler.errors import ConfigError, GradientError, InputError, SamplerFailure
from sampler.state import PENALTY, MoveRecord, PairState
from utils.rng_streams import log_uniform, make_rng

logger = logging.getLogger(__name__)

SHAPES = ("flipped_gaussian", "flipped_t", "flipped_bump")
PROPOSALS = ("gaussian", "student_t")
VARIANTS = ("rejection", "gradient")
PAIR_VARIANTS = ("keep", "swap")

SCALE_FLOOR = 1e-12
EXP_CLAMP = 700.0
MC_CHUNK = 200_000


# ─────────────────────────────────────────────────────── configuration
@dataclass(frozen=True)
class PenaltyConfig:
    shape: str = "flipped_t"
    penalty_df: Optional[float] = 2.0          # None → 1 − 1/(1+q)
    proposal_family: str = "student_t"
    proposal_df: float = 1.0
    kappa: float = 3.0
    variant: str = "rejection"
    max_trials: int = 10_000
    scale_floor: float = SCALE_FLOOR

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ConfigError(f"penalty shape must be one of {SHAPES}, got {self.shape!r}")
        if self.proposal_family not in PROPOSALS:
            raise ConfigError(f"proposal family must be one of {PROPOSALS}, got {self.proposal_family!r}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"penalty variant must be one of {VARIANTS}, got {self.variant!r}")
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ConfigError(f"kappa must be positive, got {self.kappa}")
        if self.penalty_df is not None and not self.penalty_df > 0:
            raise ConfigError(f"penalty df must be positive, got {self.penalty_df}")
        if not self.proposal_df > 0:
            raise ConfigError(f"proposal df must be positive, got {self.proposal_df}")
        if int(self.max_trials) < 1:
            raise ConfigError("max_trials must be >= 1")
        if not self.scale_floor > 0:
            raise ConfigError("scale floor must be positive")

    @classmethod
    def from_settings(cls, s: Dict) -> "PenaltyConfig":
        variant = s.get("PENALTY_VARIANT", "rejection")
        return cls(
            shape=s.get("PENALTY_SHAPE", "flipped_t"),
            penalty_df=s.get("PENALTY_DF", 2.0),
            proposal_family=s.get("PROPOSAL_FAMILY", "student_t"),
            proposal_df=float(s.get("PROPOSAL_DF", 1.0)),
            kappa=float(s.get("KAPPA", 3.0)),
            variant="rejection" if variant == "none" else variant,
            max_trials=int(s.get("MAX_TRIALS", 10_000)),
            scale_floor=float(s.get("SCALE_FLOOR", SCALE_FLOOR)),
        )

    def to_dict(self) -> Dict:
        return asdict(self)

    @property
    def proposal_label(self) -> str:
        if self.proposal_family == "gaussian":
            return "gaussian"
        return f"t{self.proposal_df:g}"


@dataclass(frozen=True)
class PenaltyGeometry:
    mu: np.ndarray
    sigma_diag: np.ndarray

    @property
    def scale(self) -> np.ndarray:
        return np.sqrt(self.sigma_diag)


def center_scale(x, y, floor: float = SCALE_FLOOR) -> PenaltyGeometry:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise InputError(f"pair dimensions differ: {x.shape} vs {y.shape}")
    return PenaltyGeometry(mu=0.5 * (x + y), sigma_diag=np.maximum((x - y) ** 2, floor))


# ─────────────────────────────────────────────────────── penalty shapes
def _log_rho_ratio(shape: str, q, d: int, df: Optional[float]):
    """log ρ(z)/ρ(0) as a function of q = |z|²; always ≤ 0."""
    q = np.asarray(q, dtype=float)
    if shape == "flipped_gaussian":
        return -0.5 * q
    if shape == "flipped_t":
        if df is None:
            return -np.log1p(q)
        return -0.5 * (df + d) * np.log1p(q / df)
    if shape == "flipped_bump":
        inside = q < 1.0
        q_in = np.where(inside, q, 0.0)
        return np.where(inside, 1.0 - 1.0 / (1.0 - q_in), -np.inf)
    raise ConfigError(f"unknown penalty shape {shape!r}")


def _mahalanobis_sq(geom: PenaltyGeometry, w) -> np.ndarray:
    z = np.asarray(w, dtype=float) - geom.mu
    return np.sum(z * z / geom.sigma_diag, axis=-1)


def penalty_eval(shape: str, geom: PenaltyGeometry, w, df: Optional[float] = 2.0):
    """φ_xy(w) ∈ [0, 1]; 0 only at w = μ."""
    q = _mahalanobis_sq(geom, w)
    return -np.expm1(_log_rho_ratio(shape, q, geom.mu.shape[-1], df))


def log_penalty_eval(shape: str, geom: PenaltyGeometry, w, df: Optional[float] = 2.0):
    q = _mahalanobis_sq(geom, w)
    with np.errstate(divide="ignore"):
        return np.log(-np.expm1(_log_rho_ratio(shape, q, geom.mu.shape[-1], df)))


def _check_grad(grad) -> np.ndarray:
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        raise GradientError("non-finite gradient; the gradient penalty is unusable at this state")
    return grad


def gradient_penalty_eval(grad, mu_t, w):
    """φ̃(w) = 1 / (1 + exp(∇l(μ̃)·(w − μ̃))), exponent clamped to ±700."""
    grad = _check_grad(grad)
    s = np.clip((np.asarray(w, dtype=float) - mu_t) @ grad, -EXP_CLAMP, EXP_CLAMP)
    return expit(-s)


def log_gradient_penalty_eval(grad, mu_t, w):
    grad = _check_grad(grad)
    s = np.clip((np.asarray(w, dtype=float) - mu_t) @ grad, -EXP_CLAMP, EXP_CLAMP)
    return -np.logaddexp(0.0, s)


# ─────────────────────────────────────────────────────── proposal family g
def standard_draws(cfg: PenaltyConfig, n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """n draws from the unit-scale, zero-centred proposal (Gaussian over chi for t)."""
    z = rng.standard_normal((n, d))
    if cfg.proposal_family == "student_t":
        nu = cfg.proposal_df
        z /= np.sqrt(rng.chisquare(nu, size=n) / nu)[:, None]
    return z


def log_g_standard(cfg: PenaltyConfig, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    d = z.shape[-1]
    r2 = np.sum(z * z, axis=-1)
    if cfg.proposal_family == "gaussian":
        return -0.5 * d * math.log(2.0 * math.pi) - 0.5 * r2
    nu = cfg.proposal_df
    return (gammaln(0.5 * (nu + d)) - gammaln(0.5 * nu) - 0.5 * d * math.log(nu * math.pi)
            - 0.5 * (nu + d) * np.log1p(r2 / nu))


def _proposal_scale(geom: PenaltyGeometry, cfg: PenaltyConfig) -> np.ndarray:
    # rejection variant dilates by κ; the flip sampler uses Σ̃ as is
    if cfg.variant == "rejection":
        return cfg.kappa * geom.scale
    return geom.scale


def log_g(cfg: PenaltyConfig, geom: PenaltyGeometry, w) -> float:
    scale = _proposal_scale(geom, cfg)
    return float(log_g_standard(cfg, (np.asarray(w) - geom.mu) / scale) - np.log(scale).sum())


# ─────────────────────────────────────────────────────── samplers
def sample_flip(geom: PenaltyGeometry, grad, cfg: PenaltyConfig, rng: np.random.Generator) -> np.ndarray:
    """Draw W ~ g, keep it with probability φ̃(W), otherwise reflect through μ̃."""
    grad = _check_grad(grad)
    d = geom.mu.shape[0]
    w = geom.mu + geom.scale * standard_draws(cfg, 1, d, rng)[0]
    if rng.random() <= gradient_penalty_eval(grad, geom.mu, w):
        return w
    return 2.0 * geom.mu - w


def sample_rejection(geom: PenaltyGeometry, cfg: PenaltyConfig,
                     rng: np.random.Generator) -> Tuple[np.ndarray, int]:
    d = geom.mu.shape[0]
    scale = cfg.kappa * geom.scale
    for trials in range(1, int(cfg.max_trials) + 1):
        w = geom.mu + scale * standard_draws(cfg, 1, d, rng)[0]
        if penalty_eval(cfg.shape, geom, w, cfg.penalty_df) >= rng.random():
            return w, trials
    raise SamplerFailure(int(cfg.max_trials))


# ─────────────────────────────────────────────────────── normalising constant
class NormConstEstimate(NamedTuple):
    z_hat: float
    std_err: float
    n: int
    deficit: float           # 1 − z_hat, kept separately since it underflows z_hat near 1


def normconst_closed(d: int, kappa: float) -> float:
    """𝔷 for Gaussian penalty with Gaussian proposal: 1 − (1 + κ²)^{−d/2}."""
    return float(-np.expm1(-0.5 * d * np.log1p(kappa ** 2)))


def normconst_estimate(cfg: PenaltyConfig, d: int, n: int, rng: np.random.Generator,
                       chunk: int = MC_CHUNK) -> NormConstEstimate:
    """
    Monte Carlo 𝔷 = E_g[φ(κW)] for standard W, with its standard error.

    Works on the deficit δ = ρ(κW)/ρ(0) = 1 − φ, so cells with 𝔷 within 1e-16
    of 1 keep a resolved mean and a nonzero spread. Chunk moments are merged
    with the pairwise (Chan) update.
    """
    if n < 1:
        raise InputError("normconst_mc needs n >= 1")
    done, mean, m2 = 0, 0.0, 0.0
    while done < n:
        m = min(chunk, n - done)
        w = standard_draws(cfg, m, d, rng)
        q = cfg.kappa ** 2 * np.sum(w * w, axis=1)
        delta = np.exp(_log_rho_ratio(cfg.shape, q, d, cfg.penalty_df))
        c_mean = float(delta.mean())
        c_m2 = float(np.sum((delta - c_mean) ** 2))
        total = done + m
        diff = c_mean - mean
        mean += diff * m / total
        m2 += c_m2 + diff * diff * done * m / total
        done = total
    se = math.sqrt(m2 / (n - 1) / n) if n > 1 else float("nan")
    return NormConstEstimate(z_hat=1.0 - mean, std_err=se, n=n, deficit=mean)


def normconst_mc(cfg: PenaltyConfig, d: int, n: int, rng: np.random.Generator) -> float:
    return normconst_estimate(cfg, d, n, rng).z_hat


def _table_row(args) -> Dict:
    shape, penalty_df, proposal_df, d, kappa, n, seed, stream = args
    cfg = PenaltyConfig(shape=shape, penalty_df=penalty_df, proposal_family="student_t",
                        proposal_df=proposal_df, kappa=kappa)
    est = normconst_estimate(cfg, d, n, make_rng(seed, stream))
    label = shape if shape != "flipped_t" or penalty_df is None else f"flipped_t{penalty_df:g}"
    return {"penalty_shape": label, "proposal": cfg.proposal_label, "d": d, "kappa": kappa,
            "n": n, "z_hat": est.z_hat, "deficit": est.deficit, "std_err": est.std_err}


def normconst_table(dims: Sequence[int], kappas: Sequence[float], n: int, seed: int = 0,
                    workers: int = 1,
                    shapes: Sequence[str] = ("flipped_gaussian", "flipped_t"),
                    penalty_df: Optional[float] = 2.0,
                    proposal_df: float = 1.0) -> List[Dict]:
    """(shape × d × κ) grid of 𝔷 estimates under a heavy-tailed t proposal; row k uses stream k."""
    jobs = []
    for shape in shapes:
        for d in dims:
            for kappa in kappas:
                jobs.append((shape, penalty_df, proposal_df, int(d), float(kappa), int(n), seed, len(jobs)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_table_row, jobs))
    return [_table_row(job) for job in jobs]


# ─────────────────────────────────────────────────────── pair transform + MH
def propose_pair(x, y, w, variant: str = "keep", mu=None) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if mu is None:
        mu = 0.5 * (x + y)
    shift = np.asarray(w, dtype=float) - mu
    if variant == "keep":
        return x + shift, y + shift
    if variant == "swap":
        return y + shift, x + shift
    raise InputError(f"pair variant must be one of {PAIR_VARIANTS}, got {variant!r}")


def _log_proposal(target, cfg: PenaltyConfig, geom: PenaltyGeometry, w) -> float:
    """log g(w | pair) + log φ_pair(w), the unnormalised penalised proposal."""
    lg = log_g(cfg, geom, w)
    if cfg.variant == "gradient":
        grad = target.gradient(geom.mu)
        return lg + float(log_gradient_penalty_eval(grad, geom.mu, w))
    return lg + float(log_penalty_eval(cfg.shape, geom, w, cfg.penalty_df))


def _log_ratio(target, x, y, u, v, w, cfg: PenaltyConfig,
               lg_x: float, lg_y: float) -> Tuple[float, float, float]:
    lg_u = target.log_density(u)
    lg_v = target.log_density(v)
    if lg_u == -np.inf or lg_v == -np.inf:
        return -np.inf, lg_u, lg_v
    geom_xy = center_scale(x, y, cfg.scale_floor)
    geom_uv = center_scale(u, v, cfg.scale_floor)
    fwd = _log_proposal(target, cfg, geom_xy, w)
    if fwd == -np.inf:
        return -np.inf, lg_u, lg_v                 # φ_xy(w) = 0: forced rejection
    rev = _log_proposal(target, cfg, geom_uv, geom_xy.mu)
    return lg_u + lg_v - lg_x - lg_y + rev - fwd, lg_u, lg_v


def mh_ratio_penalised(target, x, y, u, v, w, cfg: PenaltyConfig,
                       log_gamma_x: Optional[float] = None,
                       log_gamma_y: Optional[float] = None) -> float:
    """log of γ(u)γ(v) g(μ_xy|u,v) φ_uv(μ_xy) / [γ(x)γ(y) g(w|x,y) φ_xy(w)]."""
    lg_x = target.log_density(x) if log_gamma_x is None else log_gamma_x
    lg_y = target.log_density(y) if log_gamma_y is None else log_gamma_y
    return _log_ratio(target, x, y, u, v, w, cfg, lg_x, lg_y)[0]


def penalised_move(state: PairState, target, cfg: PenaltyConfig, rng: np.random.Generator,
                   it: int = 0) -> Tuple[PairState, MoveRecord]:
    geom = center_scale(state.x, state.y, cfg.scale_floor)
    trials = None
    try:
        if cfg.variant == "gradient":
            w = sample_flip(geom, target.gradient(geom.mu), cfg, rng)
        else:
            w, trials = sample_rejection(geom, cfg, rng)
        variant = PAIR_VARIANTS[int(rng.random() < 0.5)]
        u, v = propose_pair(state.x, state.y, w, variant, geom.mu)
        log_r, lg_u, lg_v = _log_ratio(target, state.x, state.y, u, v, w, cfg,
                                       state.log_gamma_x, state.log_gamma_y)
    except SamplerFailure as e:
        logger.warning("iter %d: %s; move rejected", it, e)
        return state, MoveRecord(it, PENALTY, False, -np.inf, e.trials, failed=True)
    except GradientError as e:
        logger.warning("iter %d: %s; move rejected", it, e)
        return state, MoveRecord(it, PENALTY, False, -np.inf, None, failed=True)

    accepted = bool(log_r > -np.inf and log_uniform(rng) <= log_r)   # NaN rejects
    if accepted:
        state = PairState(u, v, lg_u, lg_v)
    return state, MoveRecord(it, PENALTY, accepted, float(log_r), trials)
