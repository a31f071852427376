# sampler/targets.py
"""
Target densities: the object every kernel evaluates.

Builtins are the benchmark mixtures (two-mode 2-d, nine-mode cube, 10-d
banana mixture); anything else comes in through a JSON mixture spec:

    {
      "name": "my_target",
      "dim": 2,
      "components": [
        {"weight": 0.5, "mean": [0, 0],   "cov": [[1, 0.1], [0.1, 1]]},
        {"weight": 0.5, "mean": [20, -20], "cov": [[16, 16], [16, 25]], "banana_b": 0.0}
      ]
    }
"""
import json
import logging
import math
import pathlib
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from sampler.errors import ConfigError, InputError

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
BUILTINS = ("example1", "example1_weighted", "cube9", "banana10")


# ─────────────────────────────────────────────────────── target container
@dataclass(frozen=True)
class TargetDensity:
    dim: int
    log_gamma: Callable[[np.ndarray], float]
    grad_log_pi: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "target"
    centres: Tuple[np.ndarray, ...] = field(default_factory=tuple)   # declared mode centres
    spec: Optional["GaussianMixtureSpec"] = None

    @property
    def has_gradient(self) -> bool:
        return self.grad_log_pi is not None

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise InputError(f"{self.name}: expected a point of length {self.dim}, got shape {x.shape}")
        return x

    def log_density(self, x) -> float:
        """log γ(x); −∞ outside the support, never NaN."""
        x = self._check(x)
        if not np.all(np.isfinite(x)):
            return -np.inf
        val = float(self.log_gamma(x))
        return -np.inf if math.isnan(val) else val

    def gradient(self, x) -> np.ndarray:
        if self.grad_log_pi is None:
            raise ConfigError(f"target {self.name!r} has no gradient; use the rejection penalty")
        return np.asarray(self.grad_log_pi(self._check(x)), dtype=float)


def log_density(target: TargetDensity, x) -> float:
    return target.log_density(x)


# ─────────────────────────────────────────────────────── mixture spec
@dataclass(frozen=True)
class GaussianMixtureSpec:
    weights: np.ndarray
    means: np.ndarray                       # (K, d)
    covariances: np.ndarray                 # (K, d, d)
    banana_transform: Optional[np.ndarray] = None
    normalised: bool = True

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        mu = np.atleast_2d(np.asarray(self.means, dtype=float))
        cov = np.asarray(self.covariances, dtype=float)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        if cov.ndim == 2:
            cov = cov[None, :, :]
        object.__setattr__(self, "covariances", cov)

        k, d = mu.shape
        if w.shape != (k,):
            raise ConfigError(f"weights: expected {k} entries, got {w.size}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ConfigError("weights must be nonnegative")
        if self.normalised and abs(math.fsum(w) - 1.0) > 1e-12:
            raise ConfigError(f"weights must sum to 1 (got {math.fsum(w):.15g})")
        if cov.shape != (k, d, d):
            raise ConfigError(f"cov: expected {k} matrices of shape {d}x{d}, got {cov.shape}")
        for i, c in enumerate(cov):
            if not np.allclose(c, c.T, rtol=0, atol=1e-12 * max(1.0, np.abs(c).max())):
                raise ConfigError(f"components[{i}].cov is not symmetric")
            try:
                np.linalg.cholesky(c)
            except np.linalg.LinAlgError:
                raise ConfigError(f"components[{i}].cov is not positive definite") from None
        if self.banana_transform is not None:
            b = np.asarray(self.banana_transform, dtype=float)
            if b.shape != (k,):
                raise ConfigError(f"banana_b: expected one curvature per component ({k}), got {b.size}")
            object.__setattr__(self, "banana_transform", b)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_components(self) -> int:
        return self.means.shape[0]


def banana_map(x, b: float) -> np.ndarray:
    """(x_1 + b x_1² − 100 b, x_2, …, x_d)."""
    out = np.array(x, dtype=float, copy=True)
    out[..., 0] = out[..., 0] + b * out[..., 0] ** 2 - 100.0 * b
    return out


# ─────────────────────────────────────────────────────── mixture target
def mixture_target(spec: GaussianMixtureSpec, name: str = "mixture") -> TargetDensity:
    """Log-sum-exp mixture with an analytic gradient (chain rule through φ_b)."""
    keep = spec.weights > 0
    log_w = np.log(spec.weights[keep])
    mu = spec.means[keep]
    cov = spec.covariances[keep]
    prec = np.linalg.inv(cov)
    prec = 0.5 * (prec + np.swapaxes(prec, 1, 2))
    logdet = np.array([2.0 * np.log(np.diag(np.linalg.cholesky(c))).sum() for c in cov])
    d = spec.dim
    log_norm = log_w - 0.5 * d * LOG_2PI - 0.5 * logdet
    bananas = spec.banana_transform[keep] if spec.banana_transform is not None else None

    def _z(x):
        if bananas is None:
            return x[None, :] - mu
        z = np.repeat(x[None, :], len(mu), axis=0)
        z[:, 0] = x[0] + bananas * x[0] ** 2 - 100.0 * bananas
        return z - mu

    def log_gamma(x):
        z = _z(x)
        q = np.einsum("ki,kij,kj->k", z, prec, z)
        return logsumexp(log_norm - 0.5 * q)

    def grad(x):
        z = _z(x)
        pz = np.einsum("kij,kj->ki", prec, z)
        comp = log_norm - 0.5 * np.einsum("ki,ki->k", z, pz)
        resp = np.exp(comp - logsumexp(comp))
        g = -pz
        if bananas is not None:
            g[:, 0] *= 1.0 + 2.0 * bananas * x[0]
        return resp @ g

    centres = tuple(m.copy() for m in spec.means)
    return TargetDensity(dim=d, log_gamma=log_gamma, grad_log_pi=grad,
                         name=name, centres=centres, spec=spec)


def sample_components(target: TargetDensity, component: int, n: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Exact i.i.d. draws from one Gaussian component (0-based) of a mixture target."""
    spec = target.spec
    if spec is None:
        raise ConfigError(f"target {target.name!r} is not a mixture")
    if not 0 <= component < spec.n_components:
        raise InputError(f"component {component} out of range 0..{spec.n_components - 1}")
    if spec.banana_transform is not None and spec.banana_transform[component] != 0:
        raise ConfigError("exact draws are only available for Gaussian (b = 0) components")
    return rng.multivariate_normal(spec.means[component], spec.covariances[component], size=n)


# ─────────────────────────────────────────────────────── builtins
def _example1_spec(weights) -> GaussianMixtureSpec:
    return GaussianMixtureSpec(
        weights=weights,
        means=[[0.0, 0.0], [20.0, -20.0]],
        covariances=[[[1.0, 0.1], [0.1, 1.0]],
                     [[16.0, 0.8 * 4 * 5], [0.8 * 4 * 5, 25.0]]],
    )


def _cube9_spec() -> GaussianMixtureSpec:
    # vertices in lexicographic (a, b, c) order; variances geometric over [0.25, 10]
    vertices = [10.0 * np.array([(-1) ** a, (-1) ** b, (-1) ** c])
                for a in (0, 1) for b in (0, 1) for c in (0, 1)]
    variances = np.geomspace(0.25, 10.0, 8)
    means = vertices + [np.array([30.0, 30.0, 30.0])]
    covs = [v * np.eye(3) for v in variances] + [10.0 * np.eye(3)]
    return GaussianMixtureSpec(weights=np.full(9, 1.0 / 9.0), means=means, covariances=covs)


def _banana10_spec() -> GaussianMixtureSpec:
    d = 10
    sigma = np.diag([100.0] + [1.0] * (d - 1))
    return GaussianMixtureSpec(
        weights=np.full(3, 1.0 / 3.0),
        means=[np.full(d, -3.0), np.zeros(d), np.full(d, 3.0)],
        covariances=[sigma, sigma, sigma],
        banana_transform=[-0.03, 0.0, 0.03],
    )


def make_builtin(name: str) -> TargetDensity:
    if name == "example1":
        return mixture_target(_example1_spec([0.5, 0.5]), name)
    if name == "example1_weighted":
        return mixture_target(_example1_spec([0.1, 0.9]), name)
    if name == "cube9":
        return mixture_target(_cube9_spec(), name)
    if name == "banana10":
        return mixture_target(_banana10_spec(), name)
    raise ConfigError(f"unknown builtin target {name!r}; choose one of {', '.join(BUILTINS)}")


# ─────────────────────────────────────────────────────── spec files
def _field(obj: dict, key: str, where: str):
    if key not in obj:
        raise ConfigError(f"{where}: missing field {key!r}")
    return obj[key]


def load_target_spec(path) -> TargetDensity:
    path = pathlib.Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as e:
        raise ConfigError(f"cannot read target spec {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"target spec {path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")

    dim = _field(raw, "dim", str(path))
    if not isinstance(dim, int) or dim < 1:
        raise ConfigError(f"dim must be a positive integer (got {dim!r})")
    comps = _field(raw, "components", str(path))
    if not isinstance(comps, list) or not comps:
        raise ConfigError("components must be a nonempty list")

    weights, means, covs, bs = [], [], [], []
    for i, c in enumerate(comps):
        where = f"components[{i}]"
        try:
            weights.append(float(_field(c, "weight", where)))
            mean = np.asarray(_field(c, "mean", where), dtype=float)
            cov = np.asarray(_field(c, "cov", where), dtype=float)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{where}: {e}") from e
        if mean.shape != (dim,):
            raise ConfigError(f"{where}.mean: expected {dim} entries, got shape {mean.shape}")
        if cov.shape != (dim, dim):
            raise ConfigError(f"{where}.cov: expected {dim}x{dim} rows, got shape {cov.shape}")
        means.append(mean)
        covs.append(cov)
        bs.append(float(c.get("banana_b", 0.0)))

    spec = GaussianMixtureSpec(
        weights=np.array(weights), means=np.array(means), covariances=np.array(covs),
        banana_transform=np.array(bs) if any(bs) else None,
        normalised=bool(raw.get("normalised", True)),
    )
    name = raw.get("name", path.stem)
    logger.debug("loaded target %s: d=%d, %d components", name, dim, spec.n_components)
    return mixture_target(spec, name)


def resolve_target(name_or_path: str) -> TargetDensity:
    """Builtin name, or a path to a JSON mixture spec."""
    if name_or_path in BUILTINS:
        return make_builtin(name_or_path)
    if pathlib.Path(name_or_path).suffix.lower() == ".json" or pathlib.Path(name_or_path).exists():
        return load_target_spec(name_or_path)
    return make_builtin(name_or_path)   # raises the "unknown builtin" config error
