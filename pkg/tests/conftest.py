# tests/conftest.py
import math

import numpy as np
import pytest

from sampler.targets import TargetDensity, make_builtin


def box_target(dim: int = 2, with_gradient: bool = False) -> TargetDensity:
    """Uniform density on [0, 1]^dim; the optional gradient is the interior one (zero)."""
    def log_gamma(x):
        return 0.0 if np.all((x >= 0.0) & (x <= 1.0)) else -np.inf
    grad = (lambda x: np.zeros(dim)) if with_gradient else None
    return TargetDensity(dim=dim, log_gamma=log_gamma, grad_log_pi=grad, name="box")


def std_normal_target() -> TargetDensity:
    return TargetDensity(dim=1, log_gamma=lambda x: -0.5 * float(x @ x) - 0.5 * math.log(2 * math.pi),
                         grad_log_pi=lambda x: -x, name="std_normal", centres=(np.zeros(1),))


def flat_target(dim: int = 2) -> TargetDensity:
    return TargetDensity(dim=dim, log_gamma=lambda x: 0.0, grad_log_pi=lambda x: np.zeros(dim), name="flat")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def example1():
    return make_builtin("example1")


@pytest.fixture(scope="session")
def example1_weighted():
    return make_builtin("example1_weighted")


@pytest.fixture
def box():
    return box_target(2)


@pytest.fixture
def std_normal():
    return std_normal_target()
