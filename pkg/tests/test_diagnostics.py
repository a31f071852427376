# tests/test_diagnostics.py
import logging

import numpy as np
import pytest
from scipy.signal import lfilter

from postproc.diagnostics import (autocorrelation, basin_switches, diagnose, ergodic_average, ess, iat,
                                  iat_estimate, kde_grid, mode_occupancy, nearest_centre)
from sampler.errors import InputError
from sampler.targets import make_builtin
from sampler.twalk_core import KernelConfig, run


# ─────────────────────────────────────────────────────── autocorrelation / IAT
def test_autocorrelation_lag_zero(rng):
    rho = autocorrelation(rng.standard_normal(1000))
    assert rho[0] == pytest.approx(1.0)
    assert np.all(np.abs(rho[1:20]) < 0.15)


def test_iat_iid(rng):
    assert iat(rng.standard_normal(100_000)) == pytest.approx(1.0, abs=0.1)


def test_iat_ar1(rng):
    # AR(1) with coefficient 0.5: τ = (1 + a) / (1 − a) = 3
    series = lfilter([1.0], [1.0, -0.5], rng.standard_normal(1_000_000))
    assert iat(series) == pytest.approx(3.0, abs=0.15)
    assert ess(series) == pytest.approx(len(series) / 3.0, rel=0.05)


def test_iat_alternating_clipped_to_one():
    series = np.tile([1.0, -1.0], 500)
    assert iat(series) == 1.0


def test_iat_constant_series(caplog):
    with caplog.at_level(logging.WARNING):
        est = iat_estimate(np.full(500, 2.5))
    assert est == (1.0, True)
    assert "constant" in caplog.text


def test_iat_too_short():
    with pytest.raises(InputError):
        iat(np.arange(99.0))


# ─────────────────────────────────────────────────────── trace summaries
@pytest.fixture(scope="module")
def short_trace():
    target = make_builtin("example1")
    return target, run(target, KernelConfig(seed=3), [0.0, 0.0], [1.0, 1.0], 2000)


def test_ergodic_average(short_trace):
    target, trace = short_trace
    xs = trace.x[trace.iters > 100]
    assert ergodic_average(trace, lambda p: p[0], burn_in=100) == pytest.approx(xs[:, 0].mean())
    assert ergodic_average(trace, lambda p: 1.0) == 1.0


def test_burn_in_checks(short_trace):
    _, trace = short_trace
    with pytest.raises(InputError):
        ergodic_average(trace, lambda p: p[0], burn_in=2000)
    with pytest.raises(InputError):
        ergodic_average(trace, lambda p: p[0], burn_in=-1)


def test_occupancy_and_switches():
    centres = [np.array([0.0, 0.0]), np.array([20.0, -20.0])]
    pts = np.array([[0.1, 0.0], [19.0, -21.0], [18.0, -18.0], [-0.3, 0.4], [0.0, 1.0]])
    np.testing.assert_array_equal(nearest_centre(pts, centres), [0, 1, 1, 0, 0])
    np.testing.assert_allclose(mode_occupancy(pts, centres), [0.6, 0.4])
    assert basin_switches(pts, centres) == 2


def test_occupancy_needs_centres():
    with pytest.raises(InputError):
        mode_occupancy(np.zeros((3, 2)), [])


# ─────────────────────────────────────────────────────── KDE grid
def test_kde_grid_two_points():
    pts = np.array([[0.0, 0.0], [4.0, 4.0]])
    g = kde_grid(pts, grid=81, bandwidth=1.0)
    assert g.density.shape == (81, 81)
    assert g.xs[0] == pytest.approx(-0.4) and g.xs[-1] == pytest.approx(4.4)
    x, y = g.argmax()
    assert min(abs(x) + abs(y), abs(x - 4.0) + abs(y - 4.0)) < 0.1
    assert g.density.max() == pytest.approx(0.5 / (2 * np.pi), rel=0.01)


def test_kde_grid_mass(rng):
    pts = rng.standard_normal((400, 3))
    g = kde_grid(pts, dims=(0, 2), grid=120)
    # the padded window clips some tail mass
    assert g.density.sum() * g.cell_area == pytest.approx(1.0, abs=0.05)
    assert g.dims == (0, 2)
    assert g.rows().shape == (120 * 120, 3)


def test_kde_grid_translation(rng):
    pts = rng.standard_normal((200, 2))
    a = kde_grid(pts, grid=50)
    b = kde_grid(pts + [5.0, -3.0], grid=50)
    np.testing.assert_allclose(b.xs, a.xs + 5.0, atol=1e-9)
    np.testing.assert_allclose(b.density, a.density, rtol=1e-6)


def test_kde_grid_input_checks():
    with pytest.raises(InputError):
        kde_grid(np.zeros((1, 2)))
    with pytest.raises(InputError):
        kde_grid(np.random.default_rng(0).standard_normal((10, 2)), grid=1)


# ─────────────────────────────────────────────────────── report
def test_diagnose_report(short_trace):
    target, trace = short_trace
    report = diagnose(trace, target.centres, burn_in=200)
    assert report.n_retained == 1800
    assert len(report.iat_per_coordinate) == 2
    assert all(t >= 1.0 for t in report.iat_per_coordinate)
    assert len(report.mode_occupancy) == 2
    assert sum(report.mode_occupancy) == pytest.approx(1.0)
    assert report.basin_switches >= 0
    assert 0.0 < report.global_acceptance < 1.0
    d = report.to_dict()
    assert set(d["per_move_acceptance"]) <= {"walk", "traverse", "hop", "blow", "penalty"}


def test_diagnose_short_window(short_trace, caplog):
    _, trace = short_trace
    report = diagnose(trace, burn_in=1950)
    assert np.isnan(report.iat_per_coordinate).all()
    assert report.mode_occupancy == [] and report.basin_switches is None
    assert "IAT not estimated" in caplog.text
