import numpy as np
import pytest
from numpy.testing import assert_array_almost_equal

from pyfcar.common import DataError, SingularDesign
from pyfcar.timeseries import TimeSeries
from pyfcar.kernel import MIN_GRID_CELLS
from pyfcar.estimator import SBKEstimator

from .conftest import geometric_series


def test_exact_recovery():
    series = geometric_series(300)
    est = SBKEstimator(1, 1, bandwidth=1.0, shrink_knots=True).fit(series)
    assert est.grid.N < 24
    us = np.linspace(est.design.a, est.design.b, 101)
    curve = est.estimate(1, us)
    assert np.all(np.abs(curve.values - 0.5) <= 1e-8)
    assert est.mse() <= 1e-10


def test_strict_knots_raise():
    with pytest.raises(SingularDesign):
        SBKEstimator(1, 1, bandwidth=1.0).fit(geometric_series(300))


def test_fixed_knots(rng):
    series = TimeSeries(rng.standard_normal(400))
    est = SBKEstimator(2, 3, knots=4).fit(series)
    assert est.grid.N == 4
    assert est.prefit.lambda_.shape == (2 * 5,)


def test_rule_of_thumb_per_component(p4_draw):
    cfg, sim = p4_draw
    est = SBKEstimator(cfg.p, cfg.d, shrink_knots=True).fit(sim.series, sim.design.response)
    width = est.design.b - est.design.a
    assert len(est.bandwidths) == 4
    for h in est.bandwidths:
        assert width / MIN_GRID_CELLS <= h <= width
    curves = est.curves(np.linspace(est.design.a, est.design.b, 31))
    assert [c.component for c in curves] == [1, 2, 3, 4]
    assert 'p=4 d=5' in est.name


def test_white_noise_mse(rng):
    "In-sample SBK fit does no worse than the zero fit"
    series = TimeSeries(rng.standard_normal(500))
    est = SBKEstimator(2, 1, shrink_knots=True).fit(series)
    fitted = est.fitted_values()
    assert fitted.shape == est.design.response.shape
    y = est.design.response
    assert est.mse() <= (y * y).mean()


def test_response_override_length(rng):
    series = TimeSeries(rng.standard_normal(100))
    with pytest.raises(DataError):
        SBKEstimator(1, 2).fit(series, np.zeros(10))


def test_not_fitted():
    with pytest.raises(ValueError):
        SBKEstimator(1, 1).estimate(1, [0.0])


def test_at_sample_maps_rows(rng):
    xs = np.repeat(rng.standard_normal(60), 2)
    est = SBKEstimator(1, 1, bandwidth=2.0, shrink_knots=True).fit(TimeSeries(xs))
    at = est.at_sample(1)
    assert at.values.shape == est.design.delay.shape
    # equal delays get equal estimates
    for u in np.unique(est.design.delay)[:10]:
        vals = at.values[est.design.delay == u]
        assert_array_almost_equal(vals, np.full(vals.shape, vals[0]), 15)
