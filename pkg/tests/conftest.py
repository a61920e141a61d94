#
# helpers and fixtures
#
import math

import numpy as np
import pytest

from pyfcar.timeseries import TimeSeries, FCARSpec, LaggedDesign
from pyfcar.simulation import SimulationConfig, simulate_design, STUDY_PRESETS


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run slow Monte-Carlo tests')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long Monte-Carlo checks, only with --runslow')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)


def assert_almost_equal(float1, float2, prec):
    msg = 'Expected %f, Actual %f (to %d digits)' % (float1, float2, prec)
    fact10 = 10 ** prec
    assert int(math.fabs(float1 - float2) * fact10) == 0, msg


def geometric_series(n, coef=0.5, x1=1.0):
    "X_1 = x1, X_t = coef X_{t-1}"
    return TimeSeries(x1 * coef ** np.arange(n))


def uniform_design(rng, rows, p, coef=None, noise=0.0):
    """
    Hand-built design with U_t ~ U(0, 1) and N(0, 1) lags; the response is
    sum_alpha coef[alpha] X_{t-alpha} plus optional noise (random response if coef is None).
    """
    delay = rng.uniform(0.0, 1.0, rows)
    lags = rng.standard_normal((rows, p))
    if coef is None:
        response = rng.standard_normal(rows)
    else:
        response = lags.dot(np.asarray(coef, dtype=np.float64)) + noise * rng.standard_normal(rows)
    return LaggedDesign(response, lags, delay, float(delay.min()), float(delay.max()),
                        np.arange(rows) + 1, FCARSpec(p, 1))


def gdp_like_values(n=217, seed=0):
    "Positive quarterly series: exponential growth, a seasonal wiggle and noise"
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    return np.exp(3.0 + 0.008 * t + 0.01 * np.sin(0.5 * np.pi * t) + 0.004 * rng.standard_normal(n).cumsum())


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def p4_draw():
    preset = STUDY_PRESETS[4]
    cfg = SimulationConfig(4, preset['d'], preset['A'], preset['omega'], n=500, seed=11)
    return cfg, simulate_design(cfg)


@pytest.fixture
def gdp_csv(tmp_path):
    path = tmp_path / 'gdp.csv'
    values = gdp_like_values()
    labels = ['%d-Q%d' % (1960 + i // 4, i % 4 + 1) for i in range(values.shape[0])]
    with open(str(path), 'wt') as fh:
        fh.write('period,value\n')
        for label, value in zip(labels, values):
            fh.write('%s,%.10f\n' % (label, value))
    return str(path)
