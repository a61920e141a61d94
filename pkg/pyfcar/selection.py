"""
Order selection for FCAR models on real data: log / detrend / seasonal difference,
a (d, p) grid search by in-sample one-step MSE, and an AR(1) baseline.
"""
import os
import json
import logging
from collections import namedtuple
from concurrent import futures
from datetime import datetime

import numpy as np
import pandas as pd
import statsmodels.api as sm

from .common import (frozen, FCARError, AllCellsFailed, DegenerateRegressor, SeriesTooShort, PipelineError,
                     NumericalError)
from .timeseries import log_transform, kernel_detrend, seasonal_difference
from .estimator import SBKEstimator

logger = logging.getLogger(__name__)

DEFAULT_D_SET = tuple(range(1, 11))
DEFAULT_P_SET = tuple(range(2, 11))
# cells above EXTREME_FACTOR x median MSE are flagged for plotting
EXTREME_FACTOR = 3.0


def fit_and_score(series, d, p, c1=1.0, c2=1.0, shrink_knots=True):
    "In-sample mean squared one-step error of the SBK fit of FCAR(p) with delay d"
    est = SBKEstimator(p, d, c1=c1, c2=c2, shrink_knots=shrink_knots).fit(series)
    mse = est.mse()
    if not np.isfinite(mse):
        raise NumericalError('no fitted value available for d=%d, p=%d' % (d, p))
    return mse


GridSearchResult = namedtuple('GridSearchResult', ['d_set', 'p_set', 'mse_table', 'best_d', 'best_p', 'best_mse',
                                                   'failures'])


def grid_search(series, d_set=DEFAULT_D_SET, p_set=DEFAULT_P_SET, threads=None, **fit_kwargs):
    """
    fit_and_score over every (d, p); the minimiser over successful cells wins, ties going
    to the smaller p and then the smaller d. mse_table[i, j] belongs to (d_set[i], p_set[j]).
    """
    d_set, p_set = tuple(d_set), tuple(p_set)
    if not d_set or not p_set:
        raise ValueError('d_set and p_set must be non-empty')
    cells = [(i, j) for i in range(len(d_set)) for j in range(len(p_set))]

    def score(cell):
        i, j = cell
        try:
            return fit_and_score(series, d_set[i], p_set[j], **fit_kwargs)
        except FCARError as err:
            logger.warning('cell d=%d p=%d failed: %s', d_set[i], p_set[j], err)
            return None

    t0 = datetime.now()
    with futures.ThreadPoolExecutor(max_workers=threads or os.cpu_count() or 1) as pool:
        scores = list(pool.map(score, cells))
    table = np.full((len(d_set), len(p_set)), np.nan)
    failures = []
    for (i, j), mse in zip(cells, scores):
        if mse is None:
            failures.append((d_set[i], p_set[j]))
        else:
            table[i, j] = mse
    ok = [(table[i, j], p_set[j], d_set[i]) for i, j in cells if np.isfinite(table[i, j])]
    if not ok:
        raise AllCellsFailed('all %d (d, p) cells failed' % len(cells))
    best_mse, best_p, best_d = min(ok)
    logger.info('grid search best d=%d p=%d mse=%g (%d failed) secs=%g', best_d, best_p, best_mse, len(failures),
                (datetime.now() - t0).total_seconds())
    return GridSearchResult(d_set, p_set, frozen(table), best_d, best_p, float(best_mse), failures)


AR1Fit = namedtuple('AR1Fit', ['c', 'psi', 'mse', 'fitted'])


def fit_ar1(series):
    "Conditional least squares of X_t on (1, X_{t-1}), t = 2..n; fitted[k] belongs to t = k + 2"
    if series.n < 3:
        raise SeriesTooShort('AR(1) needs at least 3 observations, got %d' % series.n)
    xs = series.values
    lagged = xs[:-1]
    if np.ptp(lagged) == 0:
        raise DegenerateRegressor('lagged series is constant')
    res = sm.OLS(xs[1:], sm.add_constant(lagged, has_constant='add')).fit()
    c, psi = res.params
    resid = xs[1:] - res.fittedvalues
    return AR1Fit(float(c), float(psi), float(resid.dot(resid) / resid.shape[0]), frozen(res.fittedvalues))


def parse_int_set(text):
    "'1-10' or '2,3,5' or a mix such as '1-3,7'"
    values = []
    for part in str(text).split(','):
        part = part.strip()
        if not part:
            continue
        if '-' in part:
            lo, hi = part.split('-', 1)
            values.extend(range(int(lo), int(hi) + 1))
        else:
            values.append(int(part))
    if not values:
        raise ValueError('empty integer set %r' % text)
    return tuple(sorted(set(values)))


PipelineConfig = namedtuple('PipelineConfig', ['detrend_bandwidth', 'seasonal_lag', 'd_set', 'p_set', 'skip_log',
                                               'grid_points', 'shrink_knots', 'threads'])


def pipeline_config(detrend_bandwidth=30.0, seasonal_lag=4, d_set=DEFAULT_D_SET, p_set=DEFAULT_P_SET,
                    skip_log=False, grid_points=101, shrink_knots=True, threads=None):
    return PipelineConfig(float(detrend_bandwidth), int(seasonal_lag), tuple(d_set), tuple(p_set), bool(skip_log),
                          int(grid_points), bool(shrink_knots), threads)


PipelineReport = namedtuple('PipelineReport', ['config', 'raw', 'logged', 'trend', 'detrended', 'differenced',
                                               'grid', 'ar1', 'sbk_mse', 'knots', 'fitted', 'coefficients'])


def _stage(name, fun, *args, **kwargs):
    try:
        return fun(*args, **kwargs)
    except FCARError as err:
        raise PipelineError(name, err)


def run_pipeline(raw, detrend_bandwidth=30.0, seasonal_lag=4, d_set=DEFAULT_D_SET, p_set=DEFAULT_P_SET, **kwargs):
    """
    log -> kernel detrend -> seasonal difference -> (d, p) grid search -> AR(1) baseline.
    Each stage fails fast with a PipelineError naming it.
    """
    cfg = pipeline_config(detrend_bandwidth, seasonal_lag, d_set, p_set, **kwargs)
    t0 = datetime.now()
    logged = raw if cfg.skip_log else _stage('log', log_transform, raw)
    trend, detrended = _stage('detrend', kernel_detrend, logged, cfg.detrend_bandwidth)
    differenced = _stage('difference', seasonal_difference, detrended, cfg.seasonal_lag)
    grid = _stage('grid_search', grid_search, differenced, cfg.d_set, cfg.p_set, threads=cfg.threads,
                  shrink_knots=cfg.shrink_knots)
    ar1 = _stage('ar1', fit_ar1, differenced)

    def best_fit():
        est = SBKEstimator(grid.best_p, grid.best_d, shrink_knots=cfg.shrink_knots).fit(differenced)
        us = np.linspace(est.design.a, est.design.b, cfg.grid_points)
        curves = est.curves(us)
        return est, us, curves

    est, us, curves = _stage('fit', best_fit)
    design = est.design
    t = np.asarray(design.t)
    fitted = pd.DataFrame({
        't': t,
        'actual': design.response,
        'sbk_fitted': est.fitted_values(),
        # AR(1) fitted value for time t sits at position t - 2
        'ar1_fitted': np.asarray(ar1.fitted)[t - 2],
    })
    coefficients = pd.DataFrame({'u': us})
    for curve in curves:
        coefficients['m%d' % curve.component] = curve.values
    logger.info('pipeline secs=%g', (datetime.now() - t0).total_seconds())
    return PipelineReport(cfg, raw, logged, trend, detrended, differenced, grid, ar1, est.mse(), est.grid.N,
                          fitted, coefficients)


def _to_csv(frame, path, **kwargs):
    frame.to_csv(path, index=False, lineterminator='\n', **kwargs)


def write_pipeline(report, output_dir):
    "mse_table.csv, mse_cells.csv, fitted.csv, coefficients.csv, series.csv and pipeline.json"
    grid = report.grid
    table = pd.DataFrame(np.asarray(grid.mse_table), columns=[str(p) for p in grid.p_set])
    table.insert(0, 'd', grid.d_set)
    _to_csv(table, os.path.join(output_dir, 'mse_table.csv'), float_format='%.6f')

    ok = np.asarray(grid.mse_table)[np.isfinite(grid.mse_table)]
    cutoff = EXTREME_FACTOR * np.median(ok)
    cells = pd.DataFrame([(d, p, grid.mse_table[i, j], bool(grid.mse_table[i, j] > cutoff))
                          for i, d in enumerate(grid.d_set) for j, p in enumerate(grid.p_set)],
                         columns=['d', 'p', 'mse', 'extreme'])
    _to_csv(cells, os.path.join(output_dir, 'mse_cells.csv'))
    _to_csv(report.fitted, os.path.join(output_dir, 'fitted.csv'))
    _to_csv(report.coefficients, os.path.join(output_dir, 'coefficients.csv'))

    n = report.raw.n
    lag = report.config.seasonal_lag
    differenced = np.full(n, np.nan)
    differenced[lag:] = report.differenced.values
    series = pd.DataFrame({
        't': np.arange(1, n + 1),
        'period': report.raw.labels(),
        'raw': report.raw.values,
        'logged': report.logged.values,
        'trend': report.trend.values,
        'detrended': report.detrended.values,
        'differenced': differenced,
    })
    _to_csv(series, os.path.join(output_dir, 'series.csv'))

    cfg = report.config
    summary = {
        'stages': {
            'log': not cfg.skip_log,
            'detrend_bandwidth': cfg.detrend_bandwidth,
            'seasonal_lag': cfg.seasonal_lag,
            'd_set': list(cfg.d_set),
            'p_set': list(cfg.p_set),
            'grid_points': cfg.grid_points,
            'shrink_knots': cfg.shrink_knots,
        },
        'best': {'d': grid.best_d, 'p': grid.best_p, 'mse': grid.best_mse, 'knots': report.knots},
        'failed_cells': [list(cell) for cell in grid.failures],
        'sbk_mse': report.sbk_mse,
        'ar1': {'c': report.ar1.c, 'psi': report.ar1.psi, 'mse': report.ar1.mse},
    }
    with open(os.path.join(output_dir, 'pipeline.json'), 'wt') as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write('\n')
