"""
Time series container, lagged designs for FCAR models and the deterministic
transforms (log, kernel detrend, seasonal difference) of the application pipeline.
"""
import logging
import os
from collections import namedtuple

import numpy as np
import pandas as pd

from .common import (as_vector, frozen, label_frequency, shift_label, SeriesTooShort, NonFiniteValue,
                     NonPositiveValue, EmptyWindow, IngestionError)
from .kernel import quartic_kernel

logger = logging.getLogger(__name__)


class TimeSeries(object):
    """
    Ordered real-valued observations X_1, ..., X_n with optional period metadata.

    :param values: sequence of finite reals, non-empty
    :param start_label: label of the first period, e.g. '1960-Q1'
    :param frequency: periods per year (4 = quarterly)
    """
    def __init__(self, values, start_label=None, frequency=4):
        self.values = as_vector(values, 'series')
        if self.values.size == 0:
            raise SeriesTooShort('time series must have at least one observation')
        if int(frequency) != frequency or frequency < 1:
            raise ValueError('frequency must be a positive integer, got %r' % frequency)
        self.start_label = start_label
        self.frequency = int(frequency)

    @property
    def n(self):
        return self.values.shape[0]

    def __len__(self):
        return self.n

    def __repr__(self):
        return '<TimeSeries n=%d start=%s freq=%d>' % (self.n, self.start_label, self.frequency)

    def labels(self):
        "Period label of every observation (None entries if the start label is unknown)"
        return [shift_label(self.start_label, i, self.frequency) for i in range(self.n)]

    def with_values(self, values, offset=0):
        "New series with the same metadata, first period moved `offset` periods ahead"
        return TimeSeries(values, shift_label(self.start_label, offset, self.frequency), self.frequency)


class FCARSpec(namedtuple('FCARSpec', ['p', 'd'])):
    "Autoregressive order p and delay d; t0 = max(p, d) + 1 is the first usable (1-based) time index"
    __slots__ = ()

    def __new__(cls, p, d):
        if int(p) != p or p < 1:
            raise ValueError('p must be a positive integer, got %r' % p)
        if int(d) != d or d < 1:
            raise ValueError('d must be a positive integer, got %r' % d)
        return super(FCARSpec, cls).__new__(cls, int(p), int(d))

    @property
    def t0(self):
        return max(self.p, self.d) + 1

    def min_length(self):
        "Shortest series whose design has 2(p+1) rows"
        return self.t0 - 1 + 2 * (self.p + 1)


# response[i] = X_t, lags[i, alpha-1] = X_{t-alpha}, delay[i] = X_{t-d}, for t = t[i]
LaggedDesign = namedtuple('LaggedDesign', ['response', 'lags', 'delay', 'a', 'b', 't', 'spec'])


def build_lagged_design(series, spec, trim=None):
    """
    Aligns X_t with its lags X_{t-1}, ..., X_{t-p} and the delay variable U_t = X_{t-d}
    for t = t0, ..., n. Pre-sample values are never used.

    :param trim: optional pair of quantiles (q_lo, q_hi); rows whose delay lies outside
        the quantile band are dropped and [a, b] become those quantiles
    """
    n = series.n
    if n < spec.min_length():
        raise SeriesTooShort('series of length %d too short for p=%d, d=%d (need %d)'
                             % (n, spec.p, spec.d, spec.min_length()))
    xs = series.values
    t0 = spec.t0
    # 0-based positions of X_t for t = t0..n
    rows = np.arange(t0 - 1, n)
    response = xs[rows]
    lags = np.column_stack([xs[rows - alpha] for alpha in range(1, spec.p + 1)])
    delay = xs[rows - spec.d]
    t = rows + 1
    if trim is not None:
        q_lo, q_hi = trim
        if not 0.0 <= q_lo < q_hi <= 1.0:
            raise ValueError('trim quantiles must satisfy 0 <= lo < hi <= 1, got %r' % (trim,))
        a, b = np.quantile(delay, [q_lo, q_hi])
        keep = (delay >= a) & (delay <= b)
        response, lags, delay, t = response[keep], lags[keep], delay[keep], t[keep]
    else:
        a, b = delay.min(), delay.max()
    for name, arr in (('response', response), ('lags', lags), ('delay', delay)):
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValue('non-finite entry in design %s' % name)
    return LaggedDesign(frozen(response), frozen(lags), frozen(delay), float(a), float(b), frozen(t), spec)


def log_transform(series):
    "Elementwise natural logarithm"
    nonpos = np.flatnonzero(series.values <= 0)
    if nonpos.size > 0:
        i = int(nonpos[0])
        raise NonPositiveValue(i, float(series.values[i]), shift_label(series.start_label, i, series.frequency))
    return series.with_values(np.log(series.values))


def kernel_detrend(series, bandwidth):
    """
    Nadaraya-Watson regression of the values on the time index 1..n with the quartic
    kernel. Returns (trend, residual) with residual = values - trend.
    """
    if not bandwidth > 0 or not np.isfinite(bandwidth):
        raise ValueError('bandwidth must be positive and finite, got %r' % bandwidth)
    if series.n < 2:
        raise SeriesTooShort('kernel detrending needs at least 2 observations')
    idx = np.arange(1, series.n + 1, dtype=np.float64)
    weights = quartic_kernel(idx[:, None] - idx[None, :], bandwidth)
    totals = weights.sum(axis=1)
    empty = np.flatnonzero(totals <= 0)
    if empty.size > 0:
        raise EmptyWindow('no observation within bandwidth %g of index %d' % (bandwidth, empty[0] + 1))
    trend = weights.dot(series.values) / totals
    residual = series.values - trend
    return series.with_values(trend), series.with_values(residual)


def seasonal_difference(series, lag):
    "Entries X_{t+lag} - X_t; the result starts at the period of X_{1+lag}"
    if int(lag) != lag or lag < 1:
        raise ValueError('lag must be a positive integer, got %r' % lag)
    lag = int(lag)
    if series.n <= lag:
        raise SeriesTooShort('series of length %d too short for lag %d' % (series.n, lag))
    xs = series.values
    return series.with_values(xs[lag:] - xs[:-lag], offset=lag)


def undo_seasonal_difference(diffed, head):
    "Inverse of seasonal_difference given the first `lag` original values"
    head = as_vector(head, 'head')
    lag = head.shape[0]
    out = np.empty(lag + diffed.n)
    out[:lag] = head
    for i in range(diffed.n):
        out[lag + i] = out[i] + diffed.values[i]
    return diffed.with_values(out, offset=-lag)


def _is_number(text):
    try:
        float(text)
        return True
    except (TypeError, ValueError):
        return False


def read_series_csv(path, frequency=None):
    """
    Reads one observation per line, either a single value column or `period,value`.
    A header row is detected by failing to parse the first row's value as a number.
    """
    if not os.path.exists(path):
        raise IngestionError('no such file: %s' % path)
    try:
        frame = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise IngestionError('empty file: %s' % path)
    if frame.shape[1] not in (1, 2):
        raise IngestionError('expected 1 or 2 columns in %s, got %d' % (path, frame.shape[1]))
    first_line = 1
    if not _is_number(frame.iloc[0, -1]):
        frame = frame.iloc[1:]
        first_line = 2
    if frame.shape[0] == 0:
        raise IngestionError('no observations in %s' % path)
    raw_values = frame.iloc[:, -1].str.strip()
    values = pd.to_numeric(raw_values, errors='coerce').to_numpy(dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size > 0:
        i = int(bad[0])
        raise IngestionError('%s line %d: cannot parse %r as a finite number'
                             % (path, first_line + i, raw_values.iloc[i]))
    start_label = frame.iloc[0, 0].strip() if frame.shape[1] == 2 else None
    if frequency is None:
        frequency = label_frequency(start_label) or 4
    logger.info('read %d observations from %s (start=%s)', values.shape[0], path, start_label)
    return TimeSeries(values, start_label=start_label, frequency=frequency)
