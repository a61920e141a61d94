"""
Two-stage SBK estimator for one (p, d) order: spline prefit of all components, then a
local linear smooth of each component's pseudo-responses with a per-component bandwidth.
"""
import logging
from datetime import datetime

import numpy as np

from .common import frozen, DataError
from .timeseries import FCARSpec, build_lagged_design
from .spline import choose_knot_count, fit_prestep_shrinking
from .kernel import (pseudo_responses, rule_of_thumb_bandwidth, sbk_estimate, smooth_on_grid, kernel_config,
                     SBKEstimate)

logger = logging.getLogger(__name__)


class SBKEstimator(object):
    def __init__(self, p, d, c1=1.0, c2=1.0, bandwidth=None, knots=None, shrink_knots=False):
        """
        Spline-backfitted kernel estimator of an FCAR(p) model with delay d.

        :param c1, c2: tuning constants of the knot-count rule
        :param bandwidth: common kernel bandwidth; None picks a rule-of-thumb bandwidth per component
        :param knots: interior knot count N; None uses choose_knot_count
        :param shrink_knots: on a singular spline design (empty or thinly populated bins)
            retry with N-1 interior knots, down to N = 0
        """
        self.spec = FCARSpec(p, d)
        self.c1 = c1
        self.c2 = c2
        self.bandwidth = None if bandwidth is None else kernel_config(bandwidth).h
        self.knots = knots
        self.shrink_knots = shrink_knots
        self.design = None
        self.grid = None
        self.prefit = None
        self.bandwidths = None
        self.name = None

    def fit(self, series, response=None):
        """
        Fit to a TimeSeries. `response`, if given, replaces X_t for the design rows
        (one value per row, used for exogenous-regressor simulations).
        """
        t0 = datetime.now()
        design = build_lagged_design(series, self.spec)
        if response is not None:
            response = np.asarray(response, dtype=np.float64)
            if response.shape != design.response.shape:
                raise DataError('expected %d responses, got %d' % (design.response.shape[0], response.shape[0]))
            design = design._replace(response=frozen(response))
        self.fit_design(design, series.n)
        logger.info('%s secs=%g', self.name, (datetime.now() - t0).total_seconds())
        return self

    def fit_design(self, design, n=None):
        if n is None:
            n = design.response.shape[0]
        self.design = design
        N = self.knots if self.knots is not None else choose_knot_count(n, self.spec.d, self.c1, self.c2)
        self.prefit = fit_prestep_shrinking(design, N, self.shrink_knots)
        grid = self.grid = self.prefit.grid
        if grid.N != N:
            logger.info('spline design singular with N=%d, reduced to N=%d', N, grid.N)
        self.bandwidths = []
        for gamma in range(1, self.spec.p + 1):
            if self.bandwidth is not None:
                self.bandwidths.append(self.bandwidth)
                continue
            ys = pseudo_responses(design, self.prefit, gamma)
            self.bandwidths.append(rule_of_thumb_bandwidth(design.delay, design.lags[:, gamma - 1], ys))
        self.name = 'SBK p=%d d=%d N=%d n=%d' % (self.spec.p, self.spec.d, grid.N, n)
        return self

    def _check_fitted(self):
        if self.prefit is None:
            raise ValueError('estimator is not fitted')

    def estimate(self, gamma, grid):
        "SBKEstimate of m_gamma on grid"
        self._check_fitted()
        return sbk_estimate(self.design, self.prefit, gamma, grid, self.bandwidths[gamma - 1])

    def curves(self, grid):
        return [self.estimate(gamma, grid) for gamma in range(1, self.spec.p + 1)]

    def at_sample(self, gamma):
        """
        m_gamma evaluated at every sample delay value U_t; distinct values are smoothed
        once and mapped back to rows.
        """
        self._check_fitted()
        design = self.design
        ys = pseudo_responses(design, self.prefit, gamma)
        us, inverse = np.unique(design.delay, return_inverse=True)
        h = self.bandwidths[gamma - 1]
        values, status = smooth_on_grid(design.delay, design.lags[:, gamma - 1], ys, us, h)
        return SBKEstimate(int(gamma), frozen(design.delay), frozen(values[inverse]), h, frozen(ys),
                           frozen(status[inverse]))

    def fitted_values(self):
        "X_hat_t = sum_alpha m_alpha(U_t) X_{t-alpha}; NaN where a coefficient is missing"
        self._check_fitted()
        fitted = np.zeros(self.design.response.shape[0])
        for gamma in range(1, self.spec.p + 1):
            fitted += self.at_sample(gamma).values * self.design.lags[:, gamma - 1]
        return fitted

    def mse(self):
        "Mean squared one-step residual over the rows with a fitted value"
        fitted = self.fitted_values()
        ok = np.isfinite(fitted)
        resid = self.design.response[ok] - fitted[ok]
        return float(resid.dot(resid) / ok.sum()) if ok.any() else np.nan
