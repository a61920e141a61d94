"""
Quartic kernel, rule-of-thumb bandwidth and the local linear varying-coefficient
smoother behind the spline-backfitted kernel (SBK) and oracle estimators.
"""
import logging
from collections import namedtuple

import numpy as np
from scipy import linalg

from .common import (frozen, ComponentOutOfRange, DegeneratePilot, InsufficientLocalData, OutOfRange,
                     SingularLocalFit, NumericalError)

logger = logging.getLogger(__name__)

# rule-of-thumb constant for the quartic kernel
RULE_OF_THUMB_CONSTANT = 2.0362
# bandwidth is clamped to [(b-a)/MIN_GRID_CELLS, b-a]
MIN_GRID_CELLS = 20
WIDEN_FACTOR = 1.5
MAX_WIDEN = 3

STATUS_MISSING = -1


KernelConfig = namedtuple('KernelConfig', ['h'])


def kernel_config(h):
    if not np.isfinite(h) or h <= 0:
        raise ValueError('bandwidth must be positive and finite, got %r' % h)
    return KernelConfig(float(h))


def quartic_kernel(u, h):
    "K_h(u) = h^-1 15/16 (1 - (u/h)^2)^2 on |u| <= h, zero elsewhere"
    v = np.asarray(u, dtype=np.float64) / h
    inside = np.abs(v) <= 1.0
    return np.where(inside, (15.0 / 16.0) * (1.0 - v * v) ** 2 / h, 0.0)


def rule_of_thumb_bandwidth(u, x, y, constant=RULE_OF_THUMB_CONSTANT, min_cells=MIN_GRID_CELLS):
    """
    Plug-in bandwidth from a global quartic pilot y ~ (b0 + b1 u + ... + b4 u^4) x:

        h = C [ s^2 (b - a) / sum_t (m''(u_t) x_t)^2 ]^(1/5)

    with s^2 the pilot residual mean square. Clamped to [(b-a)/min_cells, b-a].
    """
    u, x, y = (np.asarray(v, dtype=np.float64) for v in (u, x, y))
    if not (u.shape == x.shape == y.shape):
        raise ValueError('u, x, y must have equal length')
    if u.shape[0] < 10:
        raise ValueError('rule-of-thumb bandwidth needs at least 10 observations, got %d' % u.shape[0])
    a, b = u.min(), u.max()
    if not a < b:
        raise DegeneratePilot('delay variable is constant')
    # centre and scale u for conditioning; curvature is mapped back below
    c, s = 0.5 * (a + b), 0.5 * (b - a)
    v = (u - c) / s
    pilot = np.column_stack([x * v ** k for k in range(5)])
    beta, _, rank, _ = linalg.lstsq(pilot, y)
    if rank < 5:
        raise DegeneratePilot('quartic pilot regression is singular (rank %d)' % rank)
    resid = y - pilot.dot(beta)
    sigma2 = resid.dot(resid) / (u.shape[0] - 5)
    curv = (2 * beta[2] + 6 * beta[3] * v + 12 * beta[4] * v * v) / (s * s)
    denom = ((curv * x) ** 2).sum()
    lower, upper = (b - a) / min_cells, (b - a)
    if denom == 0.0:
        # no curvature: widest window unless the pilot fits exactly
        return lower if sigma2 == 0.0 else upper
    h = constant * (sigma2 * (b - a) / denom) ** 0.2
    return float(min(max(h, lower), upper))


def pseudo_responses(design, prefit, gamma):
    "Y_{gamma,t} = X_t - sum_{alpha != gamma} m_alpha(U_t) X_{t-alpha} using the pre-estimates"
    return _partial_responses(design, prefit.pre_estimates, gamma)


def oracle_responses(design, true_coeffs, gamma):
    "Same as pseudo_responses but with the true coefficient functions"
    p = design.lags.shape[1]
    _check_gamma(gamma, p)
    if len(true_coeffs) != p:
        raise ValueError('expected %d coefficient functions, got %d' % (p, len(true_coeffs)))
    values = np.column_stack([fn(design.delay) for fn in true_coeffs])
    return _partial_responses(design, values, gamma)


def _check_gamma(gamma, p):
    if int(gamma) != gamma or not 1 <= gamma <= p:
        raise ComponentOutOfRange('component %r outside 1..%d' % (gamma, p))


def _partial_responses(design, coeff_values, gamma):
    p = design.lags.shape[1]
    _check_gamma(gamma, p)
    ys = np.array(design.response, dtype=np.float64)
    for alpha in range(p):
        if alpha == gamma - 1:
            continue
        ys = ys - coeff_values[:, alpha] * design.lags[:, alpha]
    return ys


def local_linear_vc(u_query, u, x, y, h):
    """
    (1, 0) (V'WV)^-1 V'WY with rows of V = (x_t, x_t (u_t - u_query)) and
    W = diag K_h(u_t - u_query). Solved as whitened least squares.
    """
    du = u - u_query
    w = quartic_kernel(du, h)
    inside = w > 0
    if inside.sum() < 2:
        raise InsufficientLocalData('%d observations within h=%g of u=%g' % (inside.sum(), h, u_query))
    wr = np.sqrt(w[inside])
    xi = x[inside]
    vv = np.column_stack([xi * wr, xi * du[inside] * wr])
    coef, _, rank, _ = linalg.lstsq(vv, y[inside] * wr)
    if rank < 2:
        raise SingularLocalFit('local design at u=%g is singular' % u_query)
    return float(coef[0])


SBKEstimate = namedtuple('SBKEstimate', ['component', 'grid', 'values', 'bandwidth', 'pseudo_responses', 'status'])


def smooth_on_grid(u, x, y, grid, h, widen_factor=WIDEN_FACTOR, max_widen=MAX_WIDEN):
    """
    Pointwise local linear fits over grid. A failing point is retried with h widened by
    widen_factor up to max_widen times, then recorded as missing (NaN, status -1).
    """
    values = np.empty(len(grid))
    status = np.zeros(len(grid), dtype=int)
    for i, u0 in enumerate(grid):
        hh = h
        for k in range(max_widen + 1):
            try:
                values[i] = local_linear_vc(u0, u, x, y, hh)
                status[i] = k
                break
            except NumericalError as err:
                logger.debug('u=%g h=%g: %s', u0, hh, err)
                hh *= widen_factor
        else:
            values[i] = np.nan
            status[i] = STATUS_MISSING
    missing = (status == STATUS_MISSING).sum()
    if missing:
        logger.warning('%d of %d query points left missing (h=%g)', missing, len(grid), h)
    return values, status


def _check_grid(design, grid):
    grid = np.asarray(grid, dtype=np.float64).reshape(-1)
    if np.any(grid < design.a) or np.any(grid > design.b):
        raise OutOfRange('query grid leaves [%g, %g]' % (design.a, design.b))
    return grid


def sbk_estimate(design, prefit, gamma, grid, h=None):
    "Spline-backfitted kernel estimate of m_gamma on grid"
    grid = _check_grid(design, grid)
    ys = pseudo_responses(design, prefit, gamma)
    x = design.lags[:, gamma - 1]
    if h is None:
        h = rule_of_thumb_bandwidth(design.delay, x, ys)
    h = kernel_config(h).h
    values, status = smooth_on_grid(design.delay, x, ys, grid, h)
    return SBKEstimate(int(gamma), frozen(grid), frozen(values), h, frozen(ys), frozen(status))


def oracle_estimate(design, true_coeffs, gamma, grid, h):
    "Oracle smoother: as sbk_estimate with the true nuisance functions"
    grid = _check_grid(design, grid)
    ys = oracle_responses(design, true_coeffs, gamma)
    h = kernel_config(h).h
    values, status = smooth_on_grid(design.delay, design.lags[:, gamma - 1], ys, grid, h)
    return SBKEstimate(int(gamma), frozen(grid), frozen(values), h, frozen(ys), frozen(status))
