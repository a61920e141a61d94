"""
Degree-0 B-spline pre-estimation of all coefficient functions of an FCAR model.

The basis has N+1 interval indicators B_0..B_N on equally spaced knots
a = k_0 < k_1 < ... < k_{N+1} = b; the rightmost interval is closed at b.
Coefficients are laid out component-major: lambda[(N+1)*(alpha-1) + J].
"""
import math
import logging
from collections import namedtuple

import numpy as np
from scipy import linalg

from .common import frozen, OutOfRange, SingularDesign

logger = logging.getLogger(__name__)

# relative tolerance on |R_ii| of the pivoted QR to declare rank deficiency
RANK_TOL = 1e-10
# a bin needs at least this many rows per lag, else its p coefficients interpolate
MIN_ROWS_PER_LAG = 2


class KnotGrid(object):
    def __init__(self, a, b, N):
        if not (np.isfinite(a) and np.isfinite(b)) or not a < b:
            raise ValueError('knot grid needs finite a < b, got a=%r, b=%r' % (a, b))
        if int(N) != N or N < 0:
            raise ValueError('N must be a non-negative integer, got %r' % N)
        self.a = float(a)
        self.b = float(b)
        self.N = int(N)
        self.knots = frozen(np.linspace(self.a, self.b, self.N + 2))

    @property
    def n_basis(self):
        return self.N + 1

    @property
    def width(self):
        return (self.b - self.a) / (self.N + 1)

    def __repr__(self):
        return '<KnotGrid [%g, %g] N=%d>' % (self.a, self.b, self.N)

    def bin_index(self, us):
        "Vectorised basis_eval: bin index of every entry of us"
        us = np.asarray(us, dtype=np.float64)
        if np.any(us < self.a) or np.any(us > self.b):
            bad = us[(us < self.a) | (us > self.b)].reshape(-1)[0]
            raise OutOfRange('u=%r outside [%r, %r]' % (bad, self.a, self.b))
        ix = np.searchsorted(self.knots, us, side='right') - 1
        return np.minimum(ix, self.N)


def knot_grid(a, b, N):
    return KnotGrid(a, b, N)


def choose_knot_count(n, d, c1=1.0, c2=1.0):
    "N_n = min(floor(c1 n^(1/4) ln n) + c2, floor(n / (2d)))"
    if n < 2:
        raise ValueError('n must be at least 2, got %r' % n)
    rough = int(math.floor(c1 * n ** 0.25 * math.log(n)) + c2)
    return max(0, min(rough, n // (2 * d)))


def basis_eval(grid, u):
    """
    Returns (J, 1.0) where J is the unique bin with k_J <= u < k_{J+1}; u = b maps to J = N.
    All other basis functions are zero at u.
    """
    return int(grid.bin_index(u)), 1.0


def build_design(design, grid):
    """
    Z = (B o X_1, ..., B o X_p): row t, column (N+1)(alpha-1)+J holds B_J(U_t) X_{t-alpha}.
    Each row has exactly p entries that may be non-zero.
    """
    bins = grid.bin_index(design.delay)
    rows, p = design.lags.shape
    nb = grid.n_basis
    zz = np.zeros((rows, p * nb))
    ix = np.arange(rows)
    for alpha in range(p):
        zz[ix, alpha * nb + bins] = design.lags[:, alpha]
    return zz


class SplinePrefit(namedtuple('SplinePrefit', ['grid', 'lambda_', 'pre_estimates', 'condition_estimate'])):
    __slots__ = ()

    def evaluate(self, alpha, us):
        "Pre-estimate m_alpha(u) for alpha in 1..p"
        nb = self.grid.n_basis
        bins = self.grid.bin_index(us)
        return self.lambda_[(alpha - 1) * nb + bins]


def _check_columns(zz, bins, grid, p):
    "Names empty bins, bins with fewer than MIN_ROWS_PER_LAG * p rows and all-zero (lag, bin) columns"
    nb = grid.n_basis
    counts = np.bincount(bins, minlength=nb)
    empty = [int(j) for j in np.flatnonzero(counts == 0)]
    thin = [int(j) for j in np.flatnonzero((counts > 0) & (counts < MIN_ROWS_PER_LAG * p))]
    col_norms = np.sqrt((zz * zz).sum(axis=0))
    degenerate = []
    for col in np.flatnonzero(col_norms == 0):
        alpha, j = divmod(int(col), nb)
        if j not in empty:
            degenerate.append((alpha + 1, j))
    return empty, thin, degenerate


def fit_prestep(design, grid):
    """
    Least squares lambda minimising |response - Z lambda|^2, solved by a column-pivoted QR
    (rank revealing) rather than by inverting Z'Z. Every non-empty bin must hold at least
    MIN_ROWS_PER_LAG * p rows.
    """
    zz = build_design(design, grid)
    rows, cols = zz.shape
    p = design.lags.shape[1]
    if rows < cols:
        raise SingularDesign('design has %d rows but %d spline coefficients' % (rows, cols))
    bins = grid.bin_index(design.delay)
    empty, thin, degenerate = _check_columns(zz, bins, grid, p)
    if empty or degenerate:
        raise SingularDesign('spline design is rank deficient', empty_bins=empty, degenerate_columns=degenerate,
                             thin_bins=thin)
    if thin:
        raise SingularDesign('spline bins hold fewer than %d rows' % (MIN_ROWS_PER_LAG * p), thin_bins=thin)
    qq, rr, piv = linalg.qr(zz, mode='economic', pivoting=True)
    diag = np.abs(np.diag(rr))
    rank = int((diag > RANK_TOL * diag[0]).sum())
    if rank < cols:
        lost = sorted((int(c) // grid.n_basis + 1, int(c) % grid.n_basis) for c in piv[rank:])
        raise SingularDesign('numerical rank %d < %d' % (rank, cols), degenerate_columns=lost)
    coef = linalg.solve_triangular(rr, qq.T.dot(design.response))
    lambda_ = np.empty(cols)
    lambda_[piv] = coef
    # 1 / cond(Z'Z) = (s_min / s_max)^2 of R
    sv = linalg.svdvals(rr)
    condition = float((sv[-1] / sv[0]) ** 2)
    nb = grid.n_basis
    pre = np.column_stack([lambda_[alpha * nb + bins] for alpha in range(p)])
    logger.debug('prefit p=%d N=%d rows=%d rcond=%g', p, grid.N, rows, condition)
    return SplinePrefit(grid, frozen(lambda_), frozen(pre), condition)


def truth_prefit(design, coefficient_functions):
    "Stand-in prefit whose pre-estimates are the given functions evaluated at U_t"
    pre = np.column_stack([fn(design.delay) for fn in coefficient_functions])
    return SplinePrefit(None, frozen(np.empty(0)), frozen(pre), 1.0)


def fit_prestep_shrinking(design, N, shrink_knots=True):
    """
    fit_prestep on N interior knots. With shrink_knots a SingularDesign (empty or thinly
    populated bins) is retried with N-1 knots, down to N = 0; the knots used are on
    the returned prefit's grid.
    """
    if not design.a < design.b:
        raise SingularDesign('delay variable is constant on the sample')
    while True:
        try:
            return fit_prestep(design, knot_grid(design.a, design.b, N))
        except SingularDesign as err:
            if not shrink_knots or N == 0:
                raise
            logger.debug('N=%d: %s; retrying with N=%d', N, err, N - 1)
            N -= 1
