"""
Monte-Carlo harness: FCAR data generation with sinusoidal coefficient functions and
heteroscedastic noise, and the relative efficiency of SBK against the oracle smoother.
"""
import os
import logging
from collections import namedtuple
from concurrent import futures
from datetime import datetime
from functools import partial

import numpy as np
import pandas as pd
from sklearn.neighbors import KernelDensity

from .common import frozen, ExplosiveSeries, NumericalError, StudyAborted, ZeroDenominator
from .timeseries import TimeSeries, FCARSpec, build_lagged_design
from .spline import choose_knot_count, fit_prestep_shrinking, truth_prefit
from .kernel import pseudo_responses, rule_of_thumb_bandwidth, sbk_estimate, oracle_estimate, STATUS_MISSING

logger = logging.getLogger(__name__)

RECURSIVE = 'recursive'
EXOGENOUS = 'exogenous'
GENERATOR_MODES = (RECURSIVE, EXOGENOUS)

MAX_REDRAWS = 20
EXPLOSION_BOUND = 1e6
MIN_BURN_IN = 100


def _alternating(p):
    return tuple(0.5 if alpha % 2 == 0 else -0.5 for alpha in range(p))


# amplitudes, omega and delay of the p=4 and p=10 study designs
STUDY_PRESETS = {
    4: dict(A=_alternating(4), omega=4.5, d=5),
    10: dict(A=_alternating(10), omega=1.5, d=11),
}


_SimulationConfig = namedtuple('SimulationConfig', ['p', 'd', 'A', 'omega', 'n', 'burn_in', 'generator_mode',
                                                    'seed', 'noise_scale'])


class SimulationConfig(_SimulationConfig):
    __slots__ = ()

    def __new__(cls, p, d=None, A=None, omega=None, n=1000, burn_in=200, generator_mode=EXOGENOUS, seed=0,
                noise_scale=1.0):
        if d is None:
            d = p + 1
        spec = FCARSpec(p, d)
        if A is None or omega is None:
            raise ValueError('amplitudes A and omega are required')
        A = tuple(float(v) for v in A)
        if len(A) != p:
            raise ValueError('expected %d amplitudes, got %d' % (p, len(A)))
        if not omega > 0:
            raise ValueError('omega must be positive, got %r' % omega)
        if n < 2 * spec.t0:
            raise ValueError('n=%d too small, need at least %d' % (n, 2 * spec.t0))
        if generator_mode not in GENERATOR_MODES:
            raise ValueError('generator_mode must be one of %s' % (GENERATOR_MODES,))
        if generator_mode == RECURSIVE and burn_in < MIN_BURN_IN:
            raise ValueError('recursive generation needs burn_in >= %d' % MIN_BURN_IN)
        if burn_in < 0 or seed < 0 or not noise_scale > 0:
            raise ValueError('burn_in and seed must be non-negative, noise_scale positive')
        return super(SimulationConfig, cls).__new__(cls, spec.p, spec.d, A, float(omega), int(n), int(burn_in),
                                                    generator_mode, int(seed), float(noise_scale))


def _sinusoid(amplitude, omega, u):
    return amplitude * np.sin(omega * np.pi * np.asarray(u, dtype=np.float64))


def coefficient_functions(A, omega):
    "m_alpha(u) = A_alpha sin(omega pi u), alpha = 1..p"
    return [partial(_sinusoid, amp, omega) for amp in A]


def sigma_fn(u, recent_lags):
    """
    0.1 (sqrt(p)/2) u (5 - e^s) / (5 + e^s), s = sum |X_{t-i}| / p over the p most recent lags.
    Vectorised over leading axes; may be negative.
    """
    lags = np.asarray(recent_lags, dtype=np.float64)
    p = lags.shape[-1]
    es = np.exp(np.abs(lags).sum(axis=-1) / p)
    return 0.1 * (np.sqrt(p) / 2.0) * np.asarray(u) * (5.0 - es) / (5.0 + es)


def _rng(config, rng):
    return np.random.default_rng(config.seed) if rng is None else rng


def generate_fcar(config, rng=None):
    """
    exogenous: X_1..X_n i.i.d. N(0, 1); the model responses are built on top by simulate_design.
    recursive: X_t = sum_alpha m_alpha(X_{t-d}) X_{t-alpha} + sigma eps_t after burn-in, with up to
    MAX_REDRAWS fresh draws when |X_t| exceeds EXPLOSION_BOUND.
    """
    rng = _rng(config, rng)
    if config.generator_mode == EXOGENOUS:
        return TimeSeries(rng.standard_normal(config.n), frequency=1)
    p, d = config.p, config.d
    amps = np.array(config.A)
    m = max(p, d)
    total = m + config.burn_in + config.n
    for attempt in range(MAX_REDRAWS + 1):
        xs = np.zeros(total)
        xs[:m] = rng.standard_normal(m)
        eps = rng.standard_normal(total - m) * config.noise_scale
        exploded = False
        for t in range(m, total):
            u = xs[t - d]
            lags = xs[t - p:t][::-1]
            xs[t] = np.sin(config.omega * np.pi * u) * amps.dot(lags) + sigma_fn(u, lags) * eps[t - m]
            if not abs(xs[t]) <= EXPLOSION_BOUND:
                exploded = True
                break
        if not exploded:
            return TimeSeries(xs[-config.n:], frequency=1)
        logger.debug('recursive draw %d exploded at step %d', attempt, t)
    raise ExplosiveSeries('series exploded in %d consecutive draws' % (MAX_REDRAWS + 1))


SimulatedDesign = namedtuple('SimulatedDesign', ['series', 'design', 'noise'])


def simulate_design(config, rng=None):
    "Series plus the design estimators fit; `noise` is the realised sigma * eps term per row"
    rng = _rng(config, rng)
    series = generate_fcar(config, rng)
    design = build_lagged_design(series, FCARSpec(config.p, config.d))
    funs = coefficient_functions(config.A, config.omega)
    signal = np.zeros(design.response.shape[0])
    for alpha, fn in enumerate(funs):
        signal += fn(design.delay) * design.lags[:, alpha]
    if config.generator_mode == EXOGENOUS:
        eps = rng.standard_normal(signal.shape[0]) * config.noise_scale
        noise = sigma_fn(design.delay, design.lags) * eps
        design = design._replace(response=frozen(signal + noise))
    else:
        noise = design.response - signal
    return SimulatedDesign(series, design, frozen(noise))


def evaluation_grid(a, b, points=101, central=0.9):
    "Equally spaced points over the central fraction of [a, b]"
    margin = 0.5 * (1.0 - central) * (b - a)
    return np.linspace(a + margin, b - margin, points)


def relative_efficiency(sbk, oracle, truth):
    """
    Mean squared error of the SBK estimate over that of the oracle, on the shared grid.
    Points missing in either estimate are skipped in both.
    """
    if not np.array_equal(sbk.grid, oracle.grid) or len(truth) != len(sbk.grid):
        raise ValueError('SBK, oracle and truth must share the evaluation grid')
    truth = np.asarray(truth, dtype=np.float64)
    ok = (np.asarray(sbk.status) != STATUS_MISSING) & (np.asarray(oracle.status) != STATUS_MISSING)
    # fixed summation order: invariant to the ordering of the grid
    order = np.argsort(np.asarray(sbk.grid)[ok], kind='stable')
    err_sbk = (np.asarray(sbk.values)[ok] - truth[ok])[order]
    err_oracle = (np.asarray(oracle.values)[ok] - truth[ok])[order]
    if err_oracle.size == 0:
        raise ZeroDenominator('no grid point estimated by both smoothers')
    den = (err_oracle ** 2).mean()
    if den == 0.0:
        raise ZeroDenominator('oracle estimate equals the truth on the grid')
    return float((err_sbk ** 2).mean() / den)


EfficiencySummary = namedtuple('EfficiencySummary', ['mode', 'median', 'variance', 'density_x', 'density'])


def silverman_bandwidth(samples):
    "0.9 min(sd, IQR/1.34) n^(-1/5); falls back to the non-zero spread measure"
    sd = np.std(samples, ddof=1)
    q75, q25 = np.percentile(samples, [75, 25])
    spreads = [v for v in (sd, (q75 - q25) / 1.34) if v > 0]
    if not spreads:
        return 0.0
    return 0.9 * min(spreads) * samples.shape[0] ** (-0.2)


def summarize_efficiencies(samples, kde_points=512):
    """
    Median (exact order statistic), unbiased variance and the mode of a Gaussian kernel
    density estimate with Silverman bandwidth, maximised over kde_points between min and max.
    """
    xs = np.asarray(samples, dtype=np.float64)
    if xs.shape[0] < 2:
        raise ValueError('need at least 2 samples, got %d' % xs.shape[0])
    median = float(np.median(xs))
    variance = float(np.var(xs, ddof=1))
    h = silverman_bandwidth(xs)
    if h == 0.0:
        return EfficiencySummary(float(xs[0]), median, variance, np.empty(0), np.empty(0))
    kde = KernelDensity(kernel='gaussian', bandwidth=h).fit(xs[:, None])
    grid = np.linspace(xs.min(), xs.max(), kde_points)
    density = np.exp(kde.score_samples(grid[:, None]))
    return EfficiencySummary(float(grid[np.argmax(density)]), median, variance, grid, density)


StudyConfig = namedtuple('StudyConfig', ['p', 'n_values', 'reps', 'components', 'seed', 'A', 'omega', 'd',
                                         'generator_mode', 'burn_in', 'noise_scale', 'c1', 'c2', 'grid_points',
                                         'central', 'kde_points', 'bandwidth_per_replication',
                                         'max_failure_rate', 'oracle_prefit', 'shrink_knots', 'threads'])


def study_config(p, n_values, reps, components, seed=0, A=None, omega=None, d=None, generator_mode=EXOGENOUS,
                 burn_in=200, noise_scale=1.0, c1=1.0, c2=1.0, grid_points=101, central=0.9, kde_points=512,
                 bandwidth_per_replication=True, max_failure_rate=0.2, oracle_prefit=False, shrink_knots=True,
                 threads=None):
    "StudyConfig with STUDY_PRESETS filling A, omega and d when p is 4 or 10"
    preset = STUDY_PRESETS.get(p, {})
    A = A if A is not None else preset.get('A')
    omega = omega if omega is not None else preset.get('omega')
    d = d if d is not None else preset.get('d', p + 1)
    n_values = tuple(int(n) for n in n_values)
    components = tuple(int(c) for c in components)
    if not n_values or not components:
        raise ValueError('n_values and components must be non-empty')
    if reps < 1:
        raise ValueError('reps must be positive, got %r' % reps)
    bad = [c for c in components if not 1 <= c <= p]
    if bad:
        raise ValueError('components %s outside 1..%d' % (bad, p))
    # validates A, omega, d, mode against every sample size
    for n in n_values:
        SimulationConfig(p, d, A, omega, n, burn_in, generator_mode, seed, noise_scale)
    return StudyConfig(p, n_values, int(reps), components, int(seed), tuple(A), float(omega), int(d),
                       generator_mode, int(burn_in), float(noise_scale), float(c1), float(c2), int(grid_points),
                       float(central), int(kde_points), bool(bandwidth_per_replication), float(max_failure_rate),
                       bool(oracle_prefit), bool(shrink_knots), threads)


EfficiencyReport = namedtuple('EfficiencyReport', ['p', 'n', 'component', 'samples', 'mode', 'median', 'variance',
                                                   'n_failed', 'density_x', 'density'])

Replication = namedtuple('Replication', ['index', 'effs', 'bandwidths', 'failures'])


class EfficiencyStudy(object):
    def __init__(self, config):
        self.config = config
        self.truth = coefficient_functions(config.A, config.omega)
        self.threads = config.threads or os.cpu_count() or 1

    def rng(self, n, rep, attempt):
        "Stream for attempt `attempt` of replication `rep` in the cell of sample size n"
        cfg = self.config
        return np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(cfg.p, n, rep, attempt)))

    def draw(self, n, rng, fixed_h=None):
        "One replication: efficiency and bandwidth per component; numerical failures propagate"
        cfg = self.config
        sim_cfg = SimulationConfig(cfg.p, cfg.d, cfg.A, cfg.omega, n, cfg.burn_in, cfg.generator_mode, cfg.seed,
                                   cfg.noise_scale)
        design = simulate_design(sim_cfg, rng).design
        if cfg.oracle_prefit:
            prefit = truth_prefit(design, self.truth)
        else:
            prefit = fit_prestep_shrinking(design, choose_knot_count(n, cfg.d, cfg.c1, cfg.c2), cfg.shrink_knots)
        us = evaluation_grid(design.a, design.b, cfg.grid_points, cfg.central)
        effs, hs = {}, {}
        for gamma in cfg.components:
            if fixed_h is not None:
                h = fixed_h[gamma]
            else:
                ys = pseudo_responses(design, prefit, gamma)
                h = rule_of_thumb_bandwidth(design.delay, design.lags[:, gamma - 1], ys)
            sbk = sbk_estimate(design, prefit, gamma, us, h)
            oracle = oracle_estimate(design, self.truth, gamma, us, h)
            effs[gamma] = relative_efficiency(sbk, oracle, self.truth[gamma - 1](us))
            hs[gamma] = h
        return effs, hs

    def replicate(self, n, rep, fixed_h=None):
        max_failures = int(self.config.max_failure_rate * self.config.reps)
        failures = 0
        while True:
            try:
                effs, hs = self.draw(n, self.rng(n, rep, failures), fixed_h)
                return Replication(rep, effs, hs, failures)
            except NumericalError as err:
                failures += 1
                logger.debug('n=%d rep=%d redraw %d: %s', n, rep, failures, err)
                if failures > max_failures:
                    raise StudyAborted('n=%d: replication %d failed %d times (%s)' % (n, rep, failures, err))

    def run_cell(self, n):
        cfg = self.config
        t0 = datetime.now()
        first = self.replicate(n, 0)
        fixed_h = None if cfg.bandwidth_per_replication else first.bandwidths
        with futures.ThreadPoolExecutor(max_workers=self.threads) as pool:
            rest = list(pool.map(lambda rep: self.replicate(n, rep, fixed_h), range(1, cfg.reps)))
        results = [first] + rest
        n_failed = sum(r.failures for r in results)
        if n_failed > cfg.max_failure_rate * cfg.reps:
            raise StudyAborted('n=%d: %d of %d replications redrawn' % (n, n_failed, cfg.reps))
        reports = []
        for gamma in cfg.components:
            samples = np.array([r.effs[gamma] for r in results])
            if samples.shape[0] >= 2:
                summary = summarize_efficiencies(samples, cfg.kde_points)
            else:
                summary = EfficiencySummary(float(samples[0]), float(samples[0]), np.nan, np.empty(0), np.empty(0))
            reports.append(EfficiencyReport(cfg.p, n, gamma, frozen(samples), summary.mode, summary.median,
                                            summary.variance, n_failed, summary.density_x, summary.density))
            logger.info('p=%d n=%d eff_%d: mode=%.3f median=%.3f variance=%.3f failed=%d', cfg.p, n, gamma,
                        summary.mode, summary.median, summary.variance, n_failed)
        logger.info('cell n=%d secs=%g', n, (datetime.now() - t0).total_seconds())
        return reports

    def run(self):
        reports = []
        for n in self.config.n_values:
            reports.extend(self.run_cell(n))
        return reports


def run_study(p, n_values, reps, components, seed=0, **kwargs):
    "Relative efficiency reports, one per (n, component) in input order"
    return EfficiencyStudy(study_config(p, n_values, reps, components, seed, **kwargs)).run()


def write_study(reports, output_dir):
    "samples.csv, summary.csv and one density_p{p}_n{n}_a{component}.csv per cell"
    rows, summary = [], []
    for rpt in reports:
        for rep, eff in enumerate(rpt.samples):
            rows.append((rpt.p, rpt.n, rpt.component, rep, eff))
        summary.append((rpt.p, rpt.n, rpt.component, rpt.mode, rpt.median, rpt.variance, rpt.n_failed))
        density = pd.DataFrame({'x': rpt.density_x, 'density': rpt.density})
        density.to_csv(os.path.join(output_dir, 'density_p%d_n%d_a%d.csv' % (rpt.p, rpt.n, rpt.component)),
                       index=False, lineterminator='\n')
    pd.DataFrame(rows, columns=['p', 'n', 'component', 'replication', 'eff']).to_csv(
        os.path.join(output_dir, 'samples.csv'), index=False, lineterminator='\n')
    pd.DataFrame(summary, columns=['p', 'n', 'component', 'mode', 'median', 'variance', 'n_failed']).to_csv(
        os.path.join(output_dir, 'summary.csv'), index=False, lineterminator='\n')
