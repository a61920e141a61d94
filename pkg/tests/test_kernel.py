import numpy as np
import pytest
from numpy.testing import assert_array_almost_equal, assert_array_equal
from scipy import integrate

from pyfcar.common import (ComponentOutOfRange, DegeneratePilot, InsufficientLocalData, OutOfRange,
                           SingularLocalFit)
from pyfcar.spline import SplinePrefit, knot_grid, fit_prestep, fit_prestep_shrinking, choose_knot_count, \
    truth_prefit
from pyfcar.kernel import (quartic_kernel, rule_of_thumb_bandwidth, pseudo_responses, oracle_responses,
                           local_linear_vc, smooth_on_grid, sbk_estimate, oracle_estimate, STATUS_MISSING,
                           MIN_GRID_CELLS)
from pyfcar.simulation import SimulationConfig, simulate_design, coefficient_functions, evaluation_grid

from .conftest import uniform_design


def test_kernel_values():
    assert quartic_kernel(0.0, 1.0) == 0.9375
    assert quartic_kernel(0.5, 1.0) == 0.52734375


@pytest.mark.parametrize('h', [0.1, 1.0, 10.0])
def test_kernel_mass_and_support(h):
    mass, _ = integrate.quad(lambda u: float(quartic_kernel(u, h)), -h, h)
    assert abs(mass - 1.0) < 1e-6
    assert quartic_kernel(h, h) == 0.0
    assert quartic_kernel(-h, h) == 0.0
    assert_array_equal(quartic_kernel(np.array([-2 * h, 1.5 * h]), h), [0.0, 0.0])


def _curved_sample(rng, n=300):
    u = rng.uniform(0.0, 1.0, n)
    x = rng.standard_normal(n)
    y = np.sin(2 * np.pi * u) * x + 0.2 * rng.standard_normal(n)
    return u, x, y


def test_bandwidth_scale_equivariance(rng):
    u, x, y = _curved_sample(rng)
    assert_array_almost_equal(rule_of_thumb_bandwidth(u, x, y), rule_of_thumb_bandwidth(u, x, 2 * y), 10)


def test_bandwidth_exact_pilot(rng):
    "Zero pilot residual clamps to the lower bound"
    u = rng.uniform(0.0, 1.0, 100)
    h = rule_of_thumb_bandwidth(u, np.ones(100), u ** 2)
    assert h == pytest.approx((u.max() - u.min()) / MIN_GRID_CELLS)


@pytest.mark.parametrize('seed', range(5))
def test_bandwidth_bounds(seed):
    rng = np.random.default_rng(seed)
    u, x, y = _curved_sample(rng, 50 + 40 * seed)
    y = y + seed * rng.standard_normal(y.shape[0])
    h = rule_of_thumb_bandwidth(u, x, y)
    width = u.max() - u.min()
    assert width / MIN_GRID_CELLS <= h <= width


def test_bandwidth_errors(rng):
    with pytest.raises(ValueError):
        rule_of_thumb_bandwidth(np.arange(5.0), np.ones(5), np.ones(5))
    with pytest.raises(DegeneratePilot):
        rule_of_thumb_bandwidth(np.ones(20), rng.standard_normal(20), rng.standard_normal(20))


def _prefit_with(pre):
    return SplinePrefit(None, np.empty(0), pre, 1.0)


def test_pseudo_responses_p1(rng):
    design = uniform_design(rng, 40, 1)
    prefit = fit_prestep(design, knot_grid(design.a, design.b, 2))
    assert_array_equal(pseudo_responses(design, prefit, 1), design.response)


def test_pseudo_responses_zero_nuisance(rng):
    design = uniform_design(rng, 40, 2)
    pre = np.column_stack([rng.standard_normal(40), np.zeros(40)])
    assert_array_equal(pseudo_responses(design, _prefit_with(pre), 1), design.response)


def test_pseudo_responses_brute_force(rng):
    design = uniform_design(rng, 30, 4)
    pre = rng.standard_normal((30, 4))
    for gamma in range(1, 5):
        got = pseudo_responses(design, _prefit_with(pre), gamma)
        for t in range(30):
            expected = design.response[t]
            for alpha in range(4):
                if alpha != gamma - 1:
                    expected -= pre[t, alpha] * design.lags[t, alpha]
            assert abs(got[t] - expected) < 1e-12


def test_component_out_of_range(rng):
    design = uniform_design(rng, 20, 2)
    with pytest.raises(ComponentOutOfRange):
        pseudo_responses(design, _prefit_with(np.zeros((20, 2))), 3)
    with pytest.raises(ComponentOutOfRange):
        oracle_responses(design, [np.sin, np.cos], 0)


def test_local_linear_exact(rng):
    u = rng.uniform(0.0, 1.0, 60)
    x = rng.standard_normal(60)
    assert abs(local_linear_vc(0.4, u, x, 1.7 * x, 0.3) - 1.7) < 1e-10
    y = (0.8 - 2.0 * (u - 0.6)) * x
    assert abs(local_linear_vc(0.6, u, x, y, 0.25) - 0.8) < 1e-10


def test_local_linear_brute_force(rng):
    u = rng.uniform(0.0, 1.0, 80)
    x = rng.standard_normal(80)
    y = rng.standard_normal(80)
    for u0 in (0.1, 0.5, 0.9):
        w = quartic_kernel(u - u0, 0.3)
        v1, v2 = x, x * (u - u0)
        s11, s12, s22 = (w * v1 * v1).sum(), (w * v1 * v2).sum(), (w * v2 * v2).sum()
        r1, r2 = (w * v1 * y).sum(), (w * v2 * y).sum()
        expected = (s22 * r1 - s12 * r2) / (s11 * s22 - s12 * s12)
        assert abs(local_linear_vc(u0, u, x, y, 0.3) - expected) < 1e-8


def test_local_linear_failures():
    u = np.array([0.0, 0.1, 0.2, 0.9])
    with pytest.raises(InsufficientLocalData):
        local_linear_vc(0.9, u, np.ones(4), np.ones(4), 0.3)
    with pytest.raises(SingularLocalFit):
        local_linear_vc(0.1, u, np.zeros(4), np.ones(4), 0.3)


def test_smooth_on_grid_widening():
    u = np.array([0.0, 0.1, 1.0, 1.1])
    x = np.ones(4)
    values, status = smooth_on_grid(u, x, 2.0 * x, [0.05, 0.6, 5.0], 0.3)
    assert_array_almost_equal(values[:2], [2.0, 2.0], 10)
    assert list(status) == [0, 2, STATUS_MISSING]
    assert np.isnan(values[2])


def test_sbk_constant_coefficient(rng):
    design = uniform_design(rng, 200, 1, coef=[0.5])
    prefit = fit_prestep(design, knot_grid(design.a, design.b, 3))
    grid = np.linspace(design.a, design.b, 21)
    est = sbk_estimate(design, prefit, 1, grid, 0.3)
    assert_array_almost_equal(est.values, np.full(21, 0.5), 10)
    assert est.bandwidth == 0.3
    assert np.all(est.status == 0)


def test_sbk_default_bandwidth(p4_draw):
    _, sim = p4_draw
    design = sim.design
    prefit = fit_prestep_shrinking(design, choose_knot_count(500, 5))
    est = sbk_estimate(design, prefit, 1, evaluation_grid(design.a, design.b))
    width = design.b - design.a
    assert width / MIN_GRID_CELLS <= est.bandwidth <= width
    assert est.values.shape == (101,)


def test_sbk_grid_out_of_range(rng):
    design = uniform_design(rng, 50, 1)
    prefit = fit_prestep(design, knot_grid(design.a, design.b, 1))
    with pytest.raises(OutOfRange):
        sbk_estimate(design, prefit, 1, [design.b + 0.1], 0.2)


@pytest.mark.parametrize('seed', range(50))
def test_oracle_coincides_for_p1(seed):
    cfg = SimulationConfig(1, 2, (0.5,), 1.5, n=200, seed=seed)
    design = simulate_design(cfg).design
    truth = coefficient_functions(cfg.A, cfg.omega)
    prefit = fit_prestep_shrinking(design, choose_knot_count(200, 2))
    grid = evaluation_grid(design.a, design.b)
    h = 0.5 * (design.b - design.a) / 4
    sbk = sbk_estimate(design, prefit, 1, grid, h)
    oracle = oracle_estimate(design, truth, 1, grid, h)
    assert_array_equal(sbk.values, oracle.values)
    assert_array_equal(sbk.status, oracle.status)


def test_oracle_with_truth_prefit(p4_draw):
    cfg, sim = p4_draw
    design = sim.design
    truth = coefficient_functions(cfg.A, cfg.omega)
    grid = evaluation_grid(design.a, design.b)
    for gamma in (1, 4):
        sbk = sbk_estimate(design, truth_prefit(design, truth), gamma, grid, 0.4)
        oracle = oracle_estimate(design, truth, gamma, grid, 0.4)
        assert_array_equal(sbk.values, oracle.values)


def test_oracle_brute_force(p4_draw):
    cfg, sim = p4_draw
    design = sim.design
    truth = coefficient_functions(cfg.A, cfg.omega)
    grid = np.linspace(design.a + 0.5, design.b - 0.5, 7)
    h = 0.4
    est = oracle_estimate(design, truth, 2, grid, h)
    ys = np.array(design.response)
    for alpha in (1, 3, 4):
        ys = ys - truth[alpha - 1](design.delay) * design.lags[:, alpha - 1]
    x = design.lags[:, 1]
    for i, u0 in enumerate(grid):
        if est.status[i] != 0:
            continue
        du = design.delay - u0
        w = quartic_kernel(du, h)
        s11, s12, s22 = (w * x * x).sum(), (w * x * x * du).sum(), (w * x * x * du * du).sum()
        r1, r2 = (w * x * ys).sum(), (w * x * du * ys).sum()
        expected = (s22 * r1 - s12 * r2) / (s11 * s22 - s12 * s12)
        assert abs(est.values[i] - expected) < 1e-8
