import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vacuumns.core import ParameterError, make_grid
from vacuumns.inequalities import (InterpolationInstance, Mixture, check_sqrt_weight_bound,
                                   check_weighted_gn, gn_sigmas, gn_suite, interp_suite, power_weight,
                                   random_interp_instance, random_mixture)

GRID = make_grid(40, 8192, 0.0)


def test_mixture_derivative_exact():
    m = random_mixture(np.random.default_rng(3), nonneg=False, terms=3)
    y = np.linspace(-5, 5, 11)
    eps = 1e-6
    np.testing.assert_allclose(m.derivative(y), (m(y + eps) - m(y - eps)) / (2 * eps), atol=1e-8)


def test_power_weight_log_lipschitz():
    y = GRID.nodes
    for p in (0.0, 1.0, 3.5):
        w, dw, K = power_weight(y, p)
        assert K == p / 2 and np.all(np.abs(dw) <= K * w * (1 + 1e-14))


def test_sqrt_bound_zero_function():
    n = GRID.size
    r = check_sqrt_weight_bound(InterpolationInstance(np.ones(n), np.ones(n), np.zeros(n), 0.0), GRID)
    assert r.lhs == 0 and r.rhs == 0 and r.passed


def test_sqrt_bound_gaussian_strict_slack():
    y = GRID.nodes
    n = GRID.size
    r = check_sqrt_weight_bound(InterpolationInstance(np.ones(n), np.ones(n), np.exp(-y * y), 0.0,
                                                      df=-2 * y * np.exp(-y * y)), GRID)
    assert r.passed and r.slack > 0.1 * r.rhs and r.lhs == pytest.approx(1.0)


def test_sqrt_bound_invariant_rejected():
    n = GRID.size
    w = np.exp(GRID.nodes)  # |w'| = w needs K >= 1
    with pytest.raises(ParameterError):
        check_sqrt_weight_bound(InterpolationInstance(w, np.ones(n), np.ones(n), 0.5, domega=w), GRID)


def test_interp_suite_1000():
    reps = interp_suite(1000, seed=0)
    assert len(reps) == 1000 and all(r.passed for r in reps)
    assert len({r.seed for r in reps}) == 1000


def test_interp_quadrature_converges():
    coarse, fine = make_grid(40, 4096, 0.0), make_grid(40, 8192, 0.0)
    for seed in range(5):
        a = check_sqrt_weight_bound(random_interp_instance(seed, coarse), coarse)
        b = check_sqrt_weight_bound(random_interp_instance(seed, fine), fine)
        assert a.rhs == pytest.approx(b.rhs, rel=5e-4)


def test_gn_q2_is_half():
    y = GRID.nodes
    rho = (1 + y * y) ** -1
    f = np.exp(-((y - 1) ** 2))
    r = check_weighted_gn(rho, f, 1 - 5 / 6, 2.0, GRID, df=-2 * (y - 1) * f)
    assert r.ratio == pytest.approx(0.5, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(c=st.floats(1e-3, 1e3), seed=st.integers(0, 1000), k=st.integers(0, 3))
def test_gn_scale_invariant(c, seed, k):
    g = make_grid(20, 1024, 0.0)
    m = random_mixture(np.random.default_rng(seed), nonneg=False)
    rho = (1 + g.nodes**2) ** -1
    q = (4.0, 6.0, 8.0, np.inf)[k]
    a = check_weighted_gn(rho, m(g.nodes), -5 / 6, q, g, df=m.derivative(g.nodes))
    b = check_weighted_gn(rho, c * m(g.nodes), -5 / 6, q, g, df=c * m.derivative(g.nodes))
    assert b.ratio == pytest.approx(a.ratio, rel=1e-9)


def test_gn_qinf_finite():
    y = GRID.nodes
    f = np.exp(-y * y)
    for s in gn_sigmas(5 / 3):
        r = check_weighted_gn((1 + y * y) ** -1, f, s, np.inf, GRID, df=-2 * y * f)
        assert np.isfinite(r.ratio) and 0 < r.ratio < 10


def test_gn_errors():
    y = GRID.nodes
    with pytest.raises(ParameterError):
        check_weighted_gn(np.ones_like(y), np.ones_like(y), 0.0, 4.0, GRID)
    with pytest.raises(ParameterError):
        check_weighted_gn(np.ones_like(y), np.ones_like(y), 1.0, 1.5, GRID)


def test_gn_suite_stable_under_refinement():
    t0 = time.perf_counter()
    suite = gn_suite(200, seed=0)
    assert time.perf_counter() - t0 < 30
    assert suite.stable and np.isfinite(suite.max_ratio)
    assert f"{suite.max_ratio:.3g}" == f"{suite.max_ratio_refined:.3g}"
    sig = set(gn_sigmas(5 / 3))
    assert {r.sigma for r in suite.reports} == sig and {r.q for r in suite.reports} == {4, 6, 8, np.inf}
    assert "no numeric constant" in suite.to_dict()["semantics"]


def test_mixture_frozen():
    m = Mixture((1.0,), (0.0,), (1.0,))
    assert m(np.array([0.0]))[0] == 1.0
