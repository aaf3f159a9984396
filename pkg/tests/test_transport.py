import itertools

import numpy as np
import pytest
from scipy.optimize import linprog
from scipy.special import ndtr

from swest.exceptions import DimensionMismatch, NoConvergence, SizeCapExceeded, SizeMismatch
from swest.measures import ProjectionSet
from swest.models import GaussianParams, sample_model
from swest.sampling import RngStream, sample_projections
from swest.transport import (
    SinkhornConfig,
    expected_sw,
    sinkhorn_distance,
    _sinkhorn_log,
    _sinkhorn_scaling,
    sinkhorn_plan,
    sliced_wasserstein,
    sw_distance,
    w1d_cdf_mc,
    w1d_exact,
    w1d_quantile_mc,
    w_exact_assignment,
)


def lp_wasserstein(x, y, p):
    """W_p between uniform empirical measures by linear programming."""
    x = np.atleast_2d(np.asarray(x, dtype=float).T).T
    y = np.atleast_2d(np.asarray(y, dtype=float).T).T
    n, m = len(x), len(y)
    cost = np.linalg.norm(x[:, None, :] - y[None, :, :], axis=2) ** p
    A = np.zeros((n + m, n * m))
    for i in range(n):
        A[i, i * m:(i + 1) * m] = 1
    for j in range(m):
        A[n + j, j::m] = 1
    b = np.concatenate([np.full(n, 1 / n), np.full(m, 1 / m)])
    res = linprog(cost.ravel(), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    return res.fun ** (1 / p)


def brute_force_assignment(X, Y, p):
    X, Y = np.asarray(X, float), np.asarray(Y, float)
    n = len(X)
    best = min(
        sum(np.linalg.norm(X[i] - Y[s[i]]) ** p for i in range(n)) for s in itertools.permutations(range(n))
    )
    return (best / n) ** (1 / p)


class TestW1dExact:
    def test_two_point_pairing(self):
        assert w1d_exact([0, 2], [1, 3], 1) == pytest.approx(1, abs=1e-15)

    @pytest.mark.parametrize("p", [1, 2, 3.5])
    def test_identical(self, p):
        assert w1d_exact([5, 7, 9], [5, 7, 9], p) == 0

    def test_single_atoms(self):
        assert w1d_exact([0], [3], 2) == pytest.approx(3)

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_unequal_sizes_against_lp(self, rng, p):
        for _ in range(10):
            n, m = rng.integers(1, 9, size=2)
            a, b = rng.normal(size=n), rng.normal(1, 2, size=m)
            assert w1d_exact(a, b, p) == pytest.approx(lp_wasserstein(a, b, p), rel=1e-7, abs=1e-9)

    def test_order_invariant(self, rng):
        a, b = rng.normal(size=7), rng.normal(size=5)
        assert w1d_exact(a, b) == w1d_exact(np.sort(a), np.sort(b)[::-1])


class TestW1dMonteCarlo:
    def test_identical_is_zero(self, rng):
        a = rng.normal(size=20)
        assert w1d_quantile_mc(a, a, 2, 100, RngStream(0)) == 0

    @pytest.mark.parametrize("K", [1, 10, 1000])
    def test_single_atoms(self, K):
        assert w1d_quantile_mc([0.0], [-2.5], 2, K, RngStream(0)) == pytest.approx(2.5)

    def test_close_to_exact(self):
        g = RngStream(11).generator
        a, b = np.sort(g.normal(size=64)), np.sort(g.normal(2, 1, size=64))
        approx = w1d_quantile_mc(a, b, 2, 10_000, RngStream(12))
        assert abs(approx / w1d_exact(a, b, 2) - 1) <= 0.03

    def test_error_rate_is_root_k(self):
        # the Monte Carlo target is the integral of the interpolated quantile gap
        g = RngStream(13).generator
        a, b = np.sort(g.normal(size=64)), np.sort(g.normal(2, 1, size=50))
        t = (np.arange(2_000_000) + 0.5) / 2_000_000
        target = np.mean((np.interp(t, np.linspace(0, 1, 64), a) - np.interp(t, np.linspace(0, 1, 50), b)) ** 2)
        Ks = [100, 1000, 10_000, 100_000]
        errs = []
        for K in Ks:
            errs.append(np.mean([abs(w1d_quantile_mc(a, b, 2, K, RngStream(s, K)) ** 2 - target)
                                 for s in range(100)]))
        slope = np.polyfit(np.log(Ks), np.log(errs), 1)[0]
        assert -0.7 <= slope <= -0.3
        assert abs(np.sqrt(target) / w1d_exact(a, b, 2) - 1) < 0.03

    def test_cdf_point_mass(self):
        zero = lambda K, g: np.zeros(K)
        step = lambda s: np.where(s < 0, 0.0, 1.0)
        assert w1d_cdf_mc(zero, step, [0.0], 2, 100, RngStream(0)) == 0

    def test_cdf_gaussian_vs_sample(self):
        b = RngStream(14).standard_normal(10_000)
        val = w1d_cdf_mc(lambda K, g: g.standard_normal(K), ndtr, b, 2, 10_000, RngStream(15))
        assert val <= 0.1

    @pytest.mark.parametrize("c", [0.0, 1.0, -3.0])
    def test_cdf_singleton(self, c):
        val = w1d_cdf_mc(lambda K, g: g.standard_normal(K), ndtr, [c], 2, 10_000, RngStream(16))
        assert abs(val / np.sqrt(1 + c * c) - 1) <= 0.05


class TestSlicedWasserstein:
    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_one_dimension_collapse(self, rng, p):
        x, y = rng.normal(size=(9, 1)), rng.normal(size=(9, 1))
        for sign in (1.0, -1.0):
            proj = ProjectionSet([[sign]])
            assert sw_distance(x, y, proj, p) == pytest.approx(w1d_exact(x[:, 0], y[:, 0], p), abs=1e-12)

    def test_self_distance(self, rng):
        x = rng.normal(size=(12, 3))
        assert sw_distance(x, x, sample_projections(3, 20, RngStream(0))) == 0

    def test_dominated_by_wasserstein(self):
        g = RngStream(17).generator
        x, y = g.normal(size=(8, 3)), g.normal(size=(8, 3))
        sw = sw_distance(x, y, sample_projections(3, 500, RngStream(18)), 2)
        assert sw <= w_exact_assignment(x, y, 2) + 1e-9

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatch):
            sw_distance(rng.normal(size=(3, 2)), rng.normal(size=(3, 3)), np.eye(2))

    def test_random_projection_wrapper(self, rng):
        x, y = rng.normal(size=(10, 2)), rng.normal(size=(11, 2))
        a = sliced_wasserstein(x, y, 50, 2, RngStream(3))
        b = sw_distance(x, y, sample_projections(2, 50, RngStream(3)), 2)
        assert a == b


class TestExpectedSw:
    def test_point_mass(self):
        theta = np.array([1.0, -2.0])
        sampler = lambda th, m, g: np.tile(th, (m, 1))
        assert expected_sw(sampler, theta, np.tile(theta, (5, 1)), 3, 5, RngStream(0)) == 0

    def test_gaussian_self_distance(self):
        truth = GaussianParams(np.zeros(1), 1.0)
        y = sample_model(truth, 1000, RngStream(19))
        sampler = lambda th, m, g: sample_model(th, m, g)
        assert expected_sw(sampler, truth, y, 10, 1000, RngStream(20)) <= 0.2


class TestExactAssignment:
    def test_same_set(self):
        for p in (1, 2, 3):
            assert w_exact_assignment([[0.0], [2.0]], [[2.0], [0.0]], p) == 0

    def test_single_pair(self):
        assert w_exact_assignment([[0.0, 0.0]], [[3.0, 4.0]], 1) == pytest.approx(5)

    @pytest.mark.parametrize("p", [1, 2])
    def test_brute_force(self, p):
        g = RngStream(21).generator
        for _ in range(5):
            x, y = g.integers(-5, 6, size=(5, 2)), g.integers(-5, 6, size=(5, 2))
            assert w_exact_assignment(x, y, p) == pytest.approx(brute_force_assignment(x, y, p), rel=1e-12)

    def test_unequal_sizes(self):
        with pytest.raises(SizeMismatch):
            w_exact_assignment(np.zeros((3, 1)), np.zeros((4, 1)))

    def test_cap(self):
        with pytest.raises(SizeCapExceeded):
            w_exact_assignment(np.zeros((10, 1)), np.zeros((10, 1)), cap=5)


class TestSinkhorn:
    def test_self_distance_small(self):
        x = RngStream(22).standard_normal((30, 2))
        cfg = SinkhornConfig(epsilon=0.01, epsilon_scale="median")
        diameter = np.max(np.linalg.norm(x[:, None] - x[None], axis=2))
        assert sinkhorn_distance(x, x, 2, cfg) <= 0.05 * diameter

    def test_close_to_exact(self):
        g = RngStream(23).generator
        x, y = g.normal(size=(8, 2)), g.normal(1, 1, size=(8, 2))
        approx = sinkhorn_distance(x, y, 2, SinkhornConfig(epsilon=0.01, epsilon_scale="max"))
        assert abs(approx / w_exact_assignment(x, y, 2) - 1) <= 0.05

    def test_zero_cost(self):
        x = np.ones((4, 2))
        assert sinkhorn_distance(x, x, 2) == 0

    def test_marginals(self):
        g = RngStream(24).generator
        cost = g.uniform(size=(6, 9))
        plan, violation, _ = sinkhorn_plan(cost, 0.1, 1000, 1e-10)
        np.testing.assert_allclose(plan.sum(axis=1), 1 / 6, atol=1e-9)
        np.testing.assert_allclose(plan.sum(axis=0), 1 / 9, atol=1e-9)

    def test_no_convergence(self):
        g = RngStream(25).generator
        x, y = g.normal(size=(20, 2)), g.normal(size=(20, 2))
        cfg = SinkhornConfig(epsilon=1e-3, max_iter=2, tol=1e-12)
        with pytest.raises(NoConvergence) as info:
            sinkhorn_distance(x, y, 2, cfg)
        assert info.value.n_iter == 2
        relaxed = SinkhornConfig(epsilon=1e-3, max_iter=2, tol=1e-12, strict=False)
        assert np.isfinite(sinkhorn_distance(x, y, 2, relaxed))

    def test_scaling_matches_log_domain(self):
        g = RngStream(26).generator
        kernel = -g.uniform(0, 20, size=(12, 7))
        fast = _sinkhorn_scaling(kernel, 500, 1e-8)
        slow = _sinkhorn_log(kernel, 500, 1e-8)
        assert fast[2] == slow[2]
        np.testing.assert_allclose(fast[0], slow[0], rtol=1e-10, atol=1e-15)

    def test_outlier_row_and_tiny_epsilon(self):
        g = RngStream(27).generator
        x, y = g.normal(size=(15, 2)), g.normal(size=(10, 2))
        x[0] = 1e3
        cost = ((x[:, None] - y[None]) ** 2).sum(axis=2)
        plan, violation, _ = sinkhorn_plan(cost, 1.0, 1000, 1e-9)
        assert violation < 1e-9
        np.testing.assert_allclose(plan.sum(axis=1), 1 / 15, atol=1e-9)
        # the scalings overflow here, so the log-domain recursion takes over
        plan, _, n_iter = sinkhorn_plan(cost, 1e-4, 50, 1e-9)
        assert n_iter == 50 and np.all(np.isfinite(plan))
        np.testing.assert_allclose(plan.sum(axis=0), 1 / 10, atol=1e-12)
