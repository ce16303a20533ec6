import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from etpower.numerics import (
    NotPositiveDefiniteError, RngStream, binom_ci95, chisq1_sf, cholesky, nelder_mead,
)


def chisq1_tail_by_quadrature(t):
    density = lambda x: math.exp(-x / 2) / math.sqrt(2 * math.pi * x)
    val, _ = integrate.quad(density, t, np.inf, epsabs=1e-13, limit=200)
    return val


class TestChisq1:
    def test_zero_is_full_tail(self):
        assert chisq1_sf(0.0) == 1.0

    @pytest.mark.parametrize("t, expected", [(3.841459, 0.05), (6.634897, 0.01)])
    def test_critical_values_against_quadrature(self, t, expected):
        oracle = chisq1_tail_by_quadrature(t)
        assert oracle == pytest.approx(expected, abs=1e-4)
        assert chisq1_sf(t) == pytest.approx(oracle, abs=1e-10)
        assert chisq1_sf(t) == pytest.approx(expected, abs=1e-4)

    def test_accuracy_on_grid(self):
        for t in np.linspace(0, 50, 501):
            assert abs(chisq1_sf(t) - stats.chi2.sf(t, 1)) <= 1e-12

    def test_negative_raises(self):
        with pytest.raises(ValueError):
            chisq1_sf(-0.1)

    def test_strictly_decreasing_in_unit_interval(self):
        ts = np.linspace(0, 60, 1000)
        vals = [chisq1_sf(t) for t in ts]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert all(0 < v <= 1 for v in vals)


class TestWilson:
    def test_zero_successes(self):
        low, high = binom_ci95(0, 100)
        assert low == 0.0
        assert 0 < high < 0.05

    def test_false_positive_table_row(self):
        # 14.8% of 100,000 iterations, printed as 14.6-15.1%
        low, high = binom_ci95(14800, 100000)
        assert low == pytest.approx(0.1458, abs=5e-5)
        assert high == pytest.approx(0.1502, abs=5e-5)
        assert abs(low - 0.146) <= 0.001 and abs(high - 0.151) <= 0.001

    def test_symmetric_at_half(self):
        low, high = binom_ci95(50, 100)
        assert abs((0.5 - low) - (high - 0.5)) < 1e-12

    def test_n_zero_raises(self):
        with pytest.raises(ValueError):
            binom_ci95(0, 0)

    @given(st.integers(1, 5000).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))))
    @settings(max_examples=200, deadline=None)
    def test_contains_estimate_and_matches_reference(self, sn):
        from statsmodels.stats.proportion import proportion_confint

        s, n = sn
        low, high = binom_ci95(s, n)
        assert 0 <= low <= s / n <= high <= 1
        ref_low, ref_high = proportion_confint(s, n, alpha=0.05, method="wilson")
        assert low == pytest.approx(ref_low, abs=1e-9)
        assert high == pytest.approx(ref_high, abs=1e-9)


class TestNelderMead:
    def test_quadratic_bowl(self):
        res = nelder_mead(lambda x: (x[0] - 1) ** 2 + (x[1] + 2) ** 2, [0.0, 0.0],
                          tol=1e-14, max_evals=1000)
        assert res.converged
        np.testing.assert_allclose(res.x, [1.0, -2.0], atol=1e-5)

    def test_rosenbrock_with_restarts(self):
        rosen = lambda x: 100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2
        res = nelder_mead(rosen, [-1.2, 1.0], tol=1e-16, max_evals=5000, restarts=5)
        assert res.fun < 1e-8
        np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-3)

    @pytest.mark.parametrize("tol", [1e-3, 1e-6, 1e-9])
    def test_spread_below_tol_when_converged(self, tol):
        calls = []

        def f(x):
            v = (x[0] - 0.3) ** 2 + 3 * (x[1] - 0.7) ** 4
            calls.append(v)
            return v

        res = nelder_mead(f, [2.0, -1.0], tol=tol, max_evals=2000)
        assert res.converged
        # best value must be within tol of the true minimum 0 for this convex bowl
        assert res.fun < tol * 10 + 1e-6
        assert res.n_evals == len(calls)

    def test_budget_exhaustion_reports_not_converged(self):
        res = nelder_mead(lambda x: (x[0] - 5) ** 2 + (x[1] - 5) ** 2, [0, 0], tol=1e-30, max_evals=20)
        assert not res.converged
        assert res.n_evals <= 25

    def test_non_finite_start_raises(self):
        with pytest.raises(ValueError):
            nelder_mead(lambda x: math.nan, [0.0, 0.0])

    def test_one_dimensional(self):
        res = nelder_mead(lambda x: (x[0] - 3) ** 2, [0.0], tol=1e-12)
        assert res.x[0] == pytest.approx(3, abs=1e-5)


class TestCholesky:
    def test_identity(self):
        np.testing.assert_array_equal(cholesky(np.eye(5)).lower, np.eye(5))

    def test_two_by_two(self):
        L = cholesky([[4.0, 2.0], [2.0, 3.0]]).lower
        np.testing.assert_allclose(L, [[2, 0], [1, math.sqrt(2)]], atol=1e-15)

    @given(st.integers(1, 100), st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_random_spd_reconstruction(self, n, seed):
        rng = np.random.default_rng(seed)
        B = rng.normal(size=(n, n))
        A = B @ B.T + n * np.eye(n)
        ch = cholesky(A)
        L = ch.lower
        assert np.allclose(np.triu(L, 1), 0)
        assert np.linalg.norm(L @ L.T - A) / np.linalg.norm(A) <= 1e-9
        assert ch.logdet == pytest.approx(np.linalg.slogdet(A)[1], rel=1e-10)
        b = rng.normal(size=n)
        np.testing.assert_allclose(A @ ch.solve(b), b, atol=1e-8)

    def test_not_positive_definite_reports_pivot(self):
        A = np.diag([1.0, 2.0, -1.0, 4.0])
        with pytest.raises(NotPositiveDefiniteError) as err:
            cholesky(A)
        assert err.value.pivot == 2


class TestRngStream:
    def test_same_key_same_sequence(self):
        a = RngStream(123, 7).uniform(size=1000)
        b = RngStream(123, 7).uniform(size=1000)
        np.testing.assert_array_equal(a, b)

    def test_substream_matches_tuple_key(self):
        np.testing.assert_array_equal(RngStream(5, (3, 1)).normal(size=10),
                                      RngStream(5, 3).substream(1).normal(size=10))

    def test_disjoint_streams_uncorrelated(self):
        xs = [RngStream(2024, k).uniform(size=100_000) for k in range(4)]
        for i in range(4):
            for j in range(i + 1, 4):
                assert abs(np.corrcoef(xs[i], xs[j])[0, 1]) < 0.02

    def test_normal_moments(self):
        x = RngStream(1, 0).normal(3.0, 2.0, size=1_000_000)
        se = 2.0 / math.sqrt(x.size)
        assert abs(x.mean() - 3.0) < 4 * se
        assert abs(x.std() / 2.0 - 1) < 0.01

    def test_lognormal_is_exp_of_normal(self):
        a = RngStream(9, 2).lognormal(1.5, 0.4, size=1000)
        b = np.exp(RngStream(9, 2).normal(1.5, 0.4, size=1000))
        np.testing.assert_array_equal(a, b)

    def test_integers_inclusive(self):
        x = RngStream(0, 0).integers(20, 50, size=20_000)
        assert x.min() == 20 and x.max() == 50

    def test_bernoulli_frequency(self):
        x = RngStream(0, 1).bernoulli(0.3, size=200_000)
        se = math.sqrt(0.3 * 0.7 / x.size)
        assert abs(x.mean() - 0.3) < 3 * se
