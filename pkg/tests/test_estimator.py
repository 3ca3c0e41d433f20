import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bivfractal.covariance import MaternModel, MaternParams, trajectory_dimension
from bivfractal.estimator import (DegeneratePathError, FilterBank, WeightVector, default_m,
                                  dilation_pair_sums, estimate, estimate_alpha, estimate_joint,
                                  filtered_increments, gls_omega, gls_weights, increment_stats,
                                  ols_weights, zbar)
from bivfractal.simulate import SamplePath, SeedSpec, factorize, simulate_ensemble, simulate_path

EQUALITY = MaternModel(MaternParams(0.2, 0.7, 0.45, rho=0.5))


def _path(f1, f2=None, n=200):
    t = np.arange(1, n + 1) / n
    return SamplePath(f1(t), (f2 or f1)(t))


@pytest.fixture(scope="module")
def eq_path():
    return simulate_path(EQUALITY, 1000, SeedSpec(21))


class TestFilter:
    @given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
    def test_affine_annihilated(self, a, b):
        p = _path(lambda t: a + b * t)
        for u in (1, 7, 40):
            d = filtered_increments(p, u, 1)
            assert np.max(np.abs(d)) <= 1e-12 * max(1.0, abs(a), abs(b))

    def test_quadratic(self):
        p = _path(lambda t: t ** 2, n=10)
        np.testing.assert_allclose(filtered_increments(p, 1, 1), np.full(8, 0.02), rtol=1e-12)
        np.testing.assert_allclose(filtered_increments(p, 2, 2), np.full(6, 2 * 4 / 100), rtol=1e-12)

    def test_length_and_domain(self):
        p = _path(np.sin, n=20)
        assert filtered_increments(p, 3, 1).size == 14
        with pytest.raises(ValueError):
            filtered_increments(p, 10, 1)

    def test_filterbank(self):
        with pytest.raises(ValueError):
            FilterBank(1)
        with pytest.raises(ValueError):
            FilterBank(3, coeffs=(1.0, -1.0, 1.0))
        with pytest.raises(ValueError):
            FilterBank(50).check_grid(100)

    def test_default_m(self):
        assert default_m(1000) == 50
        assert default_m(200) == 20
        assert default_m(12) == 2


class TestZbar:
    def test_zero_path(self):
        assert zbar(_path(lambda t: 0 * t), 2, 1) == 0.0

    @pytest.mark.parametrize("lam", [0.1, 3.0, 10.0])
    def test_homogeneity(self, eq_path, lam):
        for u in (1, 5, 20):
            assert zbar(eq_path.scaled(lam), u, 2) == pytest.approx(lam ** 2 * zbar(eq_path, u, 2), rel=1e-14)

    def test_divisor(self, eq_path):
        d = filtered_increments(eq_path, 4, 1)
        assert zbar(eq_path, 4, 1) == pytest.approx(np.mean(d ** 2), rel=1e-15)

    def test_stats_shape(self, eq_path):
        s = increment_stats(eq_path, 10)
        assert s.zbar.shape == (2, 10)
        np.testing.assert_array_equal(s.counts, 1000 - 2 * np.arange(1, 11))
        assert np.all(s.zbar > 0)

    def test_expected_value(self):
        # E zbar(u) at n=512 against c (8 - 2^(alpha+1)) u^alpha n^-alpha
        n, R = 512, 2000
        model = MaternModel(MaternParams(0.5, 0.3, 0.5, rho=0.0))
        paths = simulate_ensemble(model, n, R, base_seed=5)
        e = model.expansion
        for u in (1, 4):
            z = np.array([zbar(p, u, 1) for p in paths])
            want = e.c11 * (8 - 2 ** (e.alpha11 + 1)) * u ** e.alpha11 * n ** -e.alpha11
            se = z.std(ddof=1) / np.sqrt(R)
            # remainder terms of relative size O(u/n) are within the band at n=512
            assert abs(z.mean() - want) <= 3 * se + 2 * u / n * want


class TestWeights:
    def test_ols_m2(self):
        np.testing.assert_allclose(ols_weights(2).L, [-1 / np.log(2), 1 / np.log(2)], rtol=1e-15)

    def test_ols_m3_lstsq(self):
        G = np.column_stack([np.ones(3), np.log([1, 2, 3])])
        want = np.linalg.lstsq(G, np.eye(3), rcond=None)[0][1]
        np.testing.assert_allclose(ols_weights(3).L, want, rtol=1e-13)

    @pytest.mark.parametrize("m", range(2, 51))
    def test_constraints(self, m):
        for w in (ols_weights(m), gls_weights(m, max(1000, 4 * m), 0.35)):
            s0, s1 = w.constraint_residuals()
            assert abs(s0) <= 1e-10 and abs(s1) <= 1e-10

    def test_gls_m2(self):
        np.testing.assert_allclose(gls_weights(2, 100, 0.3).L, ols_weights(2).L, rtol=1e-12)

    def test_omega_spd(self):
        W = gls_omega(5, 200, 0.35)
        np.testing.assert_allclose(W, W.T, rtol=1e-14)
        assert np.all(np.linalg.eigvalsh(W) > 0)

    def test_omega_brute_force(self):
        m, n, nu = 3, 30, 0.35
        a = {-1: 1.0, 0: -2.0, 1: 1.0}

        def g(d, u, v):
            return sum(a[j] * a[k] * abs(d + k * v - j * u) ** (2 * nu)
                       for j, k in itertools.product(a, a))

        s0 = sum(a[j] * a[k] * abs(k - j) ** (2 * nu) for j, k in itertools.product(a, a))
        W = np.empty((m, m))
        for u in range(1, m + 1):
            for v in range(1, m + 1):
                tot = sum(g(h - l, u, v) ** 2 for h in range(u, n - u + 1) for l in range(v, n - v + 1))
                W[u - 1, v - 1] = 2 * tot / ((n - 2 * u + 1) * (n - 2 * v + 1) * s0 ** 2
                                             * u ** (2 * nu) * v ** (2 * nu))
        np.testing.assert_allclose(gls_omega(m, n, nu), W, rtol=1e-12)

    def test_pair_sums_even_check(self):
        # exclusive end drops the last index of each range
        S_in = dilation_pair_sums(lambda x: np.exp(-np.abs(x) / 5.0), 20, 2, inclusive_end=True)
        S_ex = dilation_pair_sums(lambda x: np.exp(-np.abs(x) / 5.0), 20, 2, inclusive_end=False)
        assert np.all(S_in > S_ex)

    def test_weight_validation(self):
        with pytest.raises(ValueError):
            WeightVector(np.array([1.0, 1.0]))


class TestEstimate:
    @pytest.mark.parametrize("lam", [0.1, 10.0])
    def test_scale_invariance(self, eq_path, lam):
        w = ols_weights(20)
        for c in (1, 2):
            assert estimate_alpha(eq_path.scaled(lam), c, w) == pytest.approx(
                estimate_alpha(eq_path, c, w), abs=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-50, 50), st.floats(-50, 50))
    def test_affine_invariance(self, eq_path, a, b):
        t = eq_path.times
        shifted = SamplePath(eq_path.x1 + a + b * t, eq_path.x2 - a + 2 * b * t)
        w = ols_weights(10)
        for c in (1, 2):
            assert estimate_alpha(shifted, c, w) == pytest.approx(estimate_alpha(eq_path, c, w), abs=1e-10)

    def test_prefactor_irrelevant(self, eq_path):
        w = ols_weights(15)
        z = increment_stats(eq_path, 15).zbar[0]
        assert w.L @ np.log(z * 1000 ** 0.4) == pytest.approx(w.L @ np.log(z), abs=1e-12)

    def test_degenerate(self):
        p = _path(lambda t: 3 + 2 * t, np.sin)
        with pytest.raises(DegeneratePathError) as err:
            estimate(p, 5)
        assert err.value.component == 1

    def test_swap(self, eq_path):
        a = estimate(eq_path, 20, "gls")
        b = estimate(eq_path.swapped(), 20, "gls")
        assert (a.alpha11_hat, a.alpha22_hat) == pytest.approx((b.alpha22_hat, b.alpha11_hat), abs=1e-12)

    def test_record(self, eq_path):
        est = estimate(eq_path)
        rec = est.to_record()
        assert set(rec) == {"n", "m", "estimator_kind", "alpha11_hat", "alpha22_hat", "nu11_hat",
                            "nu22_hat", "dim_hat", "zbar"}
        assert rec["nu11_hat"] == rec["alpha11_hat"] / 2
        assert rec["m"] == 50 and rec["estimator_kind"] == "ols"

    def test_dim_clamp(self, eq_path):
        w = ols_weights(5)
        est = estimate_joint(eq_path, w, w)
        est = type(est)(est.n, est.m, "ols", -0.3, 2.4, est.zbar)
        assert est.dim_hat == pytest.approx(trajectory_dimension(0.02, 1.98))

    def test_bad_kind(self, eq_path):
        with pytest.raises(ValueError):
            estimate(eq_path, 5, "wls")

    def test_exponential_consistency(self):
        # univariate exp(-|t|) draws: alpha_hat close to 1, and closer at larger n
        model = MaternModel(MaternParams(0.5, 0.5, 0.5, rho=0.0))
        err = {}
        for n in (250, 1000):
            f = factorize(model, n)
            est = np.array([estimate(p, 5).alpha11_hat
                            for p in simulate_ensemble(model, n, 500, base_seed=8, factor=f)])
            err[n] = abs(est.mean() - 1.0)
            if n == 1000:
                assert err[n] <= 3 * est.std(ddof=1) / np.sqrt(500)
        assert err[1000] < err[250]

    def test_equality_means(self):
        f = factorize(EQUALITY, 1000)
        ests = [estimate(p, 50, "gls") for p in simulate_ensemble(EQUALITY, 1000, 60, base_seed=4, factor=f)]
        nu = np.array([[e.nu11_hat, e.nu22_hat] for e in ests])
        se = nu.std(axis=0, ddof=1) / np.sqrt(len(ests))
        assert np.all(np.abs(nu.mean(axis=0) - [0.2, 0.7]) <= 4 * se + 0.005)
        dims = np.array([e.dim_hat for e in ests])
        assert abs(dims.mean() - 2.1) <= 0.05
