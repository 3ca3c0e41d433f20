import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bivfractal.covariance import (GenericModel, InvalidModelError, LocalExpansion, MaternModel,
                                   MaternParams, check_matern_validity, check_validity,
                                   component_graph_dimension, evaluate_cov, local_expansion,
                                   matern_correlation, matern_small_lag_coefficient,
                                   trajectory_dimension)
from bivfractal.specialfn import gamma

EQUALITY = MaternParams(0.2, 0.7, 0.45, rho=0.5)
STRICT = MaternParams(0.2, 0.7, 0.6, rho=0.5)


def _expansion(**kw):
    base = dict(sigma1_sq=1.0, sigma2_sq=1.0, rho=0.5, c11=1.0, c22=1.0, c12=1.0,
                alpha11=0.4, alpha22=1.4, alpha12=0.9, beta11=1.6, beta22=0.6, beta12=1.1)
    base.update(kw)
    return LocalExpansion(**base)


class TestMaternCorrelation:
    def test_zero_lag(self):
        assert matern_correlation(0.0, 0.7, 1.0) == 1.0

    @pytest.mark.parametrize("h", [0.1, 1.0, 3.0])
    @pytest.mark.parametrize("a", [0.5, 1.0, 2.5])
    def test_exponential(self, h, a):
        assert matern_correlation(h, 0.5, a) == pytest.approx(math.exp(-a * h), rel=1e-13)

    def test_even_and_bounded(self):
        h = np.linspace(0, 5, 51)
        r = matern_correlation(h, 0.3, 1.3)
        np.testing.assert_array_equal(r, matern_correlation(-h, 0.3, 1.3))
        assert np.all((r > 0) & (r <= 1))

    def test_small_lag_coefficient(self):
        b = gamma(0.7) / (2 ** 0.6 * gamma(1.3))
        h = 1e-4
        ratio = (1 - matern_correlation(h, 0.3, 1.0)) / h ** 0.6
        assert ratio == pytest.approx(b, rel=1e-3)

    def test_coefficient_oracle(self, oracles):
        for row in oracles["matern_b"]:
            assert matern_small_lag_coefficient(row["nu"]) == pytest.approx(float(row["b"]), rel=1e-12)

    def test_coefficient_scale(self):
        assert matern_small_lag_coefficient(0.3, 2.0) == pytest.approx(
            2.0 ** 0.6 * matern_small_lag_coefficient(0.3), rel=1e-14)

    @pytest.mark.parametrize("params", [EQUALITY, STRICT, MaternParams(0.3, 0.45, 0.45, a11=2.0, sigma1=1.5)])
    def test_ratio_all_components(self, params):
        model = MaternModel(params)
        e = model.expansion
        h = 1e-4
        c0 = model.entries(np.array(0.0))
        ch = model.entries(np.array(h))
        assert (c0[0] - ch[0]) / (e.c11 * h ** e.alpha11) == pytest.approx(1, abs=5e-3)
        assert (c0[1] - ch[1]) / (e.c22 * h ** e.alpha22) == pytest.approx(1, abs=5e-3)

    @pytest.mark.parametrize("t", [0.05, 0.1])
    @pytest.mark.parametrize("nu", [0.2, 0.45, 0.7])
    def test_fourth_derivative(self, t, nu):
        c = matern_small_lag_coefficient(nu)
        a = 2 * nu
        d = 2e-3
        k = np.array([1, -4, 6, -4, 1])
        vals = matern_correlation(t + d * np.arange(-2, 3), nu, 1.0)
        fd = float(k @ vals) / d ** 4
        want = -c * a * (a - 1) * (a - 2) * (a - 3) * t ** (a - 4)
        assert fd == pytest.approx(want, rel=0.1)


class TestLocalExpansion:
    def test_exponential(self):
        e = local_expansion(MaternParams(0.5, 0.5, 0.5))
        assert e.c11 == pytest.approx(1.0, rel=1e-14)
        assert e.alpha11 == 1.0
        assert e.beta11 == 1.0

    def test_equality_set(self):
        e = local_expansion(EQUALITY)
        assert (e.alpha11, e.alpha22, e.alpha12) == pytest.approx((0.4, 1.4, 0.9))
        assert e.is_equality_case
        assert e.c11 == pytest.approx(gamma(0.8) / (2 ** 0.4 * gamma(1.2)), rel=1e-14)

    def test_sigma_scaling(self):
        e = local_expansion(MaternParams(0.3, 0.6, 0.5, sigma1=2.0, sigma2=0.5))
        assert e.c11 == pytest.approx(4.0 * matern_small_lag_coefficient(0.3))
        assert e.c22 == pytest.approx(0.25 * matern_small_lag_coefficient(0.6))
        assert e.c12 == pytest.approx(matern_small_lag_coefficient(0.5))

    def test_invalid_raises(self):
        with pytest.raises(InvalidModelError):
            local_expansion(MaternParams(0.2, 0.7, 0.4))

    @pytest.mark.parametrize("field,val", [("alpha11", 2.0), ("alpha22", 0.0), ("c11", -1.0),
                                           ("rho", 1.0), ("beta12", 0.0)])
    def test_field_ranges(self, field, val):
        with pytest.raises(ValueError):
            _expansion(**{field: val})

    def test_swapped(self):
        e = local_expansion(MaternParams(0.3, 0.6, 0.5, sigma1=2.0))
        s = e.swapped()
        assert (s.alpha11, s.c11, s.sigma1_sq) == (e.alpha22, e.c22, e.sigma2_sq)
        assert s.swapped() == e


class TestCheckValidity:
    def test_equality_valid(self):
        assert check_validity(local_expansion(EQUALITY, validate=False))

    def test_strict_branch(self):
        assert check_validity(_expansion(alpha12=1.0))

    def test_boundary_excluded(self):
        rep = check_validity(_expansion(rho=0.999999, c12=1 / 0.999999))
        assert not rep
        assert "equality" in rep.reason

    def test_below_mean(self):
        rep = check_validity(_expansion(alpha12=0.8))
        assert not rep and "below" in rep.reason


class TestSpectralValidity:
    @pytest.mark.parametrize("params", [EQUALITY, STRICT])
    def test_paper_sets(self, params):
        assert check_matern_validity(params)

    def test_rho_zero(self):
        assert check_matern_validity(MaternParams(0.2, 0.9, 0.1, rho=0.0))

    def test_cross_below_mean(self):
        assert not check_matern_validity(MaternParams(0.2, 0.7, 0.4, rho=0.5))
        # with a weak coupling only the tail comparison catches it
        rep = check_matern_validity(MaternParams(0.2, 0.7, 0.449, rho=0.01))
        assert not rep
        assert rep.frequency == math.inf

    def test_pointwise_violation(self):
        # a rough, strongly correlated cross term at a short scale
        rep = check_matern_validity(MaternParams(0.5, 0.5, 0.5, a12=3.0, rho=0.95))
        assert not rep
        assert math.isfinite(rep.frequency)

    def test_grid_size(self):
        with pytest.raises(ValueError):
            check_matern_validity(EQUALITY, freq_grid_size=64)

    def test_model_rejects(self):
        with pytest.raises(InvalidModelError):
            MaternModel(MaternParams(0.5, 0.5, 0.5, a12=3.0, rho=0.95))


class TestDimension:
    @pytest.mark.parametrize("a,b,want", [(0.4, 1.4, 2.1), (0.8, 1.6, 1.75), (1.0, 1.0, 2.0)])
    def test_values(self, a, b, want):
        assert trajectory_dimension(a, b) == pytest.approx(want)
        assert trajectory_dimension(b, a) == pytest.approx(want)

    @given(st.floats(0.01, 1.99), st.floats(0.01, 1.99), st.floats(0.0, 0.5))
    def test_monotone(self, a, b, step):
        a2 = min(a + step, 1.99)
        assert trajectory_dimension(a2, b) <= trajectory_dimension(a, b) + 1e-12
        assert 1 < trajectory_dimension(a, b) < 3

    def test_component(self):
        assert component_graph_dimension(0.4) == pytest.approx(1.8)
        assert component_graph_dimension(1.4) == pytest.approx(1.3)
        assert component_graph_dimension(2 - 1e-6) == pytest.approx(1 + 5e-7)
        with pytest.raises(ValueError):
            component_graph_dimension(2.0)
        with pytest.raises(ValueError):
            trajectory_dimension(0.0, 1.0)


class TestModels:
    def test_zero_lag_matrix(self):
        m = MaternModel(MaternParams(0.3, 0.6, 0.5, sigma1=2.0, sigma2=0.5, rho=0.4))
        np.testing.assert_allclose(evaluate_cov(m, 0.0), [[4.0, 0.4], [0.4, 0.25]])

    def test_even(self):
        m = MaternModel(EQUALITY)
        t = np.array([0.01, 0.3, 2.0])
        for a, b in zip(m.entries(t), m.entries(-t)):
            np.testing.assert_array_equal(a, b)

    def test_cross_normalisation(self):
        m = MaternModel(EQUALITY)
        assert float(m.entries(np.array(1e-9))[2]) / 0.5 == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("params", [EQUALITY, MaternParams(0.5, 0.5, 0.5, rho=0.7)])
    def test_determinant_bound(self, params):
        m = MaternModel(params)
        e = m.expansion
        lead = 4 * (e.c11 * e.c22 - e.rho ** 2 * e.sigma1_sq * e.sigma2_sq * e.c12 ** 2)
        c0 = [float(v) for v in m.entries(np.array(0.0))]
        for h in (1e-2, 1e-3, 1e-4):
            ch = [float(v) for v in m.entries(np.array(h))]
            det = 2 * (c0[0] - ch[0]) * 2 * (c0[1] - ch[1]) - (2 * (c0[2] - ch[2])) ** 2
            assert det > 0
            assert det / h ** (e.alpha11 + e.alpha22) > 0.5 * lead

    def test_generic_matches_matern(self):
        p = MaternParams(0.5, 0.5, 0.5, rho=0.3)
        e = local_expansion(p)
        g = GenericModel(lambda t: np.exp(-np.abs(t)), lambda t: np.exp(-np.abs(t)),
                         lambda t: 0.3 * np.exp(-np.abs(t)), e)
        t = np.linspace(0, 2, 9)
        for a, b in zip(g.entries(t), MaternModel(p).entries(t)):
            np.testing.assert_allclose(a, b, rtol=1e-13)

    def test_generic_cross_check(self):
        e = _expansion(alpha11=1.0, alpha22=1.0, alpha12=1.0, c12=1.0, rho=0.3)
        with pytest.raises(InvalidModelError):
            GenericModel(lambda t: np.exp(-2 * np.abs(t)), lambda t: np.exp(-np.abs(t)),
                         lambda t: 0.3 * np.exp(-np.abs(t)), e)

    def test_swapped(self):
        m = MaternModel(MaternParams(0.3, 0.6, 0.5, sigma1=2.0))
        t = np.array([0.1, 0.5])
        a, b = m.entries(t), m.swapped().entries(t)
        np.testing.assert_allclose(a[0], b[1])
        np.testing.assert_allclose(a[2], b[2])

    def test_record_roundtrip(self):
        rec = EQUALITY.to_record()
        assert MaternParams.from_record(rec) == EQUALITY
        with pytest.raises(KeyError):
            MaternParams.from_record({**rec, "nu33": 1.0})
