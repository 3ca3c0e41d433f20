import json

import numpy as np
import pytest

import bivfractal.montecarlo as mc
from bivfractal.asymptotics import AsymptoticLaw
from bivfractal.covariance import GenericModel, LocalExpansion, MaternModel, MaternParams
from bivfractal.estimator import DegeneratePathError
from bivfractal.montecarlo import (ExperimentConfig, ReplicateError, fit_decay_rate,
                                   normality_diagnostics, run_experiment, standardized_zbar)

EXPO = MaternModel(MaternParams(0.5, 0.5, 0.5, rho=0.5))


def _independent_model():
    e = LocalExpansion(1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    f = lambda t: np.exp(-np.abs(t))
    return GenericModel(f, f, lambda t: 0.0 * t, e)


class TestConfig:
    def test_invariants(self):
        with pytest.raises(ValueError):
            ExperimentConfig(EXPO, (200, 100), R=10, m=5)
        with pytest.raises(ValueError):
            ExperimentConfig(EXPO, (100, 200), R=10, m=50)
        with pytest.raises(ValueError):
            ExperimentConfig(EXPO, (100,), R=1, m=5)
        with pytest.raises(ValueError):
            ExperimentConfig(EXPO, (100,), R=5, m=5, estimator_kind="mle")

    def test_scale(self):
        assert ExperimentConfig(EXPO, (100,), 5, 5).scale == "nu"
        np.testing.assert_allclose(ExperimentConfig(EXPO, (100,), 5, 5).truth, [0.5, 0.5])
        cfg = ExperimentConfig(_independent_model(), (100,), 5, 5)
        assert cfg.scale == "alpha"
        np.testing.assert_allclose(cfg.truth, [1.0, 1.0])


class TestFitDecayRate:
    def test_exact_inverse(self):
        n = np.array([200, 400, 600, 800, 1000])
        f = fit_decay_rate(zip(n, 7.0 / n))
        assert f.slope == pytest.approx(-1.0, abs=1e-12)
        assert f.r_squared == pytest.approx(1.0, abs=1e-12)
        assert np.exp(f.intercept) == pytest.approx(7.0, rel=1e-10)

    def test_exact_three_halves(self):
        n = np.array([100.0, 300.0, 900.0])
        assert fit_decay_rate(zip(n, 3 * n ** -1.5)).slope == pytest.approx(-1.5, abs=1e-12)

    def test_floor(self):
        pts = [(100, 1e-2), (200, 0.0), (400, 2.5e-3), (800, 1.25e-3)]
        f = fit_decay_rate(pts)
        assert f.dropped == (200.0,)
        assert f.slope == pytest.approx(-1.0, abs=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            fit_decay_rate([(1, 1.0), (2, -1.0), (3, 1.0)])
        with pytest.raises(ValueError):
            fit_decay_rate([(1, 1.0), (2, 0.5)])


class TestRunExperiment:
    def test_deterministic_bytes(self):
        cfg = ExperimentConfig(EXPO, (64, 128, 256), R=2, m=4, estimator_kind="gls", base_seed=99)
        a, b = run_experiment(cfg), run_experiment(cfg)
        assert a.to_csv() == b.to_csv()
        assert a.to_json() == b.to_json()
        json.loads(a.to_json())

    def test_csv_layout(self):
        cfg = ExperimentConfig(EXPO, (64,), R=3, m=4, estimator_kind="ols")
        rows = run_experiment(cfg).to_csv().strip().split("\n")
        assert rows[0] == "n,metric,component,value"
        metrics = {r.split(",")[1] for r in rows[1:]}
        assert metrics == {"included", "excluded", "mean", "bias", "var", "ci_low", "ci_high", "cross_cov"}

    def test_summary_invariants(self):
        cfg = ExperimentConfig(EXPO, (64, 128), R=20, m=4, estimator_kind="ols")
        s = run_experiment(cfg)
        for x in s.per_n:
            assert np.all(x.var >= 0)
            assert np.all((x.ci_low <= x.mean) & (x.mean <= x.ci_high))
            assert x.included + x.excluded == 20
            np.testing.assert_allclose(x.bias, x.mean - 0.5)

    def test_exclusions(self, monkeypatch):
        real = mc.estimate
        calls = {"k": 0}

        def flaky(path, m, kind):
            calls["k"] += 1
            if calls["k"] % 4 == 0:
                raise DegeneratePathError("constant", component=1)
            return real(path, m, kind)

        monkeypatch.setattr(mc, "estimate", flaky)
        cfg = ExperimentConfig(EXPO, (64,), R=12, m=4, estimator_kind="ols")
        s = run_experiment(cfg).per_n[0]
        assert (s.included, s.excluded) == (9, 3)

    def test_error_context(self, monkeypatch):
        def broken(path, m, kind):
            raise FloatingPointError("boom")

        monkeypatch.setattr(mc, "estimate", broken)
        cfg = ExperimentConfig(EXPO, (64,), R=3, m=4)
        with pytest.raises(ReplicateError, match=r"n=64, replicate=0"):
            run_experiment(cfg)

    def test_streams_per_n(self):
        # the n=128 stream does not depend on which other n values are run
        a = run_experiment(ExperimentConfig(EXPO, (64, 128), R=4, m=4, estimator_kind="ols"))
        b = run_experiment(ExperimentConfig(EXPO, (128,), R=4, m=4, estimator_kind="ols"))
        np.testing.assert_array_equal(a.per_n[1].estimates, b.per_n[0].estimates)

    def test_callback(self):
        seen = []
        run_experiment(ExperimentConfig(EXPO, (64, 96), R=2, m=4), on_n_done=lambda s: seen.append(s.n))
        assert seen == [64, 96]

    def test_independent_components(self):
        cfg = ExperimentConfig(_independent_model(), (256,), R=300, m=5, estimator_kind="ols", base_seed=3)
        s = run_experiment(cfg).per_n[0]
        se = np.sqrt(s.var[0] * s.var[1] / s.included)
        assert abs(s.cross_cov) <= 3 * se

    def test_bias_shrinks(self):
        cfg = ExperimentConfig(EXPO, (250, 1000), R=500, m=5, estimator_kind="ols", base_seed=12)
        s = run_experiment(cfg)
        assert abs(s.per_n[1].bias[0]) < abs(s.per_n[0].bias[0])


class TestDiagnostics:
    def test_synthetic_normals(self):
        rng = np.random.default_rng(0)
        R = 1000
        est = rng.standard_normal((R, 2)) / np.sqrt(100.0) + [0.4, 1.4]
        rep = normality_diagnostics(est, AsymptoticLaw(np.eye(2)), (0.4, 1.4), n=100)
        assert min(rep.ks_pvalue) > 0.001
        assert rep.cov_max_deviation <= 3 * np.sqrt(2 / R)
        assert abs(rep.raw_correlation) < 0.1

    def test_whitening(self):
        rng = np.random.default_rng(1)
        cov = np.array([[2.0, 0.8], [0.8, 1.0]])
        z = rng.multivariate_normal([0, 0], cov, size=4000)
        rep = normality_diagnostics(z, AsymptoticLaw(cov), (0, 0), n=1)
        assert rep.cov_max_deviation < 0.1
        assert rep.raw_correlation == pytest.approx(0.8 / np.sqrt(2), abs=0.05)

    def test_errors(self):
        with pytest.raises(np.linalg.LinAlgError):
            normality_diagnostics(np.zeros((300, 2)), AsymptoticLaw(np.ones((2, 2))), (0, 0), 10)
        with pytest.raises(ValueError):
            normality_diagnostics(np.zeros((100, 2)), AsymptoticLaw(np.eye(2)), (0, 0), 10)


class TestStandardizedZbar:
    def test_moments(self):
        z = standardized_zbar(EXPO, 128, 2, 400, base_seed=1)
        assert z.shape == (400, 4)
        assert np.all(np.abs(z.mean(axis=0)) < 4 / np.sqrt(400))
        np.testing.assert_allclose(z.std(axis=0), 1.0, atol=0.15)
