"""Replicated simulation and estimation over a grid of sample sizes.

For each ``n`` the joint covariance is factorised once, ``R`` paths are
drawn from streams keyed by ``(base_seed, n, replicate)`` and every path is
estimated independently, so results do not depend on evaluation order.
Summaries report bias, variance and cross covariance of the estimates and
fitted log-log decay slopes.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import stats

from .asymptotics import AsymptoticLaw, expected_zbar, zbar_covariance
from .covariance import CovarianceModel, MaternModel
from .estimator import DegeneratePathError, estimate, increment_stats
from .simulate import CovarianceFactor, SamplePath, SeedSpec, factorize

__all__ = [
    "ReplicateError",
    "ExperimentConfig",
    "NSummary",
    "RateFit",
    "ExperimentSummary",
    "run_experiment",
    "fit_decay_rate",
    "DiagnosticsReport",
    "normality_diagnostics",
    "standardized_zbar",
    "RATE_FLOOR",
    "CI_Z",
]

log = logging.getLogger(__name__)

RATE_FLOOR = 1e-15
CI_Z = 1.96
SERIES = ("abs_bias_1", "abs_bias_2", "var_1", "var_2", "abs_cross_cov")


class ReplicateError(RuntimeError):
    """A simulation or estimation failure, tagged with where it happened."""

    def __init__(self, n, replicate, cause):
        where = f"n={n}" if replicate is None else f"n={n}, replicate={replicate}"
        super().__init__(f"{where}: {type(cause).__name__}: {cause}")
        self.n = n
        self.replicate = replicate
        self.cause = cause


@dataclass(frozen=True)
class ExperimentConfig:
    """Design of one Monte Carlo experiment.

    Estimates are summarised on the ``nu = alpha/2`` scale for Matérn
    models and on the ``alpha`` scale otherwise.
    """

    model: CovarianceModel
    n_list: tuple
    R: int
    m: int
    estimator_kind: str = "gls"
    base_seed: int = 0
    tol: float = 1e-10
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "estimator_kind", self.estimator_kind.lower())
        if not self.n_list:
            raise ValueError("n_list must not be empty")
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ValueError(f"n_list must be strictly increasing, got {self.n_list}")
        if 2 * self.m >= self.n_list[0]:
            raise ValueError(f"need 2m < min(n_list); m={self.m}, min n={self.n_list[0]}")
        if self.m < 2:
            raise ValueError("m must be at least 2")
        if self.R < 2:
            raise ValueError("R must be at least 2")
        if self.estimator_kind not in ("ols", "gls"):
            raise ValueError(f"estimator_kind must be 'ols' or 'gls', got {self.estimator_kind!r}")

    @property
    def scale(self) -> str:
        return "nu" if isinstance(self.model, MaternModel) else "alpha"

    @property
    def truth(self) -> np.ndarray:
        e = self.model.expansion
        t = np.array([e.alpha11, e.alpha22])
        return t / 2 if self.scale == "nu" else t

    def to_record(self) -> dict:
        return {
            "label": self.label,
            "model": self.model.describe(),
            "n_list": list(self.n_list),
            "R": self.R,
            "m": self.m,
            "estimator_kind": self.estimator_kind,
            "base_seed": self.base_seed,
            "tol": self.tol,
            "scale": self.scale,
        }


@dataclass(frozen=True)
class NSummary:
    """Aggregates of the included replicates at one ``n``."""

    n: int
    included: int
    excluded: int
    mean: np.ndarray
    bias: np.ndarray
    var: np.ndarray
    cross_cov: float
    ci_low: np.ndarray
    ci_high: np.ndarray
    estimates: np.ndarray = field(repr=False, compare=False)

    def rows(self):
        yield self.n, "included", "", float(self.included)
        yield self.n, "excluded", "", float(self.excluded)
        for name in ("mean", "bias", "var", "ci_low", "ci_high"):
            vals = getattr(self, name)
            for k in (0, 1):
                yield self.n, name, str(k + 1), float(vals[k])
        yield self.n, "cross_cov", "12", float(self.cross_cov)


def _summarize(n: int, est: np.ndarray, excluded: int, truth: np.ndarray) -> NSummary:
    if est.shape[0] < 2:
        raise ValueError(f"n={n}: fewer than two usable replicates")
    mean = est.mean(axis=0)
    cov = np.cov(est, rowvar=False, ddof=1)
    var = np.diag(cov).copy()
    sd = np.sqrt(var)
    return NSummary(n=n, included=est.shape[0], excluded=excluded, mean=mean,
                    bias=mean - truth, var=var, cross_cov=float(cov[0, 1]),
                    ci_low=mean - CI_Z * sd, ci_high=mean + CI_Z * sd, estimates=est)


class RateFit(NamedTuple):
    slope: float
    intercept: float
    r_squared: float
    dropped: tuple = ()


def fit_decay_rate(points: Sequence, floor: float = RATE_FLOOR) -> RateFit:
    """Least-squares fit of ``ln(value)`` on ``ln(n)``.

    Values are expected to be positive (pass absolute values). Values at or
    below ``floor`` are dropped and listed in ``dropped``; at least three
    points must remain.
    """
    pts = [(float(n), float(v)) for n, v in points]
    if any(not np.isfinite(v) or v < 0 for _, v in pts):
        raise ValueError("decay-rate fit needs finite non-negative values")
    kept = [(n, v) for n, v in pts if v > floor]
    dropped = tuple(n for n, v in pts if v <= floor)
    if len(kept) < 3:
        raise ValueError(f"need at least 3 points above {floor:g}, got {len(kept)}")
    x = np.log([n for n, _ in kept])
    y = np.log([v for _, v in kept])
    res = stats.linregress(x, y)
    return RateFit(float(res.slope), float(res.intercept), float(res.rvalue ** 2), dropped)


@dataclass
class ExperimentSummary:
    config: ExperimentConfig
    per_n: list

    @property
    def n_values(self) -> np.ndarray:
        return np.array([s.n for s in self.per_n])

    def series(self, name: str) -> np.ndarray:
        get = {
            "abs_bias_1": lambda s: abs(s.bias[0]),
            "abs_bias_2": lambda s: abs(s.bias[1]),
            "var_1": lambda s: s.var[0],
            "var_2": lambda s: s.var[1],
            "abs_cross_cov": lambda s: abs(s.cross_cov),
        }[name]
        return np.array([get(s) for s in self.per_n])

    def slopes(self) -> dict:
        if len(self.per_n) < 3:
            return {}
        return {name: fit_decay_rate(zip(self.n_values, self.series(name))) for name in SERIES}

    def coverage(self) -> np.ndarray:
        """Boolean ``(len(n_list), 2)``: does the CI contain the truth."""
        t = self.config.truth
        return np.array([(s.ci_low <= t) & (t <= s.ci_high) for s in self.per_n])

    def to_csv(self, fh=None) -> str | None:
        buf = fh if fh is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "metric", "component", "value"])
        for s in self.per_n:
            for n, metric, comp, value in s.rows():
                w.writerow([n, metric, comp, repr(value)])
        return buf.getvalue() if fh is None else None

    def to_record(self, diagnostics: dict | None = None) -> dict:
        slopes = {k: {"slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared,
                      "dropped_n": list(f.dropped)}
                  for k, f in self.slopes().items()}
        return {
            "config": self.config.to_record(),
            "seeds": {"base_seed": self.config.base_seed,
                      "stream_key": "(base_seed, n, replicate)"},
            "truth": self.config.truth.tolist(),
            "excluded": {str(s.n): s.excluded for s in self.per_n},
            "slopes": slopes,
            "coverage": self.coverage().tolist(),
            "diagnostics": diagnostics or {},
        }

    def to_json(self, diagnostics: dict | None = None) -> str:
        return json.dumps(self.to_record(diagnostics), indent=2, sort_keys=True) + "\n"


def _replicate_paths(factor: CovarianceFactor, n: int, R: int, base_seed: int):
    for r in range(R):
        seed = SeedSpec(base_seed, r, (n,))
        z = seed.generator().standard_normal(2 * n)
        x = factor.lower @ z
        yield r, SamplePath(x[:n], x[n:], factor.jitter, seed)


def run_experiment(config: ExperimentConfig,
                   on_n_done: Callable[[NSummary], None] | None = None) -> ExperimentSummary:
    """Simulate and estimate ``R`` replicates at every ``n`` in the design.

    Replicates that raise :class:`DegeneratePathError` are excluded and
    counted; any other failure is re-raised as :class:`ReplicateError`.
    ``on_n_done`` is called after each ``n`` so callers can flush partial
    results.
    """
    per_n = []
    half = 0.5 if config.scale == "nu" else 1.0
    for n in config.n_list:
        try:
            factor = factorize(config.model, n)
        except Exception as exc:
            raise ReplicateError(n, None, exc) from exc
        rows, excluded = [], 0
        for r, path in _replicate_paths(factor, n, config.R, config.base_seed):
            try:
                est = estimate(path, config.m, config.estimator_kind)
            except DegeneratePathError:
                excluded += 1
                continue
            except Exception as exc:
                raise ReplicateError(n, r, exc) from exc
            rows.append((half * est.alpha11_hat, half * est.alpha22_hat))
        summary = _summarize(n, np.array(rows).reshape(-1, 2), excluded, config.truth)
        log.info("n=%d done (%d included, %d excluded)", n, summary.included, excluded)
        per_n.append(summary)
        if on_n_done is not None:
            on_n_done(summary)
    return ExperimentSummary(config, per_n)


@dataclass(frozen=True)
class DiagnosticsReport:
    """Joint-normality checks of ``sqrt(n) (alpha_hat - alpha)`` against a law."""

    ks_statistic: tuple
    ks_pvalue: tuple
    cov_max_deviation: float
    raw_correlation: float
    R: int

    def to_record(self) -> dict:
        return {"ks_statistic": list(self.ks_statistic), "ks_pvalue": list(self.ks_pvalue),
                "cov_max_deviation": self.cov_max_deviation,
                "raw_correlation": self.raw_correlation, "R": self.R}


def _inv_sqrt(cov: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(cov)
    if w.min() <= 1e-12 * max(w.max(), 0.0) or w.max() <= 0:
        raise np.linalg.LinAlgError("law covariance is singular")
    return (v / np.sqrt(w)) @ v.T


def normality_diagnostics(estimates, law: AsymptoticLaw, truth, n: int) -> DiagnosticsReport:
    """Standardise ``sqrt(n) (alpha_hat - truth)`` by the symmetric inverse
    square root of the law covariance and compare with N(0, I).

    ``estimates`` is ``R x 2`` on the alpha scale; ``R >= 200`` is required.
    """
    est = np.asarray(estimates, dtype=float)
    if est.ndim != 2 or est.shape[1] != 2:
        raise ValueError("estimates must be an R x 2 array")
    if est.shape[0] < 200:
        raise ValueError(f"need at least 200 replicates, got {est.shape[0]}")
    w = _inv_sqrt(np.asarray(law.cov, dtype=float))
    z = (np.sqrt(n) * (est - np.asarray(truth, dtype=float))) @ w
    ks = [stats.kstest(z[:, k], "norm") for k in (0, 1)]
    emp = np.cov(z, rowvar=False)
    raw = float(np.corrcoef(est, rowvar=False)[0, 1])
    return DiagnosticsReport(tuple(float(k.statistic) for k in ks),
                             tuple(float(k.pvalue) for k in ks),
                             float(np.max(np.abs(emp - np.eye(2)))), raw, est.shape[0])


def standardized_zbar(model: CovarianceModel, n: int, m: int, R: int, base_seed: int,
                      namespace: tuple = (0,)) -> np.ndarray:
    """``R x 2m`` draws of ``zbar`` centred by the exact mean and divided by
    the exact finite-``n`` standard deviation of each entry.

    Streams are keyed ``(*namespace, n, replicate)``; the extra key level
    keeps them apart from :func:`run_experiment`'s ``(n, replicate)``.
    """
    factor = factorize(model, n)
    out = np.empty((R, 2 * m))
    for r in range(R):
        z = SeedSpec(base_seed, r, (*namespace, n)).generator().standard_normal(2 * n)
        x = factor.lower @ z
        out[r] = increment_stats(SamplePath(x[:n], x[n:]), m).zbar.ravel()
    mu = expected_zbar(model, n, m).ravel()
    sd = np.sqrt(np.diag(zbar_covariance(model, n, m)))
    return (out - mu) / sd
