"""Covariance models for a bivariate stationary Gaussian process on the line.

Two concrete models are provided:

* :class:`MaternModel`, the full bivariate Matérn model with marginal and
  cross covariances ``sigma_i sigma_j rho_ij M(h | nu_ij, a_ij)``;
* :class:`GenericModel`, any user-supplied triple of even functions together
  with the small-lag expansion they are declared to satisfy.

Every model carries a :class:`LocalExpansion`, which is all the asymptotic
theory consumes:

    C11(t) = s1^2 - c11 |t|^a11 + O(|t|^(a11 + b11))
    C22(t) = s2^2 - c22 |t|^a22 + O(|t|^(a22 + b22))
    C12(t) = rho s1 s2 (1 - c12 |t|^a12 + O(|t|^(a12 + b12)))
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Callable, Optional

import numpy as np

from .specialfn import bessel_k, gamma

__all__ = [
    "InvalidModelError",
    "ValidityReport",
    "LocalExpansion",
    "MaternParams",
    "CovarianceModel",
    "MaternModel",
    "GenericModel",
    "matern_correlation",
    "matern_small_lag_coefficient",
    "local_expansion",
    "check_validity",
    "check_matern_validity",
    "trajectory_dimension",
    "component_graph_dimension",
    "evaluate_cov",
    "EQUALITY_TOL",
]

# (a11 + a22)/2 == a12 is a structural case split, decided on the inputs.
EQUALITY_TOL = 1e-12


class InvalidModelError(ValueError):
    """The parameters do not define a valid bivariate covariance."""


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    reason: Optional[str] = None
    frequency: Optional[float] = None

    def __bool__(self):
        return self.valid

    def __str__(self):
        return "valid" if self.valid else f"invalid: {self.reason}"


@dataclass(frozen=True)
class LocalExpansion:
    """Small-lag behaviour of a bivariate covariance (see module docstring).

    ``rho = 0`` is accepted so that models with independent components can
    be expressed; the cross coefficients are then irrelevant.
    """

    sigma1_sq: float
    sigma2_sq: float
    rho: float
    c11: float
    c22: float
    c12: float
    alpha11: float
    alpha22: float
    alpha12: float
    beta11: float
    beta22: float
    beta12: float

    def __post_init__(self):
        for name in ("alpha11", "alpha22"):
            val = getattr(self, name)
            if not (0.0 < val < 2.0):
                raise ValueError(f"{name} must lie in (0, 2), got {val!r}")
        if not self.alpha12 > 0.0:
            raise ValueError(f"alpha12 must be positive, got {self.alpha12!r}")
        for name in ("c11", "c22", "c12", "sigma1_sq", "sigma2_sq",
                     "beta11", "beta22", "beta12"):
            val = getattr(self, name)
            if not val > 0.0:
                raise ValueError(f"{name} must be positive, got {val!r}")
        if not abs(self.rho) < 1.0:
            raise ValueError(f"|rho| must be < 1, got {self.rho!r}")

    @property
    def mean_alpha(self) -> float:
        return 0.5 * (self.alpha11 + self.alpha22)

    @property
    def is_equality_case(self) -> bool:
        """True when ``(alpha11 + alpha22)/2 == alpha12`` (within 1e-12)."""
        return abs(self.mean_alpha - self.alpha12) <= EQUALITY_TOL

    @property
    def cross_scale(self) -> float:
        """``rho * sigma1 * sigma2``, the value of C12 at lag zero."""
        return self.rho * math.sqrt(self.sigma1_sq * self.sigma2_sq)

    def scaled(self, component: int, lam: float) -> "LocalExpansion":
        """Copy with ``c_ii`` multiplied by ``lam``."""
        key = {1: "c11", 2: "c22"}[component]
        rec = asdict(self)
        rec[key] *= lam
        return LocalExpansion(**rec)

    def swapped(self) -> "LocalExpansion":
        return LocalExpansion(
            sigma1_sq=self.sigma2_sq, sigma2_sq=self.sigma1_sq, rho=self.rho,
            c11=self.c22, c22=self.c11, c12=self.c12,
            alpha11=self.alpha22, alpha22=self.alpha11, alpha12=self.alpha12,
            beta11=self.beta22, beta22=self.beta11, beta12=self.beta12,
        )

    def to_record(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MaternParams:
    """Parameters of the full bivariate Matérn model.

    ``nu11`` and ``nu22`` are restricted to (0, 1), the non-smooth range in
    which the increment estimator applies; ``a_ij`` are inverse scales.
    """

    nu11: float
    nu22: float
    nu12: float
    a11: float = 1.0
    a22: float = 1.0
    a12: float = 1.0
    sigma1: float = 1.0
    sigma2: float = 1.0
    rho: float = 0.5

    def __post_init__(self):
        for name in ("nu11", "nu22"):
            val = getattr(self, name)
            if not (0.0 < val < 1.0):
                raise ValueError(f"{name} must lie in (0, 1), got {val!r}")
        if not (0.0 < self.nu12 <= 3.0):
            raise ValueError(f"nu12 must lie in (0, 3], got {self.nu12!r}")
        for name in ("a11", "a22", "a12", "sigma1", "sigma2"):
            val = getattr(self, name)
            if not val > 0.0:
                raise ValueError(f"{name} must be positive, got {val!r}")
        if not abs(self.rho) < 1.0:
            raise ValueError(f"|rho| must be < 1, got {self.rho!r}")

    def swapped(self) -> "MaternParams":
        return MaternParams(
            nu11=self.nu22, nu22=self.nu11, nu12=self.nu12,
            a11=self.a22, a22=self.a11, a12=self.a12,
            sigma1=self.sigma2, sigma2=self.sigma1, rho=self.rho,
        )

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, record) -> "MaternParams":
        known = {f.name for f in fields(cls)}
        unknown = set(record) - known
        if unknown:
            raise KeyError(f"unknown Matérn parameter(s): {', '.join(sorted(unknown))}")
        return cls(**{k: float(v) for k, v in record.items()})


def matern_correlation(h, nu: float, a: float):
    """Matérn correlation ``2^(1-nu)/Gamma(nu) (a|h|)^nu K_nu(a|h|)``.

    Vectorised over ``h``; the value at ``h = 0`` is the limit 1.
    """
    if not a > 0.0:
        raise ValueError(f"inverse scale a must be positive, got {a!r}")
    scalar = np.ndim(h) == 0
    r = np.abs(np.asarray(h, dtype=float)) * a
    out = np.ones_like(r)
    pos = r > 0.0
    if np.any(pos):
        rp = r[pos]
        # log-space prefactor keeps (a h)^nu K_nu(a h) finite for tiny a h
        logpref = (1.0 - nu) * math.log(2.0) - math.log(gamma(nu)) + nu * np.log(rp)
        out[pos] = np.exp(logpref) * bessel_k(nu, rp)
    out = np.minimum(out, 1.0)
    return float(out) if scalar else out


def matern_small_lag_coefficient(nu: float, a: float = 1.0) -> float:
    """``b1`` in ``M(h) = 1 - b1 |h|^(2 nu) + ...`` for ``0 < nu < 1``.

    ``b1 = Gamma(1 - nu) a^(2 nu) / (2^(2 nu) Gamma(1 + nu))``.
    """
    if not (0.0 < nu < 1.0):
        raise ValueError(f"expansion coefficient needs nu in (0, 1), got {nu!r}")
    return gamma(1.0 - nu) * a ** (2.0 * nu) / (2.0 ** (2.0 * nu) * gamma(1.0 + nu))


def check_validity(exp: LocalExpansion) -> ValidityReport:
    """Condition on the exponents that keeps the process non-degenerate.

    Valid when ``(a11 + a22)/2 < a12``, or when equality holds and
    ``c12^2 rho^2 s1^2 s2^2 < c11 c22``.
    """
    mean = exp.mean_alpha
    if exp.is_equality_case:
        lhs = exp.c12 ** 2 * exp.rho ** 2 * exp.sigma1_sq * exp.sigma2_sq
        rhs = exp.c11 * exp.c22
        if lhs < rhs:
            return ValidityReport(True)
        return ValidityReport(
            False,
            f"equality case (alpha12 = {exp.alpha12:g}) needs "
            f"c12^2 rho^2 s1^2 s2^2 < c11 c22, got {lhs:.6g} >= {rhs:.6g}",
        )
    if mean < exp.alpha12:
        return ValidityReport(True)
    return ValidityReport(
        False,
        f"cross exponent alpha12 = {exp.alpha12:g} is below the mean "
        f"marginal exponent {mean:g}",
    )


def local_expansion(params: MaternParams, validate: bool = True) -> LocalExpansion:
    """Small-lag expansion of the bivariate Matérn model.

    ``alpha_ij = 2 nu_ij``, ``c_ij = b1(nu_ij, a_ij)`` (times ``sigma_i^2`` on
    the diagonal) and ``beta_ij = 2 - 2 nu_ij``, the gap to the ``h^2`` term.

    Raises
    ------
    InvalidModelError
        If ``validate`` and the exponent condition of :func:`check_validity`
        fails.
    ValueError
        If ``nu12 >= 1``, where the cross term has no ``|h|^(2 nu)`` part of
        this form.
    """
    p = params
    exp = LocalExpansion(
        sigma1_sq=p.sigma1 ** 2,
        sigma2_sq=p.sigma2 ** 2,
        rho=p.rho,
        c11=p.sigma1 ** 2 * matern_small_lag_coefficient(p.nu11, p.a11),
        c22=p.sigma2 ** 2 * matern_small_lag_coefficient(p.nu22, p.a22),
        c12=matern_small_lag_coefficient(p.nu12, p.a12),
        alpha11=2.0 * p.nu11,
        alpha22=2.0 * p.nu22,
        alpha12=2.0 * p.nu12,
        beta11=2.0 - 2.0 * p.nu11,
        beta22=2.0 - 2.0 * p.nu22,
        beta12=2.0 - 2.0 * p.nu12,
    )
    if validate:
        report = check_validity(exp)
        if not report:
            raise InvalidModelError(report.reason)
    return exp


def _log_spectral_density(xi, nu, a, scale):
    # f(xi) = scale * Gamma(nu + 1/2)/(Gamma(nu) sqrt(pi)) * a^(2 nu) (a^2 + xi^2)^(-nu - 1/2)
    logk = (math.log(scale) + math.log(gamma(nu + 0.5)) - math.log(gamma(nu))
            - 0.5 * math.log(math.pi) + 2.0 * nu * math.log(a))
    return logk - (nu + 0.5) * np.log(a * a + xi * xi), logk


def check_matern_validity(params: MaternParams, freq_grid_size: int = 512) -> ValidityReport:
    """Numerical check of Cramér's criterion for the Matérn spectral densities.

    Tests ``rho^2 f12(xi)^2 <= f11(xi) f22(xi)`` on ``xi = 0`` plus a
    log-spaced grid spanning eight decades around the scales, then compares
    the ``xi -> inf`` power laws (and their constants when the exponents tie).
    """
    if freq_grid_size < 128:
        raise ValueError("freq_grid_size must be at least 128")
    p = params
    if p.rho == 0.0:
        return ValidityReport(True)
    amax = max(p.a11, p.a22, p.a12)
    amin = min(p.a11, p.a22, p.a12)
    xi = np.concatenate([[0.0], np.logspace(math.log10(amin) - 4, math.log10(amax) + 4,
                                            freq_grid_size - 1)])
    l11, k11 = _log_spectral_density(xi, p.nu11, p.a11, p.sigma1 ** 2)
    l22, k22 = _log_spectral_density(xi, p.nu22, p.a22, p.sigma2 ** 2)
    l12, k12 = _log_spectral_density(xi, p.nu12, p.a12, 1.0)
    lhs = 2.0 * math.log(abs(p.rho) * p.sigma1 * p.sigma2) + 2.0 * l12
    rhs = l11 + l22
    bad = np.nonzero(lhs > rhs + 1e-12)[0]
    if bad.size:
        f = float(xi[bad[0]])
        return ValidityReport(
            False, f"rho^2 f12^2 exceeds f11 f22 at frequency {f:.6g}", frequency=f)
    mean = 0.5 * (p.nu11 + p.nu22)
    if p.nu12 < mean - EQUALITY_TOL:
        return ValidityReport(
            False,
            f"cross spectrum decays like xi^(-{2 * p.nu12 + 1:g}), slower than the "
            f"marginal geometric mean xi^(-{p.nu11 + p.nu22 + 1:g})",
            frequency=math.inf,
        )
    if abs(p.nu12 - mean) <= EQUALITY_TOL:
        lead_l = 2.0 * math.log(abs(p.rho) * p.sigma1 * p.sigma2) + 2.0 * k12
        if lead_l > k11 + k22 + 1e-12:
            return ValidityReport(
                False, "leading tail constants violate rho^2 f12^2 <= f11 f22",
                frequency=math.inf)
    return ValidityReport(True)


def trajectory_dimension(alpha11: float, alpha22: float) -> float:
    """Hausdorff dimension of the graph ``{(t, X1(t), X2(t))}`` over [0, 1].

    ``min{(2 + a_hi - a_lo)/a_hi, 3 - (a_lo + a_hi)/2}`` after ordering the
    two indices so that ``a_lo <= a_hi``.
    """
    for val in (alpha11, alpha22):
        if not (0.0 < val < 2.0):
            raise ValueError(f"fractal indices must lie in (0, 2), got {val!r}")
    lo, hi = sorted((alpha11, alpha22))
    return min((2.0 + hi - lo) / hi, 3.0 - 0.5 * (lo + hi))


def component_graph_dimension(alpha: float) -> float:
    """Graph dimension ``2 - alpha/2`` of a single component."""
    if not (0.0 < alpha < 2.0):
        raise ValueError(f"alpha must lie in (0, 2), got {alpha!r}")
    return 2.0 - 0.5 * alpha


class CovarianceModel:
    """Base class: a bivariate stationary covariance with a known expansion.

    Subclasses implement :meth:`entries`, returning ``(C11, C22, C12)``
    evaluated elementwise at lags ``t``. All three must be even in ``t``.
    """

    expansion: LocalExpansion

    def entries(self, t):
        raise NotImplementedError

    def matrix(self, t: float) -> np.ndarray:
        c11, c22, c12 = (float(v) for v in self.entries(np.asarray(float(t))))
        return np.array([[c11, c12], [c12, c22]])

    def swapped(self) -> "CovarianceModel":
        """The same process with components relabelled 1 <-> 2."""
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": type(self).__name__, "expansion": self.expansion.to_record()}


class MaternModel(CovarianceModel):
    """Full bivariate Matérn covariance.

    Construction runs both the exponent condition and the spectral check and
    raises :class:`InvalidModelError` if either fails.
    """

    def __init__(self, params: MaternParams, validate: bool = True):
        self.params = params
        self.expansion = local_expansion(params, validate=validate)
        if validate:
            report = check_matern_validity(params)
            if not report:
                raise InvalidModelError(report.reason)

    def entries(self, t):
        p = self.params
        c11 = p.sigma1 ** 2 * matern_correlation(t, p.nu11, p.a11)
        c22 = p.sigma2 ** 2 * matern_correlation(t, p.nu22, p.a22)
        c12 = p.rho * p.sigma1 * p.sigma2 * matern_correlation(t, p.nu12, p.a12)
        return c11, c22, c12

    def swapped(self) -> "MaternModel":
        return MaternModel(self.params.swapped())

    def describe(self) -> dict:
        out = super().describe()
        out["params"] = self.params.to_record()
        return out

    def __repr__(self):
        return f"MaternModel({self.params!r})"


class GenericModel(CovarianceModel):
    """Covariance given by three callables and a declared expansion.

    Parameters
    ----------
    c11, c22, c12 : callable
        Vectorised even functions of the lag.
    expansion : LocalExpansion
        The small-lag behaviour the functions are claimed to have.
    check : bool
        If true, verify at ``h = 1e-3`` that
        ``(C_ii(0) - C_ii(h)) / (c_ii h^alpha_ii)`` and the cross analogue are
        within ``1e-2`` of 1, and that the zero-lag values match.
    """

    def __init__(self, c11: Callable, c22: Callable, c12: Callable,
                 expansion: LocalExpansion, check: bool = True):
        self._funcs = (c11, c22, c12)
        self.expansion = expansion
        if check:
            self._cross_check()

    def entries(self, t):
        t = np.asarray(t, dtype=float)
        return tuple(np.broadcast_to(np.asarray(f(t), dtype=float), t.shape).copy()
                     for f in self._funcs)

    def swapped(self) -> "GenericModel":
        c11, c22, c12 = self._funcs
        return GenericModel(c22, c11, c12, self.expansion.swapped(), check=False)

    def _cross_check(self, h: float = 1e-3, tol: float = 1e-2):
        e = self.expansion
        c0 = [float(v) for v in self.entries(np.array(0.0))]
        ch = [float(v) for v in self.entries(np.array(h))]
        expect0 = (e.sigma1_sq, e.sigma2_sq, e.cross_scale)
        for name, got, want in zip(("C11", "C22", "C12"), c0, expect0):
            if abs(got - want) > 1e-10 * max(1.0, abs(want)):
                raise InvalidModelError(f"{name}(0) = {got:.6g} but the expansion declares {want:.6g}")
        checks = [("C11", c0[0] - ch[0], e.c11 * h ** e.alpha11),
                  ("C22", c0[1] - ch[1], e.c22 * h ** e.alpha22)]
        if e.rho != 0.0:
            checks.append(("C12", c0[2] - ch[2], e.cross_scale * e.c12 * h ** e.alpha12))
        for name, drop, predicted in checks:
            if abs(drop / predicted - 1.0) > tol:
                raise InvalidModelError(
                    f"{name} small-lag behaviour does not match the declared expansion "
                    f"(ratio {drop / predicted:.4f} at h={h:g})")

    def __repr__(self):
        return f"GenericModel(expansion={self.expansion!r})"


def evaluate_cov(model: CovarianceModel, t: float) -> np.ndarray:
    """The 2x2 matrix ``C(t)``."""
    return model.matrix(t)
