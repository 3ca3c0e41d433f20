"""Limiting covariances of the increment statistics and of the index estimates.

Conventions: ``Zbar_i(u)`` rescaled by ``n^alpha_ii`` has mean tending to
``tau(u) = c_ii (8 - 2^(alpha_ii + 1)) u^alpha_ii`` and ``n`` times its
covariance tends to ``Phi0``. The estimator in :mod:`bivfractal.estimator`
never applies that rescaling (it cancels); the finite-``n`` helpers here
return the unscaled moments and take care of the scaling when comparing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .covariance import CovarianceModel, LocalExpansion, MaternParams, local_expansion
from .estimator import FILTER, WeightVector, dilation_pair_sums

__all__ = [
    "DEFAULT_TOL",
    "sigma0_marginal",
    "sigma0_cross",
    "tau",
    "Phi0Entry",
    "phi0_entry",
    "Phi0Matrix",
    "phi0_matrix",
    "AsymptoticLaw",
    "asymptotic_law",
    "RatePrediction",
    "psi",
    "rate_exponents",
    "matern_rate_exponents",
    "expected_zbar",
    "zbar_covariance",
    "scaled_zbar_covariance",
]

DEFAULT_TOL = 1e-10
_A = np.array(FILTER)
_K = np.array([-1, 0, 1])


def _filtered_power(h, u, v, alpha):
    """``sum_{j,k} a_j a_k |h + k v - j u|^alpha`` (vectorised over ``h``)."""
    h = np.asarray(h, dtype=float)
    out = np.zeros_like(h)
    for j, aj in zip(_K, _A):
        for k, ak in zip(_K, _A):
            out = out + aj * ak * np.abs(h + k * v - j * u) ** alpha
    return out


def sigma0_marginal(h, u: int, v: int, alpha: float, c: float):
    """Limit covariance ``-c sum_{j,k} a_j a_k |h + k v - j u|^alpha``.

    This is ``E[Y_u(l) Y_v(l + h)]`` for the ``n^(alpha/2)``-scaled
    increments of one component, in the limit ``n -> inf``.
    """
    out = -c * _filtered_power(h, u, v, alpha)
    return float(out) if np.ndim(h) == 0 else out


def sigma0_cross(h, u: int, v: int, exp: LocalExpansion):
    """Limit cross covariance of scaled increments of X1 (dilation u) and X2 (v).

    Identically zero when ``(alpha11 + alpha22)/2 < alpha12``; in the
    equality case it is ``sigma0_marginal`` with ``(c, alpha)`` replaced by
    ``(rho s1 s2 c12, alpha12)``.
    """
    if not exp.is_equality_case:
        return 0.0 if np.ndim(h) == 0 else np.zeros(np.shape(h))
    return sigma0_marginal(h, u, v, exp.alpha12, exp.cross_scale * exp.c12)


def tau(u, alpha: float, c: float):
    """``c (8 - 2^(alpha + 1)) u^alpha``, the limit of ``n^alpha E Zbar(u)``."""
    return c * (8.0 - 2.0 ** (alpha + 1.0)) * np.asarray(u, dtype=float) ** alpha if np.ndim(u) \
        else c * (8.0 - 2.0 ** (alpha + 1.0)) * float(u) ** alpha


def _block_params(i: int, j: int, exp: LocalExpansion):
    """(alpha, c) of the sigma0 function feeding block (i, j), or None if zero."""
    if i == j == 1:
        return exp.alpha11, exp.c11
    if i == j == 2:
        return exp.alpha22, exp.c22
    if exp.is_equality_case:
        return exp.alpha12, exp.cross_scale * exp.c12
    return None


def _fourth_moment(u: int, v: int) -> float:
    return float(sum(aj * ak * (k * v - j * u) ** 4
                     for j, aj in zip(_K, _A) for k, ak in zip(_K, _A)))


def _tail_constant(u: int, v: int, alpha: float, c: float) -> float:
    """K with ``|sigma0(h)| <= K |h|^(alpha-4)`` for ``|h| >= 2(u+v)``.

    The Taylor expansion of ``|h + d|^alpha`` in ``d/h`` loses its orders
    0 to 3 under the double filter; the fourth-order term gives
    ``c |alpha(alpha-1)(alpha-2)(alpha-3)| M4 / 24`` and the rest is at most
    a geometric fraction of it once ``|d/h| <= 1/2``. A factor two covers
    that remainder; the bound is also checked against direct evaluation.
    """
    lead = abs(c * alpha * (alpha - 1) * (alpha - 2) * (alpha - 3)) * abs(_fourth_moment(u, v)) / 24.0
    h = np.arange(2 * (u + v), 16 * (u + v) + 1, dtype=float)
    observed = np.max(np.abs(sigma0_marginal(h, u, v, alpha, c)) * h ** (4.0 - alpha))
    return max(2.0 * lead, 1.5 * observed)


class Phi0Entry(NamedTuple):
    value: float
    H: int
    tail_bound: float


def _choose_H(u: int, v: int, alpha: float, c: float, tol: float) -> tuple[int, float]:
    # |sum_{|h|>H} 2 sigma0(h)^2| <= 4 K^2 H^(2 alpha - 7) / (7 - 2 alpha);
    # tol is relative to c^2 (u v)^alpha so that H does not depend on units.
    h0 = 2 * (u + v)
    K = _tail_constant(u, v, alpha, c)
    if K == 0.0:
        return u + v, 0.0
    target = tol * c * c * (u * v) ** alpha
    e = 7.0 - 2.0 * alpha
    H = max(h0, int(math.ceil((4.0 * K * K / (e * target)) ** (1.0 / e))))
    bound = 4.0 * K * K * H ** (-e) / e
    return H, bound


def _phi_sum(u, v, alpha, c, H):
    h = np.arange(-H, H + 1, dtype=float)
    s = sigma0_marginal(h, u, v, alpha, c)
    return 2.0 * float(np.dot(s, s))


def phi0_entry(u: int, v: int, i: int, j: int, exp: LocalExpansion,
               tol: float = DEFAULT_TOL) -> Phi0Entry:
    """``2 sum_h sigma0_ij^{uv}(h)^2`` with an analytically bounded tail.

    The sum runs over ``|h| <= H`` where ``H`` makes the neglected tail at
    most ``tol * c^2 (u v)^alpha`` (with ``c, alpha`` those of block
    ``(i, j)``), using the ``|h|^(alpha-4)`` decay of ``sigma0``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    params = _block_params(i, j, exp)
    if params is None:
        return Phi0Entry(0.0, 0, 0.0)
    alpha, c = params
    H, bound = _choose_H(u, v, alpha, c, tol)
    return Phi0Entry(_phi_sum(u, v, alpha, c, H), H, bound)


@dataclass(frozen=True)
class Phi0Matrix:
    """The 2m x 2m limit covariance, blocks ordered (component 1, component 2)."""

    matrix: np.ndarray
    H: np.ndarray
    tail_bound: np.ndarray
    tol: float

    @property
    def m(self) -> int:
        return self.matrix.shape[0] // 2

    def block(self, i: int, j: int) -> np.ndarray:
        m = self.m
        return self.matrix[(i - 1) * m: i * m, (j - 1) * m: j * m]

    def to_record(self) -> dict:
        return {
            "m": self.m,
            "tol": self.tol,
            "phi0_11": self.block(1, 1).tolist(),
            "phi0_12": self.block(1, 2).tolist(),
            "phi0_22": self.block(2, 2).tolist(),
            "H_max": int(self.H.max()),
            "tail_bound_max": float(self.tail_bound.max()),
        }


def phi0_matrix(exp: LocalExpansion, m: int, tol: float = DEFAULT_TOL) -> Phi0Matrix:
    """Assemble ``Phi0`` entry by entry; the cross blocks are exactly zero in
    the strict case ``(alpha11 + alpha22)/2 < alpha12``."""
    if m < 1:
        raise ValueError("m must be positive")
    mat = np.zeros((2 * m, 2 * m))
    Hs = np.zeros((2 * m, 2 * m), dtype=int)
    bounds = np.zeros((2 * m, 2 * m))
    for i, j in ((1, 1), (2, 2), (1, 2)):
        if _block_params(i, j, exp) is None:
            continue
        for u in range(1, m + 1):
            # the (i, i) blocks are symmetric; the cross block is too since C12 is even
            for v in range(u, m + 1):
                e = phi0_entry(u, v, i, j, exp, tol)
                for (r, s) in (((i - 1) * m + u - 1, (j - 1) * m + v - 1),
                               ((i - 1) * m + v - 1, (j - 1) * m + u - 1),
                               ((j - 1) * m + u - 1, (i - 1) * m + v - 1),
                               ((j - 1) * m + v - 1, (i - 1) * m + u - 1)):
                    mat[r, s] = e.value
                    Hs[r, s] = e.H
                    bounds[r, s] = e.tail_bound
    return Phi0Matrix(mat, Hs, bounds, tol)


@dataclass(frozen=True)
class AsymptoticLaw:
    """Limit covariance of ``sqrt(n) (alpha_hat - alpha)``."""

    cov: np.ndarray

    @property
    def corr(self) -> float:
        d = np.sqrt(np.diag(self.cov))
        return float(self.cov[0, 1] / (d[0] * d[1]))

    def to_record(self) -> dict:
        return {"cov": self.cov.tolist(), "corr": self.corr}


def asymptotic_law(exp: LocalExpansion, L1: WeightVector, L2: WeightVector,
                   m: int | None = None, tol: float = DEFAULT_TOL,
                   phi0: Phi0Matrix | None = None) -> AsymptoticLaw:
    """Delta-method covariance ``Lt_i' Phi0_ij Lt_j`` with ``Lt_i = L_i / tau_i``."""
    m = m or L1.m
    if L1.m != m or L2.m != m:
        raise ValueError("weight vectors must have m entries")
    if phi0 is None:
        phi0 = phi0_matrix(exp, m, tol)
    u = np.arange(1, m + 1)
    lt1 = L1.L / tau(u, exp.alpha11, exp.c11)
    lt2 = L2.L / tau(u, exp.alpha22, exp.c22)
    cov = np.array([
        [lt1 @ phi0.block(1, 1) @ lt1, lt1 @ phi0.block(1, 2) @ lt2],
        [lt2 @ phi0.block(2, 1) @ lt1, lt2 @ phi0.block(2, 2) @ lt2],
    ])
    return AsymptoticLaw(cov)


def psi(x1: float, x2: float) -> float:
    return min(1.0 + x1, 1.0 + x2, x1 + x2)


@dataclass(frozen=True)
class RatePrediction:
    """Predicted decay exponents ``e`` (quantity ~ ``n^-e``).

    ``cross`` is the exponent of the cross term of the mean squared error
    matrix; ``cross_faster_than_n`` marks the strict case, where that term
    is ``o(1/n)``.
    """

    bias: tuple
    mse: tuple
    cross: float
    cross_faster_than_n: bool

    def to_record(self) -> dict:
        return {"bias": list(self.bias), "mse": list(self.mse), "cross": self.cross,
                "cross_faster_than_n": self.cross_faster_than_n}


def _strict_cross_exponent(exp: LocalExpansion) -> float:
    # sigma_n,12 carries n^(mean - alpha12); squared and summed over lags
    return 1.0 + 2.0 * (exp.alpha12 - exp.mean_alpha)


def rate_exponents(exp: LocalExpansion) -> RatePrediction:
    """Exponents implied by the general bias and MSE orders.

    Bias ``n^-min(1, beta_ii)``; MSE diagonal ``n^-min(1, psi(beta_ii, beta_ii))``.
    The cross term decays like ``n^-min(1, psi(beta11, beta22))`` in the
    equality case. In the strict case it is ``o(1/n)`` and the reported
    exponent is ``min(1 + 2 (alpha12 - mean alpha), psi(beta11, beta22))``.
    """
    b1, b2 = exp.beta11, exp.beta22
    bias = (min(1.0, b1), min(1.0, b2))
    mse = (min(1.0, psi(b1, b1)), min(1.0, psi(b2, b2)))
    if exp.is_equality_case:
        return RatePrediction(bias, mse, min(1.0, psi(b1, b2)), False)
    return RatePrediction(bias, mse, min(_strict_cross_exponent(exp), psi(b1, b2)), True)


def matern_rate_exponents(params: MaternParams) -> RatePrediction:
    """Matérn refinement: the ``beta`` remainders cancel under the filter,
    so bias and variances decay like ``1/n``; the strict-case cross term keeps
    the ``n^-(1 + 2 (alpha12 - mean alpha))`` leading order."""
    exp = local_expansion(params)
    if exp.is_equality_case:
        return RatePrediction((1.0, 1.0), (1.0, 1.0), 1.0, False)
    return RatePrediction((1.0, 1.0), (1.0, 1.0), _strict_cross_exponent(exp), True)


def expected_zbar(model: CovarianceModel, n: int, m: int) -> np.ndarray:
    """Exact ``E zbar_i(u)`` at grid size ``n`` (no ``n^alpha`` scaling).

    ``E D^2 = 6 C(0) - 8 C(u/n) + 2 C(2u/n)``; shape ``(2, m)``.
    """
    u = np.arange(1, m + 1)
    c0 = model.entries(np.zeros(1))
    c1 = model.entries(u / n)
    c2 = model.entries(2 * u / n)
    return np.vstack([6.0 * c0[i] - 8.0 * c1[i] + 2.0 * c2[i] for i in (0, 1)])


def zbar_covariance(model: CovarianceModel, n: int, m: int) -> np.ndarray:
    """Exact 2m x 2m covariance of the estimator's ``zbar`` vector.

    Uses ``cov(D^2, D'^2) = 2 cov(D, D')^2`` for jointly Gaussian increments
    and the effective counts ``n - 2u`` of :func:`bivfractal.estimator.zbar`.
    """
    cnt = n - 2.0 * np.arange(1, m + 1)
    norm = 2.0 / np.outer(cnt, cnt)
    blocks = {}
    for key, idx in (("11", 0), ("22", 1), ("12", 2)):
        S = dilation_pair_sums(lambda x, idx=idx: model.entries(x / n)[idx], n, m,
                               inclusive_end=False)
        blocks[key] = norm * S
    return np.block([[blocks["11"], blocks["12"]], [blocks["12"].T, blocks["22"]]])


def scaled_zbar_covariance(model: CovarianceModel, n: int, m: int) -> np.ndarray:
    """``n`` times the covariance of the ``n^alpha``-scaled ``zbar``; tends to Phi0."""
    e = model.expansion
    scale = np.concatenate([np.full(m, float(n) ** e.alpha11), np.full(m, float(n) ** e.alpha22)])
    return n * zbar_covariance(model, n, m) * np.outer(scale, scale)
