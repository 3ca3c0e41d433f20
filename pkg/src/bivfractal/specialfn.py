"""Real-valued special functions used by the Matérn family.

Only what the covariance code needs is here: the gamma function on the
positive axis and the modified Bessel function of the second kind
:math:`K_\\nu(x)` for real order ``0 < nu <= 3`` and ``x > 0``.

The Bessel routine follows Temme's method: for ``x < 2`` the pair
:math:`(K_\\mu, K_{\\mu+1})` with ``|mu| <= 1/2`` comes from Temme's series,
for ``x >= 2`` from Steed's continued fraction (CF2), and the requested
order is reached by forward recurrence, which is stable for ``K``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["Accuracy", "DEFAULT_ACCURACY", "gamma", "bessel_k"]


@dataclass(frozen=True)
class Accuracy:
    """Relative error target for the special functions."""

    rel_tol: float = 1e-12

    def __post_init__(self):
        if not (0.0 < self.rel_tol < 1e-6):
            raise ValueError(f"rel_tol must lie in (0, 1e-6), got {self.rel_tol!r}")

    @property
    def series_eps(self) -> float:
        # Series terms are dropped well below the target so that the
        # truncation error never dominates rounding.
        return max(self.rel_tol * 1e-4, 1e-17)


DEFAULT_ACCURACY = Accuracy()

# Taylor coefficients of 1/Gamma(1+z) about z = 0.
_RGAMMA_TAYLOR = (
    1.0,
    0.5772156649015329,
    -0.6558780715202539,
    -0.04200263503409524,
    0.16653861138229148,
    -0.04219773455554433,
    -0.009621971527876973,
    0.0072189432466631,
    -0.0011651675918590652,
    -0.00021524167411495098,
    0.0001280502823881162,
    -2.013485478078824e-05,
    -1.2504934821426706e-06,
    1.133027231981696e-06,
    -2.056338416977607e-07,
    6.116095104481416e-09,
    5.002007644469223e-09,
    -1.18127457048702e-09,
    1.0434267116911005e-10,
    7.782263439905071e-12,
    -3.696805618642206e-12,
    5.100370287454476e-13,
    -2.0583260535665066e-14,
    -5.348122539423018e-15,
    1.2267786282382608e-15,
    -1.1812593016974588e-16,
    1.1866922547516004e-18,
    1.4123806553180319e-18,
    -2.29874568443537e-19,
    1.7144063219273374e-20,
)

_GAMMA_MAX_ARG = 170.0


def _rgamma1p(z: float) -> float:
    """1/Gamma(1+z) for |z| <= 1/2 (Horner on the Taylor series)."""
    acc = 0.0
    for coef in reversed(_RGAMMA_TAYLOR):
        acc = acc * z + coef
    return acc


def _gam1_gam2(mu: float) -> tuple[float, float]:
    """Temme's auxiliary functions.

    ``gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu)`` and
    ``gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2``, evaluated from the Taylor series
    so that ``gam1`` has no cancellation at small ``mu``.
    """
    odd = 0.0
    even = 0.0
    mu2 = mu * mu
    for k in range(len(_RGAMMA_TAYLOR) - 1, -1, -1):
        if k % 2:
            odd = odd * mu2 + _RGAMMA_TAYLOR[k]
        else:
            even = even * mu2 + _RGAMMA_TAYLOR[k]
    return -odd, even


def gamma(x: float) -> float:
    """Gamma function for ``0 < x <= 170``.

    Uses the Taylor series of ``1/Gamma(1+z)`` on ``[0.5, 1.5]`` and the
    functional equation ``Gamma(x+1) = x Gamma(x)`` to move there.

    Raises
    ------
    ValueError
        If ``x <= 0`` (domain error).
    OverflowError
        If ``x > 170``.
    """
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"gamma is only defined here for x > 0, got {x!r}")
    if x > _GAMMA_MAX_ARG:
        raise OverflowError(f"gamma({x!r}) overflows double precision")
    if x < 0.5:
        return 1.0 / (x * _rgamma1p(x))
    shift = 1.0
    while x > 1.5:
        x -= 1.0
        shift *= x
    return shift / _rgamma1p(x - 1.0)


def _temme_series(mu: float, x: float, eps: float) -> tuple[float, float]:
    x2 = 0.5 * x
    pimu = math.pi * mu
    fact = 1.0 if abs(pimu) < 1e-15 else pimu / math.sin(pimu)
    d = -math.log(x2)
    e = mu * d
    fact2 = 1.0 if abs(e) < 1e-15 else math.sinh(e) / e
    gam1, gam2 = _gam1_gam2(mu)
    gampl = gam2 - mu * gam1  # 1/Gamma(1+mu)
    gammi = gam2 + mu * gam1  # 1/Gamma(1-mu)
    ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
    total = ff
    e = math.exp(e)
    p = 0.5 * e / gampl
    q = 0.5 / (e * gammi)
    c = 1.0
    d = x2 * x2
    total1 = p
    for i in range(1, 500):
        ff = (i * ff + p + q) / (i * i - mu * mu)
        c *= d / i
        p /= i - mu
        q /= i + mu
        term = c * ff
        total += term
        total1 += c * p - i * term
        if abs(term) < abs(total) * eps:
            break
    else:  # pragma: no cover - the series converges in < 40 terms for x < 2
        raise ArithmeticError("Temme series failed to converge")
    return total, total1 * 2.0 / x


def _steed_cf2(mu: float, x: float, eps: float) -> tuple[float, float]:
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25 - mu * mu
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 10_000):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < eps:
            break
    else:  # pragma: no cover
        raise ArithmeticError("continued fraction CF2 failed to converge")
    h *= a1
    kmu = math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) / s
    kmu1 = kmu * (mu + x + 0.5 - h) / x
    return kmu, kmu1


def _bessel_k_scalar(nu: float, x: float, accuracy: Accuracy) -> float:
    if not x > 0.0:
        raise ValueError(f"bessel_k requires x > 0, got {x!r}")
    if not (0.0 < nu <= 3.0):
        raise ValueError(f"bessel_k supports orders in (0, 3], got {nu!r}")
    nl = int(nu + 0.5)
    mu = nu - nl
    eps = accuracy.series_eps
    if x < 2.0:
        kmu, kmu1 = _temme_series(mu, x, eps)
    else:
        kmu, kmu1 = _steed_cf2(mu, x, eps)
    xi2 = 2.0 / x
    for i in range(1, nl + 1):
        kmu, kmu1 = kmu1, (mu + i) * xi2 * kmu1 + kmu
    return kmu


def bessel_k(nu, x, accuracy: Accuracy = DEFAULT_ACCURACY):
    """Modified Bessel function of the second kind, :math:`K_\\nu(x)`.

    Parameters
    ----------
    nu : float
        Real order in ``(0, 3]``. Integer orders need no special casing.
    x : float or array_like
        Argument(s), all strictly positive.
    accuracy : Accuracy, optional
        Target relative error.

    Returns
    -------
    float or numpy.ndarray
        Same shape as ``x``. Underflows to 0 for ``x`` beyond roughly 700.
    """
    if np.ndim(x) == 0:
        return _bessel_k_scalar(float(nu), float(x), accuracy)
    arr = np.asarray(x, dtype=float)
    out = np.empty_like(arr)
    flat = out.reshape(-1)
    for idx, xv in enumerate(arr.reshape(-1)):
        flat[idx] = _bessel_k_scalar(float(nu), float(xv), accuracy)
    return out
