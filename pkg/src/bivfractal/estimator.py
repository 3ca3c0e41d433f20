"""Increment-based estimation of the two fractal indices.

For dilation ``u`` the second difference ``X((j-u)/n) - 2 X(j/n) + X((j+u)/n)``
is taken at every ``j`` for which both neighbours are observed, its squares
are averaged into ``zbar(u)``, and the index is the linear combination
``sum_u L_u log zbar(u)`` with weights obeying ``sum L_u = 0`` and
``sum L_u log u = 1``. Because the weights sum to zero, any deterministic
rescaling of ``zbar`` (in particular the ``n^alpha`` normalisation used in
the theory) drops out, so nothing here needs the unknown index.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .covariance import trajectory_dimension
from .simulate import SamplePath

__all__ = [
    "FILTER",
    "DegeneratePathError",
    "FilterBank",
    "WeightVector",
    "IncrementStats",
    "JointEstimate",
    "default_m",
    "filtered_increments",
    "zbar",
    "increment_stats",
    "ols_weights",
    "gls_omega",
    "gls_weights",
    "estimate_alpha",
    "estimate_joint",
    "estimate",
    "DIM_CLAMP",
    "GLS_NU_CLAMP",
]

# a_{-1}, a_0, a_1
FILTER = (1.0, -2.0, 1.0)
DIM_CLAMP = (0.02, 1.98)
GLS_NU_CLAMP = (0.01, 0.99)


class DegeneratePathError(ValueError):
    """Some increment mean is zero, so its logarithm is undefined."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


@dataclass(frozen=True)
class FilterBank:
    """Second-difference filter applied at dilations ``1..m``."""

    m: int
    coeffs: tuple = FILTER

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"need at least two dilations, got m={self.m}")
        c = np.asarray(self.coeffs)
        k = np.arange(-1, 2)
        if abs(c.sum()) > 0 or abs((k * c).sum()) > 0:
            raise ValueError("filter must annihilate constants and linear trends")

    def check_grid(self, n: int):
        if not 2 * self.m < n:
            raise ValueError(f"2m = {2 * self.m} must be smaller than n = {n}")


def default_m(n: int) -> int:
    """50 dilations for ``n >= 500``, otherwise ``max(2, n // 10)``."""
    return 50 if n >= 500 else max(2, n // 10)


def _second_difference(x: np.ndarray, u: int) -> np.ndarray:
    n = x.size
    if not 2 * u < n:
        raise ValueError(f"dilation u={u} needs 2u < n (n={n})")
    if u < 1:
        raise ValueError(f"dilation must be positive, got u={u}")
    return x[: n - 2 * u] - 2.0 * x[u : n - u] + x[2 * u :]


def filtered_increments(path: SamplePath, u: int, component: int) -> np.ndarray:
    """Dilated second differences of one component, length ``n - 2u``.

    Entry ``j - u - 1`` is ``X((j-u)/n) - 2 X(j/n) + X((j+u)/n)`` for
    ``j = u+1, ..., n-u``. No ``n^(alpha/2)`` prefactor is applied.
    """
    return _second_difference(path.component(component), u)


def zbar(path: SamplePath, u: int, component: int) -> float:
    """Mean of the squared increments at dilation ``u`` (divisor ``n - 2u``)."""
    d = filtered_increments(path, u, component)
    return float(np.dot(d, d) / d.size)


def _zbar_vector(x: np.ndarray, m: int) -> np.ndarray:
    out = np.empty(m)
    for u in range(1, m + 1):
        d = _second_difference(x, u)
        out[u - 1] = np.dot(d, d) / d.size
    return out


@dataclass(frozen=True)
class IncrementStats:
    """``zbar[i-1, u-1]`` for component ``i`` and dilation ``u``."""

    zbar: np.ndarray
    counts: np.ndarray

    @property
    def m(self) -> int:
        return self.zbar.shape[1]


def increment_stats(path: SamplePath, m: int) -> IncrementStats:
    FilterBank(m).check_grid(path.n)
    z = np.vstack([_zbar_vector(path.x1, m), _zbar_vector(path.x2, m)])
    return IncrementStats(zbar=z, counts=path.n - 2 * np.arange(1, m + 1))


@dataclass(frozen=True)
class WeightVector:
    """Regression weights ``L_1..L_m`` with ``sum L = 0``, ``sum L log u = 1``."""

    L: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        L = np.asarray(self.L, dtype=float)
        object.__setattr__(self, "L", L)
        if L.ndim != 1 or L.size < 2:
            raise ValueError("weights must be a vector of length >= 2")
        s0, s1 = self.constraint_residuals()
        if abs(s0) > 1e-10 or abs(s1) > 1e-10:
            raise ValueError(f"weights violate the constraints: sum L = {s0:.3g}, "
                             f"sum L log u - 1 = {s1:.3g}")

    @property
    def m(self) -> int:
        return self.L.size

    def constraint_residuals(self) -> tuple[float, float]:
        logu = np.log(np.arange(1, self.L.size + 1))
        return float(self.L.sum()), float(self.L @ logu - 1.0)


def ols_weights(m: int) -> WeightVector:
    """Ordinary least-squares slope weights for regressing on ``log u``."""
    if m < 2:
        raise ValueError("need m >= 2")
    s = np.log(np.arange(1, m + 1))
    dev = s - s.mean()
    return WeightVector(dev / np.dot(dev, dev), kind="ols")


def _count_pairs(lo_u, hi_u, lo_v, hi_v, d):
    """#{p in [lo_u, hi_u] : p + d in [lo_v, hi_v]} (vectorised)."""
    return np.maximum(0, np.minimum(hi_u, hi_v - d) - np.maximum(lo_u, lo_v - d) + 1)


@functools.lru_cache(maxsize=2)
def _pair_count_table(n: int, m: int, inclusive_end: bool) -> np.ndarray:
    # cnt[u-1, v-1, d + n]; independent of the covariance, so cached per grid
    end = 0 if inclusive_end else 1
    u = np.arange(1, m + 1)[:, None, None]
    v = np.arange(1, m + 1)[None, :, None]
    d = np.arange(-n, n + 1)[None, None, :]
    cnt = _count_pairs(u, n - u - end, v, n - v - end, d).astype(float)
    cnt.setflags(write=False)
    return cnt


def dilation_pair_sums(values: Callable[[np.ndarray], np.ndarray], n: int, m: int,
                       inclusive_end: bool) -> np.ndarray:
    """``S[u-1, v-1] = sum_{p in I_u} sum_{q in I_v} g_uv(q - p)^2``.

    Here ``g_uv(d) = sum_{j,k} a_j a_k T(d + k v - j u)`` with ``T`` given by
    ``values`` on integer arguments, and ``I_u = [u, n-u]`` if
    ``inclusive_end`` else ``[u, n-1-u]``. ``T`` must be even. The double
    filter is applied as two successive second differences, so ``T`` is
    evaluated only once per integer lag.
    """
    D = n
    span = D + 2 * m
    x = np.arange(-span, span + 1)
    table = np.asarray(values(x), dtype=float)
    # Q[v-1, y] = T(y - v) - 2 T(y) + T(y + v) on y in [-D - m, D + m]
    inner = np.arange(-D - m, D + m + 1) + span
    Q = np.empty((m, inner.size))
    for v in range(1, m + 1):
        Q[v - 1] = table[inner - v] - 2.0 * table[inner] + table[inner + v]
    off = D + m  # index of y = 0 inside Q
    cnt = _pair_count_table(n, m, inclusive_end)
    out = np.empty((m, m))
    for u in range(1, m + 1):
        Qu = Q[u - 1:]
        g = (Qu[:, off - D + u: off + D + u + 1]
             - 2.0 * Qu[:, off - D: off + D + 1]
             + Qu[:, off - D - u: off + D - u + 1])
        g *= g
        g *= cnt[u - 1, u - 1:]
        row = g.sum(axis=1)
        out[u - 1, u - 1:] = row
        out[u - 1:, u - 1] = row
    return out


def gls_omega(m: int, n: int, nu: float) -> np.ndarray:
    """Approximate covariance of ``log zbar(u)`` under a Matérn index ``nu``.

    ``omega[u, v] = 2 / ((n-2u+1)(n-2v+1)) * S_uv / (s0^2 u^(2nu) v^(2nu))``
    with ``S_uv`` the pair sum of squared filtered ``|.|^(2 nu)`` terms over
    ``h in [u, n-u]``, ``l in [v, n-v]`` and
    ``s0 = sum_{j,k} a_j a_k |k - j|^(2 nu)``.
    """
    FilterBank(m).check_grid(n)
    p = 2.0 * nu
    S = dilation_pair_sums(lambda x: np.abs(x, dtype=float) ** p, n, m, inclusive_end=True)
    s0 = 2.0 ** (p + 1.0) - 8.0
    u = np.arange(1, m + 1, dtype=float)
    cnt = n - 2.0 * u + 1.0
    return 2.0 * S / (np.outer(cnt, cnt) * s0 ** 2 * np.outer(u ** p, u ** p))


def gls_weights(m: int, n: int, nu_plugin: float, component: int | None = None) -> WeightVector:
    """Generalised least-squares slope weights.

    ``L = e2' (G' W^-1 G)^-1 G' W^-1`` with ``G`` the design ``[1, log u]`` and
    ``W`` from :func:`gls_omega` evaluated at the plugged-in ``nu``.

    Raises
    ------
    numpy.linalg.LinAlgError
        If ``W`` is numerically singular (use fewer dilations or more data).
    """
    omega = gls_omega(m, n, nu_plugin)
    G = np.column_stack([np.ones(m), np.log(np.arange(1, m + 1))])
    try:
        cf = np.linalg.cholesky(omega)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError(
            f"GLS weight matrix is singular for m={m}, n={n}, nu={nu_plugin:.4g}; "
            "use fewer dilations or a larger n") from None
    # whiten: A = C^-1 G, then L = e2' (A'A)^-1 A' C^-1
    A = np.linalg.solve(cf, G)
    q, r = np.linalg.qr(A)
    coef = np.linalg.solve(r, q.T)  # (A'A)^-1 A'
    L = np.linalg.solve(cf.T, coef[1])
    tag = "gls" if component is None else f"gls{component}"
    return WeightVector(L, kind=tag)


def _degeneracy_floor(x: np.ndarray) -> float:
    scale = float(np.max(np.abs(x))) if x.size else 0.0
    return (1e-13 * scale) ** 2


def _alpha_from_zbar(z: np.ndarray, weights: WeightVector, x: np.ndarray, component: int) -> float:
    if weights.m != z.size:
        raise ValueError(f"{weights.m} weights for {z.size} dilations")
    if np.any(z <= _degeneracy_floor(x)):
        raise DegeneratePathError(
            f"component {component}: increment mean vanishes (constant or affine path)",
            component=component)
    return float(np.dot(weights.L, np.log(z)))


def estimate_alpha(path: SamplePath, component: int, weights: WeightVector) -> float:
    """``sum_u L_u log zbar(u)`` for one component.

    Raises
    ------
    DegeneratePathError
        If any ``zbar(u)`` is zero up to rounding (constant or affine data).
    """
    x = path.component(component)
    FilterBank(weights.m).check_grid(path.n)
    return _alpha_from_zbar(_zbar_vector(x, weights.m), weights, x, component)


@dataclass(frozen=True)
class JointEstimate:
    n: int
    m: int
    estimator_kind: str
    alpha11_hat: float
    alpha22_hat: float
    zbar: np.ndarray = field(repr=False)

    @property
    def nu11_hat(self) -> float:
        return 0.5 * self.alpha11_hat

    @property
    def nu22_hat(self) -> float:
        return 0.5 * self.alpha22_hat

    @property
    def alpha_hat(self) -> np.ndarray:
        return np.array([self.alpha11_hat, self.alpha22_hat])

    @property
    def dim_hat(self) -> float:
        """Plug-in trajectory dimension with the estimates clamped into (0, 2)."""
        lo, hi = DIM_CLAMP
        return trajectory_dimension(min(max(self.alpha11_hat, lo), hi),
                                    min(max(self.alpha22_hat, lo), hi))

    def to_record(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "estimator_kind": self.estimator_kind,
            "alpha11_hat": self.alpha11_hat,
            "alpha22_hat": self.alpha22_hat,
            "nu11_hat": self.nu11_hat,
            "nu22_hat": self.nu22_hat,
            "dim_hat": self.dim_hat,
            "zbar": self.zbar.tolist(),
        }


def _joint_from_stats(path: SamplePath, stats: IncrementStats, w1: WeightVector,
                      w2: WeightVector, kind: str) -> JointEstimate:
    a1 = _alpha_from_zbar(stats.zbar[0], w1, path.x1, 1)
    a2 = _alpha_from_zbar(stats.zbar[1], w2, path.x2, 2)
    return JointEstimate(path.n, stats.m, kind, a1, a2, stats.zbar)


def estimate_joint(path: SamplePath, w1: WeightVector, w2: WeightVector,
                   kind: str | None = None) -> JointEstimate:
    """Estimate both indices with per-component weights."""
    if w1.m != w2.m:
        raise ValueError("both weight vectors must use the same number of dilations")
    stats = increment_stats(path, w1.m)
    return _joint_from_stats(path, stats, w1, w2, kind or w1.kind)


def estimate(path: SamplePath, m: int | None = None, kind: str = "ols") -> JointEstimate:
    """OLS estimate, or OLS followed by a single GLS refit.

    For ``kind="gls"`` the OLS index ``nu = alpha/2`` of each component,
    clipped to ``GLS_NU_CLAMP``, is plugged into the GLS weight matrix.
    """
    if m is None:
        m = default_m(path.n)
    kind = kind.lower()
    if kind not in ("ols", "gls"):
        raise ValueError(f"estimator kind must be 'ols' or 'gls', got {kind!r}")
    stats = increment_stats(path, m)
    w = ols_weights(m)
    first = _joint_from_stats(path, stats, w, w, "ols")
    if kind == "ols":
        return first
    lo, hi = GLS_NU_CLAMP
    weights = [
        gls_weights(m, path.n, min(max(nu, lo), hi), component=i)
        for i, nu in ((1, first.nu11_hat), (2, first.nu22_hat))
    ]
    return _joint_from_stats(path, stats, weights[0], weights[1], "gls")
