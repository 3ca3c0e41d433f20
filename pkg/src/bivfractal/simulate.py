"""Exact simulation of the bivariate process on the grid {1/n, ..., 1}.

The joint 2n x 2n covariance is assembled in component-major order (all of
X1, then all of X2) and factorised once by dense Cholesky; each path is
``L @ z`` with ``z`` drawn from a Philox stream keyed by the seed, so a path
depends only on its :class:`SeedSpec`, never on generation order.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .covariance import CovarianceModel

__all__ = [
    "NotPositiveDefiniteError",
    "GridSpec",
    "SeedSpec",
    "SamplePath",
    "CovarianceFactor",
    "JITTER_LEVELS",
    "build_joint_covariance",
    "factorize",
    "simulate_path",
    "simulate_ensemble",
    "write_paths_csv",
    "read_path_csv",
]

JITTER_LEVELS = (1e-12, 1e-10, 1e-8)


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky failed even with the largest diagonal jitter."""


@dataclass(frozen=True)
class GridSpec:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8:
            raise ValueError(f"grid size n must be an integer >= 8, got {self.n!r}")

    @property
    def times(self) -> np.ndarray:
        return np.arange(1, self.n + 1) / self.n


@dataclass(frozen=True)
class SeedSpec:
    """Key of one random stream.

    ``namespace`` lets callers separate families of streams (the Monte Carlo
    harness uses ``(n,)``) without changing the meaning of the first two
    fields.
    """

    base_seed: int
    replicate_index: int = 0
    namespace: tuple = ()

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.base_seed) & ((1 << 64) - 1),
                                    spawn_key=(*map(int, self.namespace), int(self.replicate_index)))
        return np.random.Generator(np.random.Philox(ss))


@dataclass
class SamplePath:
    x1: np.ndarray
    x2: np.ndarray
    jitter: float = 0.0
    seed: SeedSpec | None = field(default=None, compare=False)

    def __post_init__(self):
        self.x1 = np.asarray(self.x1, dtype=float)
        self.x2 = np.asarray(self.x2, dtype=float)
        if self.x1.ndim != 1 or self.x1.shape != self.x2.shape:
            raise ValueError("x1 and x2 must be 1-D vectors of equal length")
        if not (np.all(np.isfinite(self.x1)) and np.all(np.isfinite(self.x2))):
            raise ValueError("sample path contains non-finite values")

    @property
    def n(self) -> int:
        return self.x1.size

    @property
    def times(self) -> np.ndarray:
        return np.arange(1, self.n + 1) / self.n

    def component(self, i: int) -> np.ndarray:
        if i == 1:
            return self.x1
        if i == 2:
            return self.x2
        raise ValueError(f"component must be 1 or 2, got {i!r}")

    def swapped(self) -> "SamplePath":
        return SamplePath(self.x2, self.x1, self.jitter, self.seed)

    def scaled(self, lam: float) -> "SamplePath":
        return SamplePath(lam * self.x1, lam * self.x2, self.jitter, self.seed)


def build_joint_covariance(model: CovarianceModel, n: int) -> np.ndarray:
    """Covariance of ``(X1(1/n..1), X2(1/n..1))`` as a 2n x 2n matrix.

    Blocks ``S_ij[p, q] = C_ij((q - p)/n)``; each block is symmetric Toeplitz.
    """
    GridSpec(n)
    lags = np.arange(n) / n
    c11, c22, c12 = model.entries(lags)
    out = np.empty((2 * n, 2 * n))
    out[:n, :n] = scipy.linalg.toeplitz(c11)
    out[n:, n:] = scipy.linalg.toeplitz(c22)
    cross = scipy.linalg.toeplitz(c12)
    out[:n, n:] = cross
    out[n:, :n] = cross.T
    return out


@dataclass(frozen=True)
class CovarianceFactor:
    """Lower Cholesky factor of the joint covariance, with its diagnostics."""

    n: int
    lower: np.ndarray
    jitter: float
    residual: float | None = None  # max|L L^T - S| / max|S|, un-jittered S


def factorize(model: CovarianceModel, n: int, check_residual: bool = False) -> CovarianceFactor:
    """Cholesky-factorise the joint covariance, escalating jitter on failure.

    Jitter is ``delta * mean(diag S)`` with ``delta`` taken in turn from
    :data:`JITTER_LEVELS`. The reconstruction residual costs a full matrix
    product and is only computed when ``check_residual`` is set.
    """
    sigma = build_joint_covariance(model, n)
    scale = float(np.mean(np.diag(sigma)))
    smax = float(np.max(np.abs(sigma)))
    for delta in (0.0, *JITTER_LEVELS):
        jitter = delta * scale
        try:
            lower = np.linalg.cholesky(sigma + jitter * np.eye(2 * n) if jitter else sigma)
        except np.linalg.LinAlgError:
            continue
        residual = None
        if check_residual:
            residual = float(np.max(np.abs(lower @ lower.T - sigma))) / smax
        return CovarianceFactor(n=n, lower=lower, jitter=jitter, residual=residual)
    raise NotPositiveDefiniteError(
        f"joint covariance for n={n} is not positive definite even with jitter "
        f"{JITTER_LEVELS[-1]:g} * mean variance; the model may be invalid")


def _draw(factor: CovarianceFactor, seed: SeedSpec) -> SamplePath:
    z = seed.generator().standard_normal(2 * factor.n)
    x = factor.lower @ z
    return SamplePath(x[:factor.n], x[factor.n:], factor.jitter, seed)


def simulate_path(model: CovarianceModel, n: int, seed: SeedSpec,
                  factor: CovarianceFactor | None = None) -> SamplePath:
    """One exact draw of the process on the grid ``j/n``, ``j = 1..n``."""
    if factor is None:
        factor = factorize(model, n)
    elif factor.n != n:
        raise ValueError(f"factor was built for n={factor.n}, not n={n}")
    return _draw(factor, seed)


def simulate_ensemble(model: CovarianceModel, n: int, R: int, base_seed: int,
                      factor: CovarianceFactor | None = None,
                      namespace: tuple = ()) -> list[SamplePath]:
    """``R`` independent paths; path ``r`` uses ``SeedSpec(base_seed, r)``."""
    if R < 1:
        raise ValueError("R must be at least 1")
    if factor is None:
        factor = factorize(model, n)
    return [_draw(factor, SeedSpec(base_seed, r, namespace)) for r in range(R)]


def _fmt(x: float) -> str:
    return repr(float(x))


def write_paths_csv(paths: SamplePath | Sequence[SamplePath], fh=None) -> str | None:
    """Write paths as CSV.

    A single path gives columns ``j,t,x1,x2``; a sequence gives the long
    format ``replicate,j,t,x1,x2``. Floats are written with ``repr`` so that
    reading back is lossless. Returns the text if ``fh`` is None.
    """
    single = isinstance(paths, SamplePath)
    seq: Iterable[SamplePath] = [paths] if single else paths
    buf = fh if fh is not None else io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["j", "t", "x1", "x2"] if single else ["replicate", "j", "t", "x1", "x2"])
    for r, path in enumerate(seq):
        for j in range(path.n):
            row = [j + 1, _fmt((j + 1) / path.n), _fmt(path.x1[j]), _fmt(path.x2[j])]
            w.writerow(row if single else [r, *row])
    if fh is None:
        return buf.getvalue()
    return None


def read_path_csv(fh) -> SamplePath:
    """Read a single-path CSV written by :func:`write_paths_csv`.

    Raises ``ValueError`` with the offending line number on malformed input.
    """
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("empty CSV file") from None
    header = [h.strip() for h in header]
    try:
        i1, i2 = header.index("x1"), header.index("x2")
    except ValueError:
        raise ValueError(f"line 1: header must contain x1 and x2 columns, got {header}") from None
    x1, x2 = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            x1.append(float(row[i1]))
            x2.append(float(row[i2]))
        except (IndexError, ValueError):
            raise ValueError(f"line {lineno}: cannot parse x1/x2 from {row}") from None
    return SamplePath(np.array(x1), np.array(x2))
