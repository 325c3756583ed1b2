"""Realized covariance of a discretely observed path."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import DataError, DimensionError, NotPositiveDefiniteError
from .matrixcalc import asymcov_w, symmetrize, vech
from .sde import PathSample

# Increments are accumulated in fixed-size chunks that are then combined
# pairwise, so the summation order (and hence the result, bit for bit)
# never depends on threading or call context.
_CHUNK = 4096


@dataclass(frozen=True)
class RealizedCov:
    """Sum of increment outer products divided by the horizon."""

    q: np.ndarray
    n: int
    horizon: float

    @property
    def p(self) -> int:
        return self.q.shape[0]


@numba.njit(cache=True)
def _chunk_outer_sums(dx, chunk):  # pragma: no cover - compiled
    n, p = dx.shape
    nchunks = (n + chunk - 1) // chunk
    sums = np.zeros((nchunks, p, p))
    for c in range(nchunks):
        lo = c * chunk
        hi = min(lo + chunk, n)
        for i in range(lo, hi):
            for a in range(p):
                for b in range(a, p):
                    sums[c, a, b] += dx[i, a] * dx[i, b]
    return sums


def _pairwise_reduce(sums: np.ndarray) -> np.ndarray:
    while sums.shape[0] > 1:
        m = sums.shape[0]
        half = (m + 1) // 2
        nxt = sums[:half].copy()
        nxt[: m - half] += sums[half:]
        sums = nxt
    return sums[0]


def realized_cov_from_array(x: np.ndarray, horizon: float) -> RealizedCov:
    """Realized covariance from a (rows, p) observation array."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DimensionError("need at least two observation rows")
    bad = np.where(~np.isfinite(x).all(axis=1))[0]
    if bad.size:
        raise DataError(f"non-finite observation at row {int(bad[0])}")
    dx = np.ascontiguousarray(np.diff(x, axis=0))
    upper_sum = _pairwise_reduce(_chunk_outer_sums(dx, _CHUNK))
    full = np.triu(upper_sum) + np.triu(upper_sum, 1).T
    return RealizedCov(q=full / horizon, n=dx.shape[0], horizon=float(horizon))


def realized_cov(path: PathSample) -> RealizedCov:
    """Realized covariance of a simulated path."""
    return realized_cov_from_array(path.x, path.grid.horizon)


def clt_zscores(rc: RealizedCov, sigma0: np.ndarray) -> np.ndarray:
    """Componentwise z-scores of vech(Q) against vech(Sigma0).

    Returns sqrt(n) (vech Q - vech Sigma0) divided by the theoretical
    asymptotic standard deviations, i.e. the square roots of the diagonal
    of 2 D_p^+ (Sigma0 (x) Sigma0) D_p^+T.
    """
    sigma0 = symmetrize(np.asarray(sigma0, dtype=float))
    if sigma0.shape[0] != rc.p:
        raise DimensionError(f"sigma0 must be {rc.p}x{rc.p}")
    w = asymcov_w(sigma0)  # raises NotPositiveDefiniteError when sigma0 is not PD
    diff = vech(rc.q) - vech(sigma0)
    return np.sqrt(rc.n) * diff / np.sqrt(np.diag(w))
