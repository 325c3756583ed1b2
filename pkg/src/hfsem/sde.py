"""Simulation of the latent diffusion system and the observed process.

Four latent processes (common factors, two unique-factor blocks and the
structural residual) are integrated by Euler-Maruyama on the grid
t_i = i*h and mapped to the p = p1 + p2 observed coordinates through the
loading matrices and the structural relation eta = (I - B)^{-1}(Gamma xi + zeta).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Optional

import numba
import numpy as np

from .errors import DataError, DimensionError, ModelError, SimulationError
from .matrixcalc import is_pd

# Index of each latent process in the seed-derivation scheme.
PROCESS_ORDER = ("xi", "delta", "eps", "zeta")


@dataclass(frozen=True)
class AffineDrift:
    """Drift field x -> -(A x - b), the Ornstein-Uhlenbeck form."""

    a: np.ndarray
    b: np.ndarray

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.b - self.a @ x


def ou_drift(a, b) -> AffineDrift:
    """Mean-reverting drift x -> -(A x - b)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape[0] != a.shape[1] or a.shape[0] != b.shape[0]:
        raise DimensionError(f"drift shapes do not conform: A {a.shape}, b {b.shape}")
    return AffineDrift(a, b)


@dataclass(frozen=True)
class SamplingGrid:
    """Observation grid t_i = i*h, i = 0..n, horizon T = n*h."""

    n: int
    h: float

    def __post_init__(self):
        if self.n < 1:
            raise DimensionError(f"need at least one increment, got n={self.n}")
        if not self.h > 0:
            raise DimensionError(f"step size must be positive, got h={self.h}")

    @property
    def horizon(self) -> float:
        return self.n * self.h


@dataclass(frozen=True)
class DiffusionSystem:
    """Latent diffusion system plus the measurement/structural matrices.

    Drifts are callables from the current state to the drift vector; the
    affine form produced by ou_drift gets a fast compiled path.  The s_*
    matrices are the constant diffusion coefficients, c_* the initial
    states.  lx1 (p1 x k1), lx2 (p2 x k2), gamma (k2 x k1) and b_mat
    (k2 x k2, zero diagonal) define the observation map.
    """

    drift_xi: Callable[[np.ndarray], np.ndarray]
    drift_delta: Callable[[np.ndarray], np.ndarray]
    drift_eps: Callable[[np.ndarray], np.ndarray]
    drift_zeta: Callable[[np.ndarray], np.ndarray]
    s1: np.ndarray
    s2: np.ndarray
    s3: np.ndarray
    s4: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    c3: np.ndarray
    c4: np.ndarray
    lx1: np.ndarray
    lx2: np.ndarray
    gamma: np.ndarray
    b_mat: np.ndarray

    def __post_init__(self):
        k1, k2 = self.k1, self.k2
        p1, p2 = self.p1, self.p2
        if self.s1.shape[0] != k1 or self.s2.shape[0] != p1:
            raise DimensionError("diffusion matrices do not conform with the loadings")
        if self.s3.shape[0] != p2 or self.s4.shape[0] != k2:
            raise DimensionError("diffusion matrices do not conform with the loadings")
        if self.gamma.shape != (k2, k1) or self.b_mat.shape != (k2, k2):
            raise DimensionError("structural matrices do not conform")
        if np.any(np.diag(self.b_mat) != 0):
            raise ModelError("the structural loading matrix must have a zero diagonal")
        psi = np.eye(k2) - self.b_mat
        if not is_pd(psi @ psi.T):
            raise ModelError("I - B is singular")
        if np.linalg.matrix_rank(self.lx1) < k1:
            raise ModelError("the first loading matrix must have full column rank")
        if not is_pd(self.s2 @ self.s2.T) or not is_pd(self.s3 @ self.s3.T):
            raise ModelError("unique-factor diffusion covariances must be positive definite")

    @property
    def k1(self) -> int:
        return self.lx1.shape[1]

    @property
    def k2(self) -> int:
        return self.lx2.shape[1]

    @property
    def p1(self) -> int:
        return self.lx1.shape[0]

    @property
    def p2(self) -> int:
        return self.lx2.shape[0]

    @property
    def p(self) -> int:
        return self.p1 + self.p2

    def implied_sigma(self) -> np.ndarray:
        """Population covariance structure of the observed increments."""
        sxx = self.s1 @ self.s1.T
        sdd = self.s2 @ self.s2.T
        see = self.s3 @ self.s3.T
        szz = self.s4 @ self.s4.T
        pinv = np.linalg.inv(np.eye(self.k2) - self.b_mat)
        s11 = self.lx1 @ sxx @ self.lx1.T + sdd
        s12 = self.lx1 @ sxx @ self.gamma.T @ pinv.T @ self.lx2.T
        s22 = self.lx2 @ pinv @ (self.gamma @ sxx @ self.gamma.T + szz) @ pinv.T @ self.lx2.T + see
        out = np.block([[s11, s12], [s12.T, s22]])
        return 0.5 * (out + out.T)


@dataclass(frozen=True)
class PathSample:
    """Discretely observed process on a sampling grid."""

    grid: SamplingGrid
    x: np.ndarray  # (n+1, p)
    seed: int
    latent: Optional[dict] = field(default=None, repr=False)

    @property
    def p(self) -> int:
        return self.x.shape[1]


@numba.njit(cache=True)
def _em_affine(a, b, s_sqh, c0, h, z, out):  # pragma: no cover - compiled
    d = c0.shape[0]
    y = c0.copy()
    for k in range(d):
        out[0, k] = y[k]
    n = z.shape[0]
    for i in range(n):
        drift = b - a @ y
        y = y + drift * h + s_sqh @ z[i]
        for k in range(d):
            out[i + 1, k] = y[k]
    return out


def euler_maruyama(drift, s, c0, grid: SamplingGrid, rng: np.random.Generator) -> np.ndarray:
    """Euler-Maruyama path of dY = drift(Y) dt + S dW on the grid.

    The Gaussian innovations are drawn as one (n, r) block of standard
    normals from ``rng`` in row order, which fixes the stream layout per
    seed.  Returns the (n+1, d) array of states including Y_0 = c0.
    """
    s = np.atleast_2d(np.asarray(s, dtype=float))
    c0 = np.atleast_1d(np.asarray(c0, dtype=float))
    d, r = s.shape
    if c0.shape[0] != d:
        raise DimensionError(f"initial state has length {c0.shape[0]}, diffusion has {d} rows")
    z = rng.standard_normal((grid.n, r))
    s_sqh = s * np.sqrt(grid.h)
    out = np.empty((grid.n + 1, d))
    if isinstance(drift, AffineDrift):
        _em_affine(np.ascontiguousarray(drift.a), np.ascontiguousarray(drift.b),
                   np.ascontiguousarray(s_sqh), np.ascontiguousarray(c0),
                   grid.h, np.ascontiguousarray(z), out)
    else:
        y = c0.copy()
        out[0] = y
        for i in range(grid.n):
            mu = np.asarray(drift(y), dtype=float)
            if not np.all(np.isfinite(mu)):
                raise SimulationError(f"drift returned a non-finite value at step {i}", step=i)
            y = y + mu * grid.h + s_sqh @ z[i]
            out[i + 1] = y
    if not np.all(np.isfinite(out)):
        bad = int(np.where(~np.isfinite(out).all(axis=1))[0][0])
        raise SimulationError(f"simulated state became non-finite at step {bad}", step=bad)
    return out


def process_rng(seed: int, process_index: int) -> np.random.Generator:
    """Independent generator for one latent process, derived from the seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(process_index,)))


def replication_seed(base_seed: int, replication: int) -> int:
    """64-bit seed for one replication, derived from (base seed, index)."""
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(replication,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def simulate_observations(sys: DiffusionSystem, grid: SamplingGrid, seed: int,
                          keep_latent: bool = False) -> PathSample:
    """Simulate the four latent paths and assemble the observed process.

    Each latent process consumes its own RNG stream derived
    deterministically from ``seed`` and the process index, so the same
    (system, grid, seed) triple always reproduces the same sample.
    """
    xi = euler_maruyama(sys.drift_xi, sys.s1, sys.c1, grid, process_rng(seed, 0))
    delta = euler_maruyama(sys.drift_delta, sys.s2, sys.c2, grid, process_rng(seed, 1))
    eps = euler_maruyama(sys.drift_eps, sys.s3, sys.c3, grid, process_rng(seed, 2))
    zeta = euler_maruyama(sys.drift_zeta, sys.s4, sys.c4, grid, process_rng(seed, 3))

    psi = np.eye(sys.k2) - sys.b_mat
    eta = np.linalg.solve(psi, (xi @ sys.gamma.T + zeta).T).T
    x1 = xi @ sys.lx1.T + delta
    x2 = eta @ sys.lx2.T + eps
    x = np.hstack([x1, x2])
    latent = {"xi": xi, "delta": delta, "eps": eps, "zeta": zeta, "eta": eta} if keep_latent else None
    return PathSample(grid=grid, x=x, seed=int(seed), latent=latent)


def path_to_csv(path: PathSample) -> str:
    """Render a path as CSV with header t,x1,...,xp at full precision."""
    buf = io.StringIO()
    p = path.p
    buf.write("t," + ",".join(f"x{j + 1}" for j in range(p)) + "\r\n")
    h = path.grid.h
    for i, row in enumerate(path.x):
        cells = [format(i * h, ".17g")] + [format(v, ".17g") for v in row]
        buf.write(",".join(cells) + "\r\n")
    return buf.getvalue()


def path_from_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Parse a path CSV back into (t, X) arrays, validating finiteness."""
    lines = [ln for ln in text.replace("\r\n", "\n").split("\n") if ln]
    if not lines or not lines[0].startswith("t,"):
        raise DataError("path CSV must start with a 't,x1,...' header line")
    try:
        data = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])
    except ValueError as exc:
        raise DataError(f"malformed numeric cell in path CSV: {exc}") from exc
    if data.ndim != 2 or data.shape[1] < 2:
        raise DataError("path CSV needs a time column and at least one coordinate")
    bad = np.where(~np.isfinite(data).all(axis=1))[0]
    if bad.size:
        raise DataError(f"non-finite values in path CSV at data row {int(bad[0])}")
    return data[:, 0], data[:, 1:]
