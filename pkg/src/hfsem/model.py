"""Parametric LISREL covariance structure.

A model is described by a ParameterMask: every entry of the eight
structural matrices is either fixed to a constant or bound to one of q
free slots with box bounds.  Slots are numbered in a fixed scan order
(loadings and regression matrices row by row, symmetric covariance
matrices in vech order) so a theta vector has one canonical layout per
model.  Two entries may share a slot, which expresses an equality
constraint.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, ConsistencyError, DimensionError, ModelError
from .matrixcalc import symmetrize, vech

MATRIX_NAMES = (
    "lambda_x1",
    "lambda_x2",
    "gamma",
    "b",
    "sigma_xi_xi",
    "sigma_delta_delta",
    "sigma_eps_eps",
    "sigma_zeta_zeta",
)
SYMMETRIC_NAMES = frozenset(MATRIX_NAMES[4:])

# LU pivots of I - B below this times ||I - B|| count as singular.
PSI_PIVOT_RTOL = 1e-12


@dataclass(frozen=True)
class MatrixMask:
    """Entry tags for a single structural matrix.

    slot[i, j] is the free-slot index of entry (i, j), or -1 when the
    entry is fixed at fixed[i, j].  Symmetric matrices carry slots on the
    lower triangle only; the upper triangle mirrors it implicitly.
    """

    name: str
    slot: np.ndarray
    fixed: np.ndarray
    symmetric: bool

    @property
    def shape(self):
        return self.slot.shape


@dataclass(frozen=True)
class ParameterMask:
    p1: int
    p2: int
    k1: int
    k2: int
    matrices: dict
    q: int
    lower: np.ndarray
    upper: np.ndarray
    labels: tuple

    @property
    def p(self) -> int:
        return self.p1 + self.p2

    def clip(self, theta: np.ndarray) -> np.ndarray:
        return np.clip(theta, self.lower, self.upper)

    def validate_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.q,):
            raise DimensionError(f"theta must have length {self.q}, got shape {theta.shape}")
        if np.any(theta < self.lower - 1e-12) or np.any(theta > self.upper + 1e-12):
            bad = [self.labels[j] for j in range(self.q)
                   if theta[j] < self.lower[j] - 1e-12 or theta[j] > self.upper[j] + 1e-12]
            raise ConsistencyError(f"theta outside the parameter box at slots: {', '.join(bad)}")
        return theta


@dataclass(frozen=True)
class ModelSpec:
    """A named model: mask plus optimizer start and optional truth."""

    name: str
    mask: ParameterMask
    theta_init: np.ndarray
    theta_true: Optional[np.ndarray] = None


def _entry_positions(name: str, shape) -> list:
    """Scan order of the entries that can carry slots."""
    rows, cols = shape
    if name in SYMMETRIC_NAMES:
        # vech order: column by column, diagonal downwards
        return [(i, j) for j in range(cols) for i in range(j, rows)]
    return [(i, j) for i in range(rows) for j in range(cols)]


def _matrix_shapes(p1, p2, k1, k2):
    return {
        "lambda_x1": (p1, k1),
        "lambda_x2": (p2, k2),
        "gamma": (k2, k1),
        "b": (k2, k2),
        "sigma_xi_xi": (k1, k1),
        "sigma_delta_delta": (p1, p1),
        "sigma_eps_eps": (p2, p2),
        "sigma_zeta_zeta": (k2, k2),
    }


def build_mask(dims: dict, tags: dict) -> ParameterMask:
    """Assemble a ParameterMask from per-entry tag grids.

    ``tags[name][i][j]`` is a plain number (fixed value), the dict
    {"fixed": v}, or {"free": {"lo": a, "hi": b}} optionally carrying a
    "tie" label to share the slot with other entries.
    """
    try:
        p1, p2, k1, k2 = (int(dims[k]) for k in ("p1", "p2", "k1", "k2"))
    except KeyError as exc:
        raise ConfigError(f"dims must define p1, p2, k1, k2 (missing {exc})") from exc
    shapes = _matrix_shapes(p1, p2, k1, k2)

    matrices = {}
    lower, upper, labels = [], [], []
    ties = {}
    next_slot = 0

    for name in MATRIX_NAMES:
        shape = shapes[name]
        grid = tags.get(name)
        if grid is None:
            raise ConfigError(f"model config is missing the '{name}' tag grid")
        grid = list(grid)
        if len(grid) != shape[0] or any(len(row) != shape[1] for row in grid):
            raise ConfigError(f"'{name}' tag grid must be {shape[0]}x{shape[1]}")
        slot = np.full(shape, -1, dtype=int)
        fixed = np.zeros(shape)
        for (i, j) in _entry_positions(name, shape):
            tag = grid[i][j]
            if isinstance(tag, (int, float)):
                tag = {"fixed": float(tag)}
            if "fixed" in tag:
                fixed[i, j] = float(tag["fixed"])
                continue
            if "free" not in tag:
                raise ConfigError(f"entry {name}[{i + 1},{j + 1}] must be 'fixed' or 'free'")
            if name == "b" and i == j:
                raise ModelError("diagonal entries of the structural loading matrix must stay fixed at 0")
            spec = tag["free"]
            lo, hi = float(spec.get("lo", -100.0)), float(spec.get("hi", 100.0))
            if not lo < hi:
                raise ConfigError(f"empty bound interval for {name}[{i + 1},{j + 1}]")
            tie = spec.get("tie")
            if tie is not None and tie in ties:
                k = ties[tie]
                if (lo, hi) != (lower[k], upper[k]):
                    raise ConfigError(f"tied slots must share bounds (tie '{tie}')")
                slot[i, j] = k
                continue
            slot[i, j] = next_slot
            if tie is not None:
                ties[tie] = next_slot
            lower.append(lo)
            upper.append(hi)
            labels.append(f"{name}[{i + 1},{j + 1}]")
            next_slot += 1
        if name == "b" and np.any(np.diag(fixed) != 0):
            raise ModelError("diagonal entries of the structural loading matrix must be 0")
        if name in SYMMETRIC_NAMES:
            fixed = np.tril(fixed) + np.tril(fixed, -1).T
        matrices[name] = MatrixMask(name=name, slot=slot, fixed=fixed,
                                    symmetric=name in SYMMETRIC_NAMES)

    return ParameterMask(
        p1=p1, p2=p2, k1=k1, k2=k2, matrices=matrices, q=next_slot,
        lower=np.array(lower), upper=np.array(upper), labels=tuple(labels),
    )


def unpack(mask: ParameterMask, theta) -> dict:
    """Materialize the eight structural matrices for a theta vector."""
    theta = mask.validate_theta(theta)
    out = {}
    for name, mm in mask.matrices.items():
        m = mm.fixed.copy()
        free = mm.slot >= 0
        m[free] = theta[mm.slot[free]]
        if mm.symmetric:
            m = np.tril(m) + np.tril(m, -1).T
        out[name] = m
    return out


def pack(mask: ParameterMask, matrices: dict) -> np.ndarray:
    """Extract theta from full matrices, checking fixed entries.

    Raises ConsistencyError listing every entry that disagrees with its
    fixed value, or every slot whose tied/mirrored entries disagree.
    """
    theta = np.full(mask.q, np.nan)
    offenders = []
    for name, mm in mask.matrices.items():
        m = np.asarray(matrices[name], dtype=float)
        if m.shape != mm.shape:
            raise DimensionError(f"matrix '{name}' must have shape {mm.shape}")
        for (i, j) in _entry_positions(name, mm.shape):
            k = mm.slot[i, j]
            if k < 0:
                if m[i, j] != mm.fixed[i, j]:
                    offenders.append(f"{name}[{i + 1},{j + 1}]={m[i, j]!r} (fixed {mm.fixed[i, j]!r})")
                continue
            if np.isnan(theta[k]):
                theta[k] = m[i, j]
            elif theta[k] != m[i, j]:
                offenders.append(f"{name}[{i + 1},{j + 1}] breaks equality on slot {mask.labels[k]}")
        if mm.symmetric and not np.array_equal(m, m.T):
            offenders.append(f"matrix '{name}' is not symmetric")
    if offenders:
        raise ConsistencyError("inconsistent matrices: " + "; ".join(offenders))
    return theta


def _psi_inverse(b: np.ndarray) -> np.ndarray:
    """Inverse of Psi = I - B through LU with a pivot-size check."""
    import scipy.linalg

    k2 = b.shape[0]
    psi = np.eye(k2) - b
    lu, piv = scipy.linalg.lu_factor(psi, check_finite=False)
    tol = PSI_PIVOT_RTOL * max(np.linalg.norm(psi), 1e-300)
    if np.abs(np.diag(lu)).min() < tol:
        raise ModelError("I - B is numerically singular")
    return scipy.linalg.lu_solve((lu, piv), np.eye(k2), check_finite=False)


def build_sigma(mask: ParameterMask, theta) -> np.ndarray:
    """Covariance structure implied by theta, exactly symmetric."""
    m = unpack(mask, theta)
    return _sigma_from_matrices(m)


def _sigma_from_matrices(m: dict) -> np.ndarray:
    lx1, lx2, gam = m["lambda_x1"], m["lambda_x2"], m["gamma"]
    sxx, sdd, see, szz = (m["sigma_xi_xi"], m["sigma_delta_delta"],
                          m["sigma_eps_eps"], m["sigma_zeta_zeta"])
    pinv = _psi_inverse(m["b"])
    m2 = lx2 @ pinv
    s11 = lx1 @ sxx @ lx1.T + sdd
    s12 = lx1 @ sxx @ gam.T @ m2.T
    s22 = m2 @ (gam @ sxx @ gam.T + szz) @ m2.T + see
    return symmetrize(np.block([[s11, s12], [s12.T, s22]]))


def sigma_and_jacobian(mask: ParameterMask, theta) -> tuple[np.ndarray, np.ndarray]:
    """Sigma(theta) together with the p-bar x q Jacobian of vech Sigma.

    The derivative of each slot is assembled analytically from the matrix
    product rules, including d(Psi^{-1}) = Psi^{-1} dB Psi^{-1} for free
    entries of the structural loading matrix.
    """
    mats = unpack(mask, theta)
    lx1, lx2, gam = mats["lambda_x1"], mats["lambda_x2"], mats["gamma"]
    sxx, szz = mats["sigma_xi_xi"], mats["sigma_zeta_zeta"]
    pinv = _psi_inverse(mats["b"])
    p1, p2, p, q = mask.p1, mask.p2, mask.p, mask.q

    m2 = lx2 @ pinv                                  # p2 x k2
    cmat = gam @ sxx @ gam.T + szz                   # k2 x k2
    ls = lx1 @ sxx                                   # p1 x k1
    nmat = m2 @ gam                                  # p2 x k1
    u12 = ls @ gam.T @ pinv.T                        # p1 x k2
    pcpl = pinv @ cmat @ m2.T                        # k2 x p2

    s11 = ls @ lx1.T + mats["sigma_delta_delta"]
    s12 = u12 @ lx2.T
    s22 = m2 @ cmat @ m2.T + mats["sigma_eps_eps"]
    sigma = symmetrize(np.block([[s11, s12], [s12.T, s22]]))

    dstack = np.zeros((q, p, p))
    sxl = sxx @ lx1.T                                # k1 x p1
    t12 = sxx @ gam.T @ m2.T                         # k1 x p2

    def upper(d11=None, d12=None, d22=None, k=0):
        d = dstack[k]
        if d11 is not None:
            d[:p1, :p1] += d11
        if d12 is not None:
            d[:p1, p1:] += d12
            d[p1:, :p1] += d12.T
        if d22 is not None:
            d[p1:, p1:] += d22

    for name, mm in mask.matrices.items():
        free = np.argwhere(mm.slot >= 0)
        for (i, j) in free:
            k = mm.slot[i, j]
            if name == "lambda_x1":
                d11 = np.zeros((p1, p1))
                d11[i, :] += sxl[j, :]
                d11[:, i] += ls[:, j]
                d12 = np.zeros((p1, p2))
                d12[i, :] = t12[j, :]
                upper(d11=d11, d12=d12, k=k)
            elif name == "lambda_x2":
                d12 = np.zeros((p1, p2))
                d12[:, i] = u12[:, j]
                d22 = np.zeros((p2, p2))
                d22[i, :] += pcpl[j, :]
                d22[:, i] += pcpl[j, :]
                upper(d12=d12, d22=d22, k=k)
            elif name == "gamma":
                d12 = np.outer(ls[:, j], m2[:, i])
                t = np.outer(m2[:, i], (m2 @ gam @ sxx)[:, j])
                upper(d12=d12, d22=t + t.T, k=k)
            elif name == "b":
                d12 = np.outer(u12[:, j], m2[:, i])
                t = np.outer(m2[:, i], pcpl[j, :])
                upper(d12=d12, d22=t + t.T, k=k)
            elif name == "sigma_xi_xi":
                d11 = np.outer(lx1[:, i], lx1[:, j])
                d12 = np.outer(lx1[:, i], nmat[:, j])
                d22 = np.outer(nmat[:, i], nmat[:, j])
                if i != j:
                    d11 = d11 + d11.T
                    d12 = d12 + np.outer(lx1[:, j], nmat[:, i])
                    d22 = d22 + d22.T
                upper(d11=d11, d12=d12, d22=d22, k=k)
            elif name == "sigma_delta_delta":
                d11 = np.zeros((p1, p1))
                d11[i, j] = d11[j, i] = 1.0
                upper(d11=d11, k=k)
            elif name == "sigma_eps_eps":
                d22 = np.zeros((p2, p2))
                d22[i, j] = d22[j, i] = 1.0
                upper(d22=d22, k=k)
            elif name == "sigma_zeta_zeta":
                d22 = np.outer(m2[:, i], m2[:, j])
                if i != j:
                    d22 = d22 + d22.T
                upper(d22=d22, k=k)

    jac = np.empty((p * (p + 1) // 2, q))
    for k in range(q):
        jac[:, k] = vech(symmetrize(dstack[k]))
    return sigma, jac


def sigma_jacobian(mask: ParameterMask, theta) -> np.ndarray:
    """The p-bar x q matrix of partial derivatives of vech Sigma(theta)."""
    return sigma_and_jacobian(mask, theta)[1]


@dataclass(frozen=True)
class RankReport:
    rank: int
    q: int
    passed: bool
    singular_values: np.ndarray = field(repr=False, default=None)


def check_local_identifiability(mask: ParameterMask, theta) -> RankReport:
    """Numerical rank check of the vech-Sigma Jacobian at theta.

    The model is locally identifiable at theta when the Jacobian has full
    column rank q (singular values above 1e-8 times the largest).
    """
    jac = sigma_jacobian(mask, theta)
    sv = np.linalg.svd(jac, compute_uv=False)
    rank = int(np.sum(sv > 1e-8 * sv[0])) if sv.size else 0
    return RankReport(rank=rank, q=mask.q, passed=rank == mask.q, singular_values=sv)


def parse_model_config(doc: dict) -> ModelSpec:
    """Build a ModelSpec from a JSON-structured model document."""
    for key in ("name", "dims", "matrices", "theta_init"):
        if key not in doc:
            raise ConfigError(f"model config is missing '{key}'")
    mask = build_mask(doc["dims"], doc["matrices"])
    theta_init = np.asarray(doc["theta_init"], dtype=float)
    if theta_init.shape != (mask.q,):
        raise ConfigError(f"theta_init must have length {mask.q}, got {theta_init.size}")
    mask.validate_theta(theta_init)
    theta_true = None
    if doc.get("theta_true") is not None:
        theta_true = np.asarray(doc["theta_true"], dtype=float)
        if theta_true.shape != (mask.q,):
            raise ConfigError(f"theta_true must have length {mask.q}, got {theta_true.size}")
    return ModelSpec(name=str(doc["name"]), mask=mask, theta_init=theta_init,
                     theta_true=theta_true)
