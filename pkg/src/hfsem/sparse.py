"""Sparse estimation around the initial quasi-likelihood estimate.

The least-squares approximation of the contrast at theta-hat plus an
adaptively weighted L1 penalty admits an exact coordinatewise
soft-threshold solution (identity quadratic form) or a cyclic coordinate
descent (general positive definite quadratic form).  The refit of the
original contrast on the estimated support yields the estimator whose
scaled contrast is the penalized test statistic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionError, ModelError
from .model import MatrixMask, ParameterMask
from .qmle import FitResult, _Objective, fit
from .realized import RealizedCov


@dataclass(frozen=True)
class PenaltyConfig:
    """Adaptive-weight constants: two penalty levels, exponent and screen threshold."""

    lambda1: float
    lambda2: float
    gamma: float
    delta: float

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "gamma", "delta"):
            if not getattr(self, name) > 0:
                raise DimensionError(f"penalty constant '{name}' must be strictly positive")


@dataclass(frozen=True)
class LsaResult:
    theta: np.ndarray
    active_set: tuple
    blocked_slots: tuple  # slots whose positive lower bound prevented an exact zero


@dataclass(frozen=True)
class PlsaResult:
    theta: np.ndarray
    active_set: tuple
    used_identity: bool
    converged: bool
    sweeps: int


@dataclass
class SparseFitResult:
    """Everything the sparse pipeline produced, from initial fit to refit."""

    init_fit: FitResult
    kappa: np.ndarray
    excluded_slots: tuple
    lsa: LsaResult
    po_fit: FitResult
    plsa: Optional[PlsaResult] = None
    delta_warnings: tuple = field(default_factory=tuple)

    @property
    def active_set(self) -> tuple:
        return self.lsa.active_set

    @property
    def theta_po(self) -> np.ndarray:
        return self.po_fit.theta

    def to_dict(self, labels=None) -> dict:
        name = (lambda j: labels[j]) if labels else (lambda j: f"theta[{j + 1}]")
        out = {
            "initial_fit": self.init_fit.to_dict(labels),
            "kappa": {name(j): float(v) for j, v in enumerate(self.kappa)},
            "excluded_slots": [name(j) for j in self.excluded_slots],
            "theta_lsa": {name(j): float(v) for j, v in enumerate(self.lsa.theta)},
            "active_set": [name(j) for j in self.active_set],
            "active_count": len(self.active_set),
            "blocked_slots": [name(j) for j in self.lsa.blocked_slots],
            "po_fit": self.po_fit.to_dict(labels),
            "delta_warnings": [name(j) for j in self.delta_warnings],
        }
        if self.plsa is not None:
            out["theta_plsa"] = {name(j): float(v) for j, v in enumerate(self.plsa.theta)}
            out["plsa_used_identity"] = self.plsa.used_identity
            out["plsa_converged"] = self.plsa.converged
        return out


def adaptive_weights(theta_init, cfg: PenaltyConfig) -> np.ndarray:
    """Per-slot penalty weights from the initial estimate.

    Slots at or above the screen threshold delta get the adaptive weight
    lambda1 |theta|^{-gamma}; slots below it get the heavy weight lambda2.
    """
    theta_init = np.asarray(theta_init, dtype=float)
    big = np.abs(theta_init) >= cfg.delta
    with np.errstate(divide="ignore"):
        adaptive = cfg.lambda1 * np.abs(theta_init) ** (-cfg.gamma)
    return np.where(big, adaptive, cfg.lambda2)


def _soft_threshold(value: float, threshold: float) -> float:
    return float(np.sign(value) * max(abs(value) - threshold, 0.0))


def lsa_estimate(theta_init, kappa, lower, upper) -> LsaResult:
    """Exact minimizer of the identity-form penalized least squares.

    Coordinatewise soft threshold at kappa/2 followed by box clipping;
    entries whose unclipped minimizer is zero are stored as exact zeros.
    A slot whose soft threshold hits zero but whose lower bound is
    positive cannot be zeroed; it is clipped and reported as blocked.
    """
    theta_init = np.asarray(theta_init, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    if np.any(kappa < 0):
        raise DimensionError("weights must be non-negative")
    out = np.empty_like(theta_init)
    blocked = []
    for j, (v, k) in enumerate(zip(theta_init, kappa)):
        s = _soft_threshold(v, 0.5 * k)
        clipped = min(max(s, lower[j]), upper[j])
        if s == 0.0 and lower[j] > 0.0:
            blocked.append(j)
        out[j] = clipped
    active = tuple(int(j) for j in np.where(out != 0.0)[0])
    return LsaResult(theta=out, active_set=active, blocked_slots=tuple(blocked))


PLSA_TOL = 1e-10
PLSA_MAX_SWEEPS = 10_000


def plsa_estimate(theta_init, kappa, g, lower, upper,
                  tol: float = PLSA_TOL, max_sweeps: int = PLSA_MAX_SWEEPS) -> PlsaResult:
    """Penalized least squares with a general quadratic form.

    Minimizes (theta - theta_hat)' G (theta - theta_hat) + sum kappa_j |theta_j|
    by cyclic coordinate descent with exact scalar updates.  When G is not
    positive definite the identity is used instead (recorded in the result).
    """
    theta_hat = np.asarray(theta_init, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    q = theta_hat.size
    g = np.asarray(g, dtype=float)
    used_identity = False
    try:
        np.linalg.cholesky(0.5 * (g + g.T))
    except np.linalg.LinAlgError:
        used_identity = True
        g = np.eye(q)
    g = 0.5 * (g + g.T)

    theta = theta_hat.copy()
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        delta_max = 0.0
        for j in range(q):
            # scalar subproblem: a (t - c)^2 + kappa_j |t| on [lower_j, upper_j]
            a = g[j, j]
            resid = g[j] @ (theta - theta_hat) - a * (theta[j] - theta_hat[j])
            c = theta_hat[j] - resid / a
            t = _soft_threshold(c, 0.5 * kappa[j] / a)
            t = min(max(t, lower[j]), upper[j])
            delta_max = max(delta_max, abs(t - theta[j]))
            theta[j] = t
        if delta_max < tol:
            converged = True
            break
    active = tuple(int(j) for j in np.where(theta != 0.0)[0])
    return PlsaResult(theta=theta, active_set=active, used_identity=used_identity,
                      converged=converged, sweeps=sweeps)


def default_g(rc: RealizedCov, mask: ParameterMask, theta_hat) -> np.ndarray:
    """Half the contrast Hessian at theta-hat.

    Computed by central differences of the analytic gradient and
    symmetrized; positive definiteness is left to the PLSA fallback.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    obj = _Objective(rc, mask)
    q = theta_hat.size
    h = np.zeros((q, q))
    for j in range(q):
        step = 1e-5 * (1.0 + abs(theta_hat[j]))
        tp = theta_hat.copy()
        tp[j] += step
        tm = theta_hat.copy()
        tm[j] -= step
        h[:, j] = (obj.value_and_grad(tp)[1] - obj.value_and_grad(tm)[1]) / (2 * step)
    return 0.25 * (h + h.T)  # symmetrized Hessian, then halved


def restrict_mask(mask: ParameterMask, active_set) -> tuple[ParameterMask, np.ndarray]:
    """Mask with all inactive slots pinned to zero.

    Returns the reduced mask and the index array mapping its slots back
    into the original layout.  Pinning a slot whose lower bound is
    positive would force a variance to zero and raises ModelError.
    """
    active = sorted(int(j) for j in active_set)
    if any(j < 0 or j >= mask.q for j in active):
        raise DimensionError("active set contains out-of-range slot indices")
    inactive = sorted(set(range(mask.q)) - set(active))
    violated = [mask.labels[j] for j in inactive if mask.lower[j] > 0.0]
    if violated:
        raise ModelError(
            "cannot pin positive-lower-bound slots to zero (spuriously zeroed variance?): "
            + ", ".join(violated))
    remap = {old: new for new, old in enumerate(active)}
    matrices = {}
    for name, mm in mask.matrices.items():
        slot = mm.slot.copy()
        fixed = mm.fixed.copy()
        for (i, j) in zip(*np.where(mm.slot >= 0)):
            old = mm.slot[i, j]
            if old in remap:
                slot[i, j] = remap[old]
            else:
                slot[i, j] = -1
                fixed[i, j] = 0.0
                if mm.symmetric:
                    fixed[j, i] = 0.0
        matrices[name] = MatrixMask(name=name, slot=slot, fixed=fixed, symmetric=mm.symmetric)
    idx = np.array(active, dtype=int)
    reduced = ParameterMask(
        p1=mask.p1, p2=mask.p2, k1=mask.k1, k2=mask.k2, matrices=matrices,
        q=len(active), lower=mask.lower[idx], upper=mask.upper[idx],
        labels=tuple(mask.labels[j] for j in active),
    )
    return reduced, idx


def po_refit(rc: RealizedCov, mask: ParameterMask, active_set, theta_init) -> FitResult:
    """Re-minimize the contrast with inactive slots pinned to zero.

    The returned FitResult carries the full-length embedded estimate;
    standard errors of pinned slots are reported as zero.
    """
    theta_init = np.asarray(theta_init, dtype=float)
    reduced, idx = restrict_mask(mask, active_set)
    res = fit(rc, reduced, reduced.clip(theta_init[idx]))
    theta_full = np.zeros(mask.q)
    theta_full[idx] = res.theta
    se_full = None
    if res.se is not None:
        se_full = np.zeros(mask.q)
        se_full[idx] = res.se
    return FitResult(
        theta=theta_full, contrast=res.contrast, loglik=res.loglik,
        converged=res.converged, iterations=res.iterations, grad_norm=res.grad_norm,
        fallback_identity_v=res.fallback_identity_v, n=res.n, h=res.h,
        se=se_full, n_nonpd=res.n_nonpd, message=res.message,
    )


def sparse_pipeline(rc: RealizedCov, mask: ParameterMask, theta_init, cfg: PenaltyConfig,
                    *, init_fit: Optional[FitResult] = None,
                    exclude_positive_lower_bounds: bool = True,
                    with_plsa: bool = False) -> SparseFitResult:
    """Initial fit, adaptive weights, LSA selection and the support refit.

    Slots with a positive lower bound (variance-type parameters) are
    excluded from penalization by default: their weights are set to zero
    so they are never shrunk and always stay active.  Slots whose initial
    estimate lies within twenty percent of the screen threshold delta are
    reported, since the screen is then unreliable.
    """
    if init_fit is None:
        init_fit = fit(rc, mask, theta_init)
    kappa = adaptive_weights(init_fit.theta, cfg)
    excluded = ()
    if exclude_positive_lower_bounds:
        excluded = tuple(int(j) for j in np.where(mask.lower > 0.0)[0])
        kappa = kappa.copy()
        kappa[list(excluded)] = 0.0
    margin = np.abs(np.abs(init_fit.theta) - cfg.delta) <= 0.2 * cfg.delta
    lsa = lsa_estimate(init_fit.theta, kappa, mask.lower, mask.upper)
    po = po_refit(rc, mask, lsa.active_set, init_fit.theta)
    plsa = None
    if with_plsa:
        g = default_g(rc, mask, init_fit.theta)
        plsa = plsa_estimate(init_fit.theta, kappa, g, mask.lower, mask.upper)
    return SparseFitResult(
        init_fit=init_fit, kappa=kappa, excluded_slots=excluded, lsa=lsa,
        po_fit=po, plsa=plsa,
        delta_warnings=tuple(int(j) for j in np.where(margin)[0]),
    )
