"""Quasi-likelihood contrast and its minimization over the parameter box.

The contrast is the log-determinant discrepancy
F(Q, Sigma(theta)) = log det Sigma(theta) - log det Q + tr(Sigma(theta)^{-1} Q) - p,
equal to -2/n times the log quasi-likelihood ratio against the saturated
model.  When Q is singular the contrast falls back to the squared
euclidean distance of the vech vectors (identity weighting).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.optimize import minimize

from .errors import ModelError, NotPositiveDefiniteError
from .matrixcalc import asymcov_w, logdet_pd, vech
from .model import ParameterMask, sigma_and_jacobian
from .realized import RealizedCov

# Surrogate objective value returned where Sigma(theta) is not positive
# definite; large enough that any line search retreats.
NONPD_PENALTY = 1e10

GRAD_TOL = 1e-8
MAX_ITER = 2000


@dataclass
class FitResult:
    """Minimum contrast estimate with diagnostics."""

    theta: np.ndarray
    contrast: float
    loglik: float
    converged: bool
    iterations: int
    grad_norm: float
    fallback_identity_v: bool
    n: int
    h: float
    se: Optional[np.ndarray] = None
    n_nonpd: int = 0
    message: str = ""

    def to_dict(self, labels=None) -> dict:
        theta = {(labels[j] if labels else f"theta[{j + 1}]"): float(v)
                 for j, v in enumerate(self.theta)}
        out = {
            "theta": theta,
            "contrast": self.contrast,
            "loglik": self.loglik,
            "converged": self.converged,
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "fallback_identity_v": self.fallback_identity_v,
            "n": self.n,
            "h": self.h,
            "n_nonpd": self.n_nonpd,
        }
        if self.se is not None:
            out["se"] = {(labels[j] if labels else f"theta[{j + 1}]"): float(v)
                         for j, v in enumerate(self.se)}
        return out


def _vech_trace_weights(p: int) -> np.ndarray:
    """Multipliers turning vech inner products into full traces (2 off-diagonal)."""
    w = np.full(p * (p + 1) // 2, 2.0)
    k = 0
    for j in range(p):
        w[k] = 1.0
        k += p - j
    return w


class _Objective:
    """Contrast value and gradient for a fixed realized covariance."""

    def __init__(self, rc: RealizedCov, mask: ParameterMask):
        self.rc = rc
        self.mask = mask
        self.p = mask.p
        try:
            self.logdet_q = logdet_pd(rc.q)
            self.singular_q = False
            self.vech_q = None
        except NotPositiveDefiniteError:
            self.logdet_q = math.nan
            self.singular_q = True
            self.vech_q = vech(rc.q)
        if self.singular_q:
            self.vech_q = vech(rc.q)
        self.trace_w = _vech_trace_weights(self.p)
        self.n_nonpd = 0

    def value_only(self, theta) -> float:
        return self.value_and_grad(theta)[0]

    def value_and_grad(self, theta):
        sigma, jac = sigma_and_jacobian(self.mask, theta)
        if self.singular_q:
            r = self.vech_q - vech(sigma)
            return float(r @ r), -2.0 * (jac.T @ r)
        try:
            chol = scipy.linalg.cho_factor(sigma, lower=True, check_finite=False)
        except scipy.linalg.LinAlgError:
            self.n_nonpd += 1
            return NONPD_PENALTY, np.zeros(self.mask.q)
        diag = np.diag(chol[0])
        if np.min(diag) ** 2 <= 1e-12 * np.max(np.diag(sigma)):
            self.n_nonpd += 1
            return NONPD_PENALTY, np.zeros(self.mask.q)
        logdet_sigma = 2.0 * float(np.sum(np.log(diag)))
        sinv_q = scipy.linalg.cho_solve(chol, self.rc.q, check_finite=False)
        value = logdet_sigma - self.logdet_q + float(np.trace(sinv_q)) - self.p
        sinv = scipy.linalg.cho_solve(chol, np.eye(self.p), check_finite=False)
        m = sinv - sinv_q @ sinv  # Sigma^{-1} - Sigma^{-1} Q Sigma^{-1}
        m = 0.5 * (m + m.T)
        grad = jac.T @ (self.trace_w * vech(m))
        return value, grad


def contrast_f(rc: RealizedCov, mask: ParameterMask, theta) -> float:
    """Contrast value at theta (falls back to identity weighting for singular Q).

    Sigma(theta) outside the positive definite cone yields the penalty
    surrogate NONPD_PENALTY rather than an exception, so optimizers can
    retreat.
    """
    return _Objective(rc, mask).value_only(mask.validate_theta(theta))


def contrast_gradient(rc: RealizedCov, mask: ParameterMask, theta) -> np.ndarray:
    """Analytic gradient of the contrast at theta."""
    return _Objective(rc, mask).value_and_grad(mask.validate_theta(theta))[1]


def loglik_value(rc: RealizedCov, mask: ParameterMask, theta, h: float) -> float:
    """Quasi-log-likelihood of the increments at theta."""
    sigma, _ = sigma_and_jacobian(mask, theta)
    logdet_sigma = logdet_pd(sigma)
    tr = float(np.trace(np.linalg.solve(sigma, rc.q)))
    n, p = rc.n, mask.p
    return -0.5 * p * n * math.log(2 * math.pi) - 0.5 * p * n * math.log(h) \
        - 0.5 * n * logdet_sigma - 0.5 * n * tr


def saturated_loglik(rc: RealizedCov, h: float) -> float:
    """Maximum of the quasi-log-likelihood over all covariance matrices."""
    n, p = rc.n, rc.p
    return -0.5 * p * n * math.log(2 * math.pi) - 0.5 * p * n * math.log(h) \
        - 0.5 * n * logdet_pd(rc.q) - 0.5 * n * p


def _projected_gradient(theta, grad, lower, upper) -> np.ndarray:
    step = np.clip(theta - grad, lower, upper)
    return theta - step


def fit(rc: RealizedCov, mask: ParameterMask, theta_init, *,
        multistart: int = 0, seed: int = 0, compute_se: bool = True,
        max_iter: int = MAX_ITER) -> FitResult:
    """Minimize the contrast over the box by projected quasi-Newton (L-BFGS-B).

    Convergence is declared when the infinity norm of the projected
    gradient is below GRAD_TOL * (1 + |F|).  A failed line search yields a
    non-converged result, never an exception.  With ``multistart`` > 0,
    that many additional uniform draws from the box are tried and the
    best optimum kept.
    """
    theta_init = mask.validate_theta(theta_init)
    obj = _Objective(rc, mask)
    bounds = list(zip(mask.lower, mask.upper))

    starts = [theta_init]
    if multistart > 0:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(0xA11,)))
        width = np.minimum(mask.upper, 100.0) - np.maximum(mask.lower, -100.0)
        for _ in range(multistart):
            draw = np.maximum(mask.lower, -100.0) + width * rng.random(mask.q)
            starts.append(mask.clip(draw))

    best = None
    for start in starts:
        res = minimize(obj.value_and_grad, start, jac=True, method="L-BFGS-B",
                       bounds=bounds,
                       options={"maxiter": max_iter, "maxfun": 10 * max_iter,
                                "ftol": 1e-14, "gtol": 1e-10})
        if best is None or res.fun < best.fun:
            best = res

    theta_hat = mask.clip(best.x)
    value, grad = obj.value_and_grad(theta_hat)
    pg = _projected_gradient(theta_hat, grad, mask.lower, mask.upper)
    grad_norm = float(np.max(np.abs(pg))) if pg.size else 0.0
    converged = bool(value < NONPD_PENALTY and grad_norm < GRAD_TOL * (1.0 + abs(value)))
    h = rc.horizon / rc.n
    try:
        ll = loglik_value(rc, mask, theta_hat, h)
    except NotPositiveDefiniteError:
        ll = math.nan
    result = FitResult(
        theta=theta_hat, contrast=float(value), loglik=ll, converged=converged,
        iterations=int(best.nit), grad_norm=grad_norm,
        fallback_identity_v=obj.singular_q, n=rc.n, h=h,
        n_nonpd=obj.n_nonpd, message=str(best.message),
    )
    if compute_se and converged:
        try:
            result.se = standard_errors(result, mask)
        except (ModelError, NotPositiveDefiniteError):
            result.se = None
    return result


def theoretical_se(mask: ParameterMask, theta, n: int) -> np.ndarray:
    """Asymptotic standard errors sqrt(diag((Delta' W^{-1} Delta)^{-1}) / n)."""
    sigma, jac = sigma_and_jacobian(mask, theta)
    w = asymcov_w(sigma)
    winv_jac = scipy.linalg.solve(w, jac, assume_a="pos")
    a = jac.T @ winv_jac
    a = 0.5 * (a + a.T)
    try:
        chol = scipy.linalg.cho_factor(a, check_finite=False)
    except scipy.linalg.LinAlgError:
        eigval, eigvec = np.linalg.eigh(a)
        weak = eigvec[:, 0]
        names = [mask.labels[j] for j in np.where(np.abs(weak) > 0.3)[0]]
        raise ModelError(
            "information matrix is numerically singular; deficient direction involves "
            + ", ".join(names or ["(spread across slots)"])
        )
    cov = scipy.linalg.cho_solve(chol, np.eye(mask.q), check_finite=False)
    return np.sqrt(np.diag(cov) / n)


def standard_errors(fit_result: FitResult, mask: ParameterMask) -> np.ndarray:
    """Asymptotic standard errors of the fitted parameters."""
    if not fit_result.converged:
        raise ModelError("standard errors require a converged fit")
    return theoretical_se(mask, fit_result.theta, fit_result.n)
