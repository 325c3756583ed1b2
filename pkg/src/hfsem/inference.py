"""Chi-squared quantiles and the goodness-of-fit tests.

The plain test statistic is n times the minimized contrast and is
compared against the chi-squared upper quantile with p-bar - q degrees
of freedom.  The penalized variant replaces q by the size of the
estimated active set of the sparse pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import scipy.special

from .errors import DimensionError, HfsemError
from .matrixcalc import half_dim
from .model import ParameterMask
from .qmle import FitResult
from .realized import RealizedCov


class TestUndefinedError(HfsemError, ValueError):
    """Degrees of freedom would be non-positive (saturated model)."""


@dataclass(frozen=True)
class TestReport:
    statistic: float
    df: int
    critical: float
    p_value: float
    alpha: float
    reject: bool
    kind: str        # "plain" | "penalized"
    df_source: str   # "fixed" | "estimated-active-set"

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "df": self.df,
            "critical": self.critical,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "reject": self.reject,
            "kind": self.kind,
            "df_source": self.df_source,
        }

    def to_csv_row(self) -> str:
        return "%.17g,%d,%.17g,%.17g,%d" % (
            self.statistic, self.df, self.critical, self.p_value, int(self.reject))


def chi2_upper_quantile(df: int, alpha: float) -> float:
    """x with P(chi2_df > x) = alpha, by inverting the regularized incomplete gamma."""
    if df < 1:
        raise DimensionError(f"degrees of freedom must be >= 1, got {df}")
    if not 0.0 < alpha < 1.0:
        raise DimensionError(f"alpha must lie strictly inside (0, 1), got {alpha}")
    return float(scipy.special.chdtri(df, alpha))


def chi2_sf(df: int, x: float) -> float:
    """Upper tail probability P(chi2_df > x)."""
    return float(scipy.special.chdtrc(df, x))


def _report(statistic: float, df: int, alpha: float, kind: str, df_source: str) -> TestReport:
    critical = chi2_upper_quantile(df, alpha)
    return TestReport(
        statistic=float(statistic), df=df, critical=critical,
        p_value=chi2_sf(df, statistic), alpha=float(alpha),
        reject=bool(statistic > critical), kind=kind, df_source=df_source,
    )


def gof_test(rc: RealizedCov, fit_result: FitResult, mask: ParameterMask,
             alpha: float = 0.05) -> TestReport:
    """Quasi-likelihood ratio test of the covariance structure.

    The statistic n * F(theta_hat) is asymptotically chi-squared with
    p-bar - q degrees of freedom under a correct structure.
    """
    df = half_dim(mask.p) - mask.q
    if df <= 0:
        raise TestUndefinedError(
            f"saturated model: p-bar - q = {df}, the test is undefined")
    statistic = rc.n * fit_result.contrast
    return _report(statistic, df, alpha, kind="plain", df_source="fixed")


def penalized_gof_test(rc: RealizedCov, po_fit: FitResult, active_count: int,
                       mask: ParameterMask, alpha: float = 0.05) -> TestReport:
    """Penalized quasi-likelihood ratio test with estimated degrees of freedom.

    ``po_fit`` is the refit on the estimated support and ``active_count``
    the size of that support; the degrees of freedom are
    p-bar - active_count.
    """
    pbar = half_dim(mask.p)
    if active_count >= pbar:
        raise TestUndefinedError(
            f"active set of size {active_count} leaves no degrees of freedom (p-bar = {pbar})")
    statistic = rc.n * po_fit.contrast
    return _report(statistic, pbar - active_count, alpha,
                   kind="penalized", df_source="estimated-active-set")
