"""Residual autocovariances, autocorrelations, and the classical portmanteau tests.

The classical Box-Pierce and Ljung-Box statistics

    Q_bp = n * sum_{h<=m} rho(h)^2,
    Q_lb = n (n+2) * sum_{h<=m} rho(h)^2 / (n - h),

are referred to a chi-square law with m - k0 degrees of freedom, which is only
valid under iid innovations; the weak-noise corrections live in
:mod:`weaksarma.weak` and :mod:`weaksarma.selfnorm`.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import chi2

from .exceptions import DegenerateSeriesError, NotApplicableError
from .validation import check_count, check_series


@dataclass(frozen=True)
class AcfSet:
    """First m sample autocovariances/autocorrelations of a residual series."""

    gamma0: float
    gamma: np.ndarray   # gamma(1..m)
    rho: np.ndarray     # rho(1..m)
    m: int
    n: int


@dataclass(frozen=True)
class TestReport:
    """Outcome of one portmanteau test."""

    method: str                 # e.g. "LB_S", "BP_W", "LB_SN"
    m: int
    statistic: float
    distribution: str
    critical_value: Optional[float]
    p_value: Optional[float]
    alpha: float
    reject: bool
    df: Optional[int] = None

    def summary(self):
        pv = "n/a" if self.p_value is None else f"{self.p_value:.4f}"
        cv = "n/a" if self.critical_value is None else f"{self.critical_value:.4f}"
        flag = "reject" if self.reject else "accept"
        return (f"{self.method:5s} m={self.m:<3d} stat={self.statistic:10.4f} "
                f"crit={cv} p={pv} -> {flag}")


def acf(resid, m):
    """Sample autocovariances gamma(0..m) and autocorrelations rho(1..m).

    gamma(h) = n^{-1} sum_{t=h+1}^n e_t e_{t-h}, divisor n throughout.
    """
    resid = check_series(resid, "residuals")
    n = resid.size
    m = check_count(m, "m", minimum=1)
    if m >= n:
        raise ValueError(f"m must be smaller than the series length {n}, got {m}")
    gamma0 = float(np.dot(resid, resid) / n)
    if gamma0 == 0.0:
        raise DegenerateSeriesError("residuals are identically zero")
    gamma = np.array([np.dot(resid[h:], resid[:-h]) / n for h in range(1, m + 1)])
    return AcfSet(gamma0=gamma0, gamma=gamma, rho=gamma / gamma0, m=m, n=n)


def portmanteau_statistic(acfset, kind):
    """Box-Pierce or Ljung-Box statistic from an AcfSet."""
    if kind not in ("BP", "LB"):
        raise ValueError(f"kind must be 'BP' or 'LB', got {kind!r}")
    n, m = acfset.n, acfset.m
    rho2 = acfset.rho ** 2
    if kind == "BP":
        return float(n * rho2.sum())
    weights = n * (n + 2.0) / (n - np.arange(1, m + 1))
    return float(np.dot(weights, rho2))


def standard_test(acfset, k0, kind="LB", alpha=0.05):
    """Classical portmanteau test with the chi-square(m - k0) reference law.

    Raises
    ------
    NotApplicableError
        When m <= k0; the classical test has no degrees of freedom there.
    """
    k0 = check_count(k0, "k0", minimum=0)
    m = acfset.m
    if m <= k0:
        raise NotApplicableError(
            f"standard test needs m > k0; got m={m}, k0={k0} (reported n.a.)")
    stat = portmanteau_statistic(acfset, kind)
    df = m - k0
    p = float(chi2.sf(stat, df))
    crit = float(chi2.ppf(1.0 - alpha, df))
    return TestReport(method=f"{kind}_S", m=m, statistic=stat,
                      distribution=f"chi-square({df})", critical_value=crit,
                      p_value=p, alpha=alpha, reject=stat > crit, df=df)
