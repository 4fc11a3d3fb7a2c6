"""Portmanteau tests valid under uncorrelated but dependent innovations.

Under weak innovations the classical statistics are asymptotically distributed
as a weighted mixture sum_i xi_i Z_i^2 whose weights are eigenvalues of the
asymptotic covariance of the residual autocorrelations. That covariance is
assembled from three pieces: the long-run variance Xi of the stacked process

    w_t = ( -2 sigma^-2 e_t J^-1 de_t/dtheta ,  e_t e_{t-1}, ..., e_t e_{t-m} ),

the estimation-effect matrix Phi_m of cross-products between lagged residuals
and residual derivatives, and the residual variance. The block product
Lambda Xi Lambda' with Lambda = (Phi_m | I_m) collapses the sum of the four
covariance terms into one quadratic form.
"""

from dataclasses import dataclass

import numpy as np

from .acf import TestReport, acf, portmanteau_statistic
from .exceptions import NonPsdEstimateError
from .lrv import LongRunVariance, long_run_variance
from .quadform import mixture_quantile, quadform_tail
from .validation import check_count, check_prob, symmetrize

NEG_EIG_TOL = 1e-8


@dataclass(frozen=True)
class MixtureLaw:
    """Weights of a chi-square mixture, sorted in decreasing order."""

    xi: np.ndarray

    @property
    def m(self):
        return self.xi.size

    def tail(self, x):
        return quadform_tail(self.xi, x)

    def quantile(self, prob):
        return mixture_quantile(self.xi, prob)


def lagged_residual_matrix(resid, m):
    """Matrix with columns e_{t-1}, ..., e_{t-m}; pre-sample values are zero."""
    n = resid.size
    lagged = np.zeros((n, m))
    for h in range(1, m + 1):
        lagged[h:, h - 1] = resid[:-h]
    return lagged


def build_w(fit, m):
    """Stacked score / autocovariance process, one row per observation.

    The first ``fit.k_free`` columns are -2 sigma^-2 e_t J^-1 (de_t/dtheta);
    the last m columns are e_t * (e_{t-1}, ..., e_{t-m}).
    """
    m = check_count(m, "m", minimum=1)
    j_inv = np.linalg.inv(fit.J)
    w1 = (-2.0 / fit.sigma2) * (fit.residuals[:, None] * fit.gradients) @ j_inv
    w2 = lagged_residual_matrix(fit.residuals, m) * fit.residuals[:, None]
    return np.hstack([w1, w2])


def phi_hat(fit, m):
    """Estimation-effect matrix: n^-1 sum_t (e_{t-1},...,e_{t-m})' de_t/dtheta'."""
    m = check_count(m, "m", minimum=1)
    lagged = lagged_residual_matrix(fit.residuals, m)
    return (lagged.T @ fit.gradients) / fit.n


def sigma_rho(fit, phi, lrv, m):
    """Asymptotic covariance of sqrt(n) rho_m and its mixture law.

    Parameters
    ----------
    fit : FitResult
    phi : ndarray of shape (m, k_free)
    lrv : LongRunVariance or ndarray
        Long-run variance of the rows of :func:`build_w`.
    m : int

    Returns
    -------
    (ndarray of shape (m, m), MixtureLaw)
    """
    xi_mat = lrv.matrix if isinstance(lrv, LongRunVariance) else np.asarray(lrv)
    k = fit.k_free
    if xi_mat.shape != (k + m, k + m):
        raise ValueError(f"long-run variance must be {(k + m, k + m)}, got {xi_mat.shape}")
    lam = np.hstack([phi, np.eye(m)])
    sig_gamma = symmetrize(lam @ xi_mat @ lam.T)
    sig_rho = sig_gamma / fit.sigma2 ** 2
    eigs = np.linalg.eigvalsh(sig_rho)[::-1]
    top = max(eigs[0], 0.0)
    if eigs[-1] < -NEG_EIG_TOL * max(top, 1.0):
        raise NonPsdEstimateError(
            f"covariance estimate has eigenvalue {eigs[-1]:.3e}; "
            "inputs are inconsistent")
    return sig_rho, MixtureLaw(xi=np.clip(eigs, 0.0, None))


def mixture_law(fit, m, r_max=5):
    """Convenience: the fitted mixture law and covariance at lag depth m."""
    w = build_w(fit, m)
    lrv = long_run_variance(w, r_max=r_max)
    phi = phi_hat(fit, m)
    sig, law = sigma_rho(fit, phi, lrv, m)
    return sig, law, lrv


def modified_test(fit, m, kind="LB", alpha=0.05, r_max=5, compute_critical=True):
    """Weak-noise-valid portmanteau test with a data-dependent mixture law.

    Unlike the classical test this stays applicable for m <= k0. The critical
    value is found by bisection on the mixture tail; set
    ``compute_critical=False`` to skip it when only the p-value is needed.
    """
    alpha = check_prob(alpha, "alpha")
    acfset = acf(fit.residuals, m)
    stat = portmanteau_statistic(acfset, kind)
    _, law, _ = mixture_law(fit, m, r_max=r_max)
    p = law.tail(stat)
    crit = law.quantile(1.0 - alpha) if compute_critical else None
    reject = stat > crit if crit is not None else p < alpha
    return TestReport(method=f"{kind}_W", m=m, statistic=stat,
                      distribution=f"chi-square mixture ({m} weights)",
                      critical_value=crit, p_value=p, alpha=alpha, reject=reject)


def acf_bands_weak(fit, m, alpha=0.05, sig_rho_mat=None, r_max=5):
    """Per-lag significance half-widths for the residual autocorrelations.

    Band at lag h is z_{1-alpha/2} * sqrt(Sigma_rho[h,h] / n); wider than the
    classical 1.96/sqrt(n) whenever dependence inflates the variance.
    """
    from scipy.stats import norm

    alpha = check_prob(alpha, "alpha")
    if sig_rho_mat is None:
        sig_rho_mat, _, _ = mixture_law(fit, m, r_max=r_max)
    z = norm.ppf(1.0 - alpha / 2.0)
    return z * np.sqrt(np.clip(np.diag(sig_rho_mat), 0.0, None) / fit.n)
