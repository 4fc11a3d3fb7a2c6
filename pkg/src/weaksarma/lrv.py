"""Long-run variance of a multivariate series via a VAR spectral estimator.

The long-run variance of v_t is 2*pi times its spectral density at frequency
zero. It is estimated by fitting VAR(r) models to the mean-centered series by
least squares for r = 0..r_max, picking r by AIC, and evaluating the fitted
model's spectrum at zero: A(1)^{-1} Sigma_u A(1)^{-T} with A(1) = I - sum A_i.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .exceptions import UnstableVarError
from .validation import check_count, symmetrize

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class LongRunVariance:
    """A symmetric long-run variance estimate and how it was selected."""

    matrix: np.ndarray
    var_order: int
    aic_trace: tuple

    @property
    def d(self):
        return self.matrix.shape[0]


def _var_normal_blocks(v, r_max):
    """Gram blocks for all VAR fits on the common sample t = r_max+1..n.

    Returns (Y'Y, Z'Z, Z'Y, n_common) where Z stacks lags 1..r_max and the
    leading d*r blocks of Z'Z / Z'Y give the order-r normal equations.
    """
    n, d = v.shape
    n_c = n - r_max
    y = v[r_max:]
    z = np.empty((n_c, d * r_max))
    for lag in range(1, r_max + 1):
        z[:, (lag - 1) * d:lag * d] = v[r_max - lag:n - lag]
    return y.T @ y, z.T @ z, z.T @ y, n_c


def _solve_var(gzz, gzy, gyy, r, d, n_c):
    """Least-squares VAR(r) from leading Gram blocks: (coef, Sigma_u)."""
    if r == 0:
        return np.zeros((0, d)), gyy / n_c
    k = d * r
    try:
        coef = linalg.solve(gzz[:k, :k], gzy[:k], assume_a="pos")
    except linalg.LinAlgError:
        coef, *_ = np.linalg.lstsq(gzz[:k, :k], gzy[:k], rcond=None)
    sigma_u = (gyy - gzy[:k].T @ coef) / n_c
    return coef, sigma_u


def long_run_variance(v, r_max=5):
    """Estimate the long-run variance matrix of the rows of ``v``.

    Parameters
    ----------
    v : ndarray of shape (n, d)
        Multivariate series; it is mean-centered internally and the VAR is
        fitted without intercept.
    r_max : int
        Largest autoregression order tried. Orders that would leave fewer
        rows than regressors are skipped, so short samples are handled by
        capping the search rather than failing.

    Returns
    -------
    LongRunVariance

    Raises
    ------
    UnstableVarError
        If the selected VAR polynomial is close to singular at z = 1.
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    if v.ndim != 2:
        raise ValueError("v must be a (n, d) array")
    r_max = check_count(r_max, "r_max", minimum=0)
    n, d = v.shape
    # keep a comfortable surplus of equations over unknowns per fitted column
    while r_max > 0 and (n - r_max) < d * r_max + d + 1:
        r_max -= 1
    if n < d + 2:
        raise ValueError(f"series too short (n={n}) for a {d}-dimensional long-run variance")
    v = v - v.mean(axis=0)

    gyy, gzz, gzy, n_c = _var_normal_blocks(v, r_max) if r_max > 0 else (v.T @ v, None, None, n)
    aics = []
    fits = []
    for r in range(r_max + 1):
        coef, sigma_u = _solve_var(gzz, gzy, gyy, r, d, n_c)
        sign, logdet = np.linalg.slogdet(symmetrize(sigma_u))
        if sign <= 0:
            aic = np.inf
        else:
            aic = n_c * logdet + 2.0 * r * d * d
        aics.append(aic)
        fits.append((coef, sigma_u))
    r_star = int(np.argmin(aics))

    if r_star == 0:
        sigma_u = (v.T @ v) / n
        lrv = symmetrize(sigma_u)
    else:
        # refit the winner on its own full sample t = r_star+1..n
        gyy_f, gzz_f, gzy_f, n_f = _var_normal_blocks(v, r_star)
        coef, sigma_u = _solve_var(gzz_f, gzy_f, gyy_f, r_star, d, n_f)
        a_one = np.eye(d)
        for lag in range(r_star):
            a_one -= coef[lag * d:(lag + 1) * d].T
        if np.linalg.cond(a_one) > MAX_CONDITION:
            raise UnstableVarError(
                f"VAR({r_star}) polynomial nearly singular at z=1 "
                f"(condition {np.linalg.cond(a_one):.2e})")
        inv = np.linalg.inv(a_one)
        lrv = symmetrize(inv @ sigma_u @ inv.T)
    return LongRunVariance(matrix=lrv, var_order=r_star, aic_trace=tuple(aics))
