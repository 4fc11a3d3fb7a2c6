"""Quasi-maximum likelihood estimation of SARMA models.

The estimator minimizes the mean squared recursive residual Q_n(theta) by a
quasi-Newton iteration with analytic gradients, restricted to the admissible
region (all operator zeros outside the unit disk). The sandwich covariance
Sigma = J^{-1} I J^{-1} combines the empirical Hessian-like matrix J with a
long-run variance I of the score process, so standard errors stay valid when
the innovations are merely uncorrelated rather than independent.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .exceptions import (BoundarySolutionError, DegenerateSeriesError,
                         RankDeficiencyError)
from .lrv import long_run_variance
from .model import SarmaOrder, SarmaSpec, residual_gradient, residuals
from .validation import check_prob, check_series, symmetrize

BOUNDARY_MARGIN = 1e-6


def objective(spec, x):
    """Q_n(theta): mean of the squared recursive residuals."""
    e = residuals(spec, check_series(x))
    return float(np.mean(e * e))


@dataclass(frozen=True)
class FitResult:
    """Everything downstream diagnostics consume from a fitted model."""

    order: SarmaOrder
    theta: np.ndarray          # full coefficient vector, fixed entries are 0
    free_idx: np.ndarray       # indices of estimated coordinates
    sigma2: float              # mean squared residual
    residuals: np.ndarray
    gradients: np.ndarray      # (n, n_free) residual derivatives at theta
    J: np.ndarray              # (n_free, n_free)
    I: np.ndarray
    Sigma: np.ndarray          # J^{-1} I J^{-1}
    se: np.ndarray             # sqrt(diag(Sigma) / n)
    n: int
    n_iter: int
    converged: bool
    lrv_order: int             # VAR order selected for I

    @property
    def spec(self):
        return SarmaSpec(self.order, self.theta)

    @property
    def k_free(self):
        return self.free_idx.size

    @property
    def theta_free(self):
        return self.theta[self.free_idx]

    def coefficient_names(self):
        o = self.order
        names = ([f"ar{i}" for i in range(1, o.p + 1)]
                 + [f"ma{i}" for i in range(1, o.q + 1)]
                 + [f"sar{i}" for i in range(1, o.P + 1)]
                 + [f"sma{i}" for i in range(1, o.Q + 1)])
        return [names[i] for i in self.free_idx]


def _embed(theta_free, free_idx, k0):
    theta = np.zeros(k0)
    theta[free_idx] = theta_free
    return theta


def _bfgs(fun_grad, x0, admissible, gtol, max_iter):
    """Quasi-Newton minimizer with Armijo backtracking.

    Steps landing outside the admissible region are rejected by shrinking,
    which keeps every iterate strictly inside and the recursion well defined.
    Returns (x, f, g, n_iter, converged, hit_floor).
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = fun_grad(x)
    h = np.eye(x.size)
    n_iter = 0
    hit_floor = False
    for n_iter in range(1, max_iter + 1):
        if np.max(np.abs(g)) < gtol:
            return x, f, g, n_iter - 1, True, hit_floor
        d = -h @ g
        slope = d @ g
        if slope >= 0:
            h = np.eye(x.size)
            d = -g
            slope = -(g @ g)
        step = 1.0
        accepted = False
        while step > 1e-14:
            x_new = x + step * d
            if admissible(x_new):
                f_new, g_new = fun_grad(x_new)
                if np.isfinite(f_new) and f_new <= f + 1e-4 * step * slope:
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            hit_floor = True
            break
        s = x_new - x
        yv = g_new - g
        sy = s @ yv
        if sy > 1e-12 * (np.linalg.norm(s) * np.linalg.norm(yv) + 1e-30):
            rho = 1.0 / sy
            hy = h @ yv
            h = (h - rho * (np.outer(s, hy) + np.outer(hy, s))
                 + rho * (1.0 + rho * (yv @ hy)) * np.outer(s, s))
        x, f, g = x_new, f_new, g_new
    converged = np.max(np.abs(g)) < gtol
    return x, f, g, n_iter, converged, hit_floor


def fit_sarma(x, order, fixed_zero=(), starts=4, start_scale=0.1, start_seed=0,
              gtol=1e-8, max_iter=500, lrv_r_max=5):
    """Fit a SARMA model of the given order by quasi-maximum likelihood.

    Parameters
    ----------
    x : array-like
        Observed series, assumed mean-corrected.
    order : SarmaOrder
    fixed_zero : sequence of int
        Coefficient indices (in the theta layout) pinned at zero and excluded
        from estimation; lets restricted models like an AR part with only its
        last coefficient free be fitted.
    starts : int
        Number of random restarts beside the zero start.
    start_scale : float
        Standard deviation of the restart perturbations.
    start_seed : int
        Seed for the restart generator; fixed seed makes the fit deterministic.
    gtol, max_iter : float, int
        Gradient sup-norm stopping rule and iteration cap.
    lrv_r_max : int
        Maximal VAR order in the long-run variance of the score.

    Returns
    -------
    FitResult

    Raises
    ------
    BoundarySolutionError
        If the minimizer ends on the admissibility boundary.
    RankDeficiencyError
        If J is numerically singular.
    """
    x = check_series(x)
    k0 = order.k0
    if k0 == 0:
        raise ValueError("order has no coefficients to estimate")
    fixed_zero = np.asarray(sorted(set(int(i) for i in fixed_zero)), dtype=int)
    if fixed_zero.size and (fixed_zero.min() < 0 or fixed_zero.max() >= k0):
        raise ValueError(f"fixed_zero indices must lie in [0, {k0})")
    free_idx = np.setdiff1d(np.arange(k0), fixed_zero)
    if free_idx.size == 0:
        raise ValueError("all coefficients are fixed; nothing to estimate")
    n = x.size
    if n <= 10 * k0:
        raise ValueError(f"need n > {10 * k0} observations to fit this order, got {n}")

    scale = float(np.sqrt(np.mean(x * x)))
    if scale == 0.0:
        raise DegenerateSeriesError("series is identically zero")
    xs = x / scale  # optimizer sees a unit-scale problem; argmin is unchanged

    def fun_grad(theta_free):
        spec = SarmaSpec(order, _embed(theta_free, free_idx, k0))
        e = residuals(spec, xs)
        g = residual_gradient(spec, xs, free_idx)
        return float(np.mean(e * e)), (2.0 / n) * (g.T @ e)

    def admissible(theta_free):
        return SarmaSpec(order, _embed(theta_free, free_idx, k0)).is_admissible()

    starts_list = [np.zeros(free_idx.size)]
    rng = np.random.Generator(np.random.Philox(key=np.uint64(start_seed)))
    for _ in range(starts):
        for _ in range(20):
            cand = rng.normal(scale=start_scale, size=free_idx.size)
            if admissible(cand):
                starts_list.append(cand)
                break

    best = None
    for x0 in starts_list:
        sol = _bfgs(fun_grad, x0, admissible, gtol, max_iter)
        if best is None or sol[1] < best[1]:
            best = sol
    theta_free, _, _, n_iter, converged, _ = best
    theta = _embed(theta_free, free_idx, k0)
    spec = SarmaSpec(order, theta)
    if not spec.is_admissible(margin=BOUNDARY_MARGIN):
        raise BoundarySolutionError(
            "estimate lies on the admissibility boundary; the fitted order is "
            "likely overdifferenced or misspecified")

    resid = residuals(spec, x)
    grad = residual_gradient(spec, x, free_idx)
    sigma2 = float(np.mean(resid * resid))
    if sigma2 == 0.0:
        raise DegenerateSeriesError("residuals are identically zero")
    j_mat = (2.0 / sigma2) * (grad.T @ grad) / n
    j_eigs = np.linalg.eigvalsh(j_mat)
    if j_eigs.min() <= 1e-10 * max(j_eigs.max(), 1.0):
        raise RankDeficiencyError(
            f"J is numerically singular (eigenvalues {j_eigs}); "
            "the model is likely over-parameterized")
    upsilon = (2.0 / sigma2) * resid[:, None] * grad
    lrv = long_run_variance(upsilon, r_max=lrv_r_max)
    j_inv = np.linalg.inv(j_mat)
    sigma_mat = symmetrize(j_inv @ lrv.matrix @ j_inv)
    se = np.sqrt(np.clip(np.diag(sigma_mat), 0.0, None) / n)
    return FitResult(order=order, theta=theta, free_idx=free_idx, sigma2=sigma2,
                     residuals=resid, gradients=grad, J=j_mat, I=lrv.matrix,
                     Sigma=sigma_mat, se=se, n=n, n_iter=n_iter,
                     converged=converged, lrv_order=lrv.var_order)


def coefficient_inference(fit, level=0.95):
    """Per-coefficient estimates, standard errors, Gaussian p-values and CIs."""
    level = check_prob(level, "level")
    if np.any(fit.se == 0.0):
        raise RankDeficiencyError("zero standard error; inference is degenerate")
    z = norm.ppf(0.5 + level / 2.0)
    rows = []
    for name, est, se in zip(fit.coefficient_names(), fit.theta_free, fit.se):
        stat = est / se
        rows.append({
            "name": name,
            "estimate": float(est),
            "se": float(se),
            "p_value": float(2.0 * norm.sf(abs(stat))),
            "ci_lower": float(est - z * se),
            "ci_upper": float(est + z * se),
        })
    return rows


class SarmaEstimator(BaseEstimator):
    """Seasonal ARMA quasi-maximum likelihood estimator, sklearn style.

    Parameters
    ----------
    p, q : int
        Nonseasonal AR and MA orders.
    P, Q : int
        Seasonal AR and MA orders.
    s : int
        Season length.
    fixed_zero : tuple of int
        Coefficient indices pinned at zero.
    starts, start_scale, start_seed, gtol, max_iter, lrv_r_max :
        Optimization settings, see :func:`fit_sarma`.

    Attributes
    ----------
    result_ : FitResult
    theta_ : ndarray
        Full coefficient vector.
    sigma2_ : float
    resid_ : ndarray
    se_ : ndarray

    Examples
    --------
    >>> est = SarmaEstimator(p=0, q=1, P=0, Q=1, s=12).fit(x)
    >>> est.sigma2_  # doctest: +SKIP
    """

    def __init__(self, p=0, q=1, P=0, Q=1, s=12, fixed_zero=(), starts=4,
                 start_scale=0.1, start_seed=0, gtol=1e-8, max_iter=500,
                 lrv_r_max=5):
        self.p = p
        self.q = q
        self.P = P
        self.Q = Q
        self.s = s
        self.fixed_zero = fixed_zero
        self.starts = starts
        self.start_scale = start_scale
        self.start_seed = start_seed
        self.gtol = gtol
        self.max_iter = max_iter
        self.lrv_r_max = lrv_r_max

    def _order(self):
        return SarmaOrder(self.p, self.q, self.P, self.Q, self.s)

    def fit(self, X, y=None):
        """Fit the model to a univariate series."""
        result = fit_sarma(X, self._order(), fixed_zero=self.fixed_zero,
                           starts=self.starts, start_scale=self.start_scale,
                           start_seed=self.start_seed, gtol=self.gtol,
                           max_iter=self.max_iter, lrv_r_max=self.lrv_r_max)
        self.result_ = result
        self.theta_ = result.theta
        self.sigma2_ = result.sigma2
        self.resid_ = result.residuals
        self.se_ = result.se
        self.n_ = result.n
        return self

    def transform(self, X):
        """Filter a series through the fitted model, returning its residuals."""
        if not hasattr(self, "result_"):
            raise NotFittedError("this SarmaEstimator instance is not fitted yet")
        return residuals(self.result_.spec, X)

    def fit_transform(self, X, y=None):
        return self.fit(X).resid_
