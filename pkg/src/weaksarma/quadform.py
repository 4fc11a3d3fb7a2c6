"""Tail probabilities of weighted chi-square mixtures sum_i xi_i Z_i^2.

The survival function is obtained by numerical inversion of the
characteristic function,

    P(Q > x) = 1/2 + (1/pi) * int_0^inf sin(theta(u)) / (u * rho(u)) du,
    theta(u) = 0.5 * sum_i atan(xi_i u) - 0.5 * x * u,
    rho(u)   = prod_i (1 + xi_i^2 u^2)^(1/4).

The integrand oscillates with an algebraically decaying envelope; the head is
integrated adaptively and the oscillatory tail is summed between consecutive
sign changes with alternating-series (repeated averaging) acceleration. A
brute-force Monte Carlo version is provided as an independent cross-check.
"""

import numpy as np
from scipy import integrate, optimize
from scipy.stats import chi2

from .exceptions import NumericalFailureError
from .validation import check_count

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _theta(u, xi, x):
    return 0.5 * np.sum(np.arctan(np.multiply.outer(xi, u)), axis=0) - 0.5 * x * u


def _integrand(u, xi, x):
    u = np.asarray(u, dtype=float)
    log_rho = 0.25 * np.sum(np.log1p(np.multiply.outer(xi, u) ** 2), axis=0)
    th = _theta(u, xi, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(u > 0, np.sin(th) * np.exp(-log_rho) / np.where(u > 0, u, 1.0),
                       0.5 * (np.sum(xi) - x))
    return out


def _theta_prime(u, xi, x):
    return 0.5 * np.sum(xi[:, None] / (1.0 + (xi[:, None] * u) ** 2), axis=0).squeeze() - 0.5 * x


def _gauss_segment(a, b, xi, x):
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    u = mid + half * _GL_NODES
    return half * np.dot(_GL_WEIGHTS, _integrand(u, xi, x))


def _accelerated_sum(terms):
    """Sum an eventually alternating series by repeated averaging."""
    partial = np.cumsum(terms)
    while partial.size > 1:
        partial = 0.5 * (partial[:-1] + partial[1:])
    return partial[0]


def quadform_tail(xi, x, tol=1e-8, max_bumps=60):
    """P(sum_i xi_i Z_i^2 > x) for independent standard normal Z_i.

    Parameters
    ----------
    xi : array-like
        Nonnegative mixture weights, not all zero.
    x : float
        Evaluation point, >= 0.
    tol : float
        Target absolute accuracy of the inversion.

    Raises
    ------
    NumericalFailureError
        If the quadrature cannot reach the requested accuracy.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if np.any(xi < 0) or not np.all(np.isfinite(xi)):
        raise ValueError("mixture weights must be finite and nonnegative")
    xi = xi[xi > 1e-14 * max(xi.max(initial=0.0), 1.0)]
    if xi.size == 0:
        raise ValueError("mixture weights must not be all zero")
    if not np.isfinite(x) or x < 0:
        raise ValueError(f"x must be finite and >= 0, got {x!r}")
    if x == 0:
        return 1.0
    if xi.size == 1:
        return float(chi2.sf(x / xi[0], 1))

    # Locate where theta starts decreasing for good (single stationary point).
    if np.sum(xi) > x:
        hi = 1.0 / xi.max()
        while _theta_prime(hi, xi, x) > 0:
            hi *= 2.0
            if hi > 1e18:
                raise NumericalFailureError("could not bracket the phase maximum")
        u_stat = optimize.brentq(_theta_prime, 0.0, hi, args=(xi, x))
    else:
        u_stat = 0.0

    # Head: up to the first multiple of pi that theta crosses past u_stat.
    th_start = _theta(np.array([u_stat]), xi, x)[0] if u_stat > 0 else 0.0
    level = np.floor(th_start / np.pi) * np.pi
    if level >= th_start - 1e-12:  # phase starts exactly on a multiple of pi
        level -= np.pi
    step = np.pi / (0.5 * x)  # asymptotic half-period
    u_prev = u_stat

    def _cross(target, lo):
        hi = lo + step
        while _theta(np.array([hi]), xi, x)[0] > target:
            lo, hi = hi, hi + step
            if hi > 1e18:
                raise NumericalFailureError("phase crossing search diverged")
        return optimize.brentq(lambda u: _theta(np.array([u]), xi, x)[0] - target, lo, hi)

    u_first = _cross(level, max(u_prev, 1e-300))
    head, head_err = integrate.quad(_integrand, 0.0, u_first, args=(xi, x), limit=400)
    if head_err > 50 * tol:
        raise NumericalFailureError(f"head quadrature error {head_err:.2e} exceeds tolerance")

    # Tail: one Gauss panel per half-period; accelerate the alternating sums.
    bumps = []
    u_lo = u_first
    target = level
    for _ in range(max_bumps):
        target -= np.pi
        u_hi = _cross(target, u_lo)
        bumps.append(_gauss_segment(u_lo, u_hi, xi, x))
        u_lo = u_hi
        if len(bumps) >= 4 and abs(bumps[-1]) < 0.01 * tol and abs(bumps[-2]) < 0.01 * tol:
            break
    if len(bumps) >= 6:
        tail = _accelerated_sum(np.asarray(bumps))
    else:
        tail = float(np.sum(bumps))

    p = 0.5 + (head + tail) / np.pi
    return float(min(1.0, max(0.0, p)))


def quadform_tail_mc(xi, x, draws=10**6, seed=0, chunk=200_000):
    """Monte Carlo estimate of P(sum_i xi_i Z_i^2 > x); oracle for quadform_tail."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if np.any(xi < 0) or not np.all(np.isfinite(xi)):
        raise ValueError("mixture weights must be finite and nonnegative")
    draws = check_count(draws, "draws", minimum=1)
    rng = np.random.default_rng(seed)
    exceed = 0
    left = draws
    while left > 0:
        b = min(chunk, left)
        q = rng.standard_normal((b, xi.size)) ** 2 @ xi
        exceed += int(np.count_nonzero(q > x))
        left -= b
    return exceed / draws


def mixture_quantile(xi, prob, tol=1e-6):
    """Quantile of the mixture law: x with P(Q <= x) = prob, by bisection."""
    if not 0.0 < prob < 1.0:
        raise ValueError("prob must lie in (0, 1)")
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    alpha = 1.0 - prob
    hi = float(np.sum(xi) + 10.0 * np.sqrt(2.0 * np.sum(xi**2)))
    while quadform_tail(xi, hi) > alpha:
        hi *= 2.0
        if hi > 1e12:
            raise NumericalFailureError("quantile bracket expansion failed")
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if quadform_tail(xi, mid) > alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
