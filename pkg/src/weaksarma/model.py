"""Multiplicative seasonal ARMA model: representation, recursions, simulation.

The model for a zero-mean series X is

    (1 - sum_i a_i L^i)(1 - sum_j A_j L^{s j}) X_t
        = (1 - sum_i b_i L^i)(1 - sum_j B_j L^{s j}) eps_t,

with nonseasonal orders (p, q), seasonal orders (P, Q) at period s, and
parameter vector theta = (a_1..a_p, b_1..b_q, A_1..A_P, B_1..B_Q).
Residuals invert this recursion with all pre-sample values set to zero.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .exceptions import NonStationarySpecError
from .validation import check_coeffs, check_count, check_series

# Roots must lie strictly outside the unit disk with this margin.
ROOT_MARGIN = 1e-8


@dataclass(frozen=True)
class SarmaOrder:
    """Orders (p, q)(P, Q)_s of a multiplicative seasonal ARMA model."""

    p: int
    q: int
    P: int
    Q: int
    s: int = 1

    def __post_init__(self):
        for name in ("p", "q", "P", "Q"):
            check_count(getattr(self, name), name, minimum=0)
        check_count(self.s, "s", minimum=1)

    @property
    def k0(self):
        """Total number of coefficients p + q + P + Q."""
        return self.p + self.q + self.P + self.Q

    @property
    def ar_span(self):
        """Largest AR-side lag, p + s*P."""
        return self.p + self.s * self.P

    @property
    def ma_span(self):
        """Largest MA-side lag, q + s*Q."""
        return self.q + self.s * self.Q

    def split(self, theta):
        """Split a parameter vector into (a, b, A, B) blocks."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.k0,):
            raise ValueError(f"theta must have length {self.k0}, got shape {theta.shape}")
        p, q, P = self.p, self.q, self.P
        return (theta[:p], theta[p:p + q], theta[p + q:p + q + P], theta[p + q + P:])


@dataclass(frozen=True)
class SarmaSpec:
    """A SARMA model: orders plus a concrete parameter vector."""

    order: SarmaOrder
    theta: np.ndarray = field(default=None)

    def __post_init__(self):
        theta = np.zeros(self.order.k0) if self.theta is None else \
            np.asarray(self.theta, dtype=float).copy()
        if theta.shape != (self.order.k0,):
            raise ValueError(
                f"theta must have length {self.order.k0}, got shape {theta.shape}")
        if theta.size and not np.all(np.isfinite(theta)):
            raise ValueError("theta contains non-finite values")
        theta.flags.writeable = False
        object.__setattr__(self, "theta", theta)

    @property
    def ar(self):
        return self.order.split(self.theta)[0]

    @property
    def ma(self):
        return self.order.split(self.theta)[1]

    @property
    def sar(self):
        return self.order.split(self.theta)[2]

    @property
    def sma(self):
        return self.order.split(self.theta)[3]

    def ar_lag_coeffs(self):
        """Lag coefficients c_k of the expanded AR-side operator."""
        return expand_product(self.ar, self.sar, self.order.s)

    def ma_lag_coeffs(self):
        """Lag coefficients d_k of the expanded MA-side operator."""
        return expand_product(self.ma, self.sma, self.order.s)

    def is_admissible(self, margin=ROOT_MARGIN):
        """True when both expanded operators have all zeros outside the unit disk."""
        return (check_roots(self.ar_lag_coeffs(), margin=margin)
                and check_roots(self.ma_lag_coeffs(), margin=margin))


def check_roots(coeffs, margin=ROOT_MARGIN):
    """Check whether 1 - c_1 z - ... - c_d z^d has all zeros outside the unit disk.

    Uses companion-matrix eigenvalues with an explicit modulus margin so that
    near-boundary cases do not flap with rounding. An empty (degree-zero)
    polynomial has no roots and passes.
    """
    c = check_coeffs(coeffs)
    c = np.trim_zeros(c, "b")
    if c.size == 0:
        return True
    # numpy expects highest-degree coefficient first: -c_d, ..., -c_1, 1.
    poly = np.concatenate((-c[::-1], [1.0]))
    roots = np.roots(poly)
    if roots.size == 0:
        return True
    return bool(np.min(np.abs(roots)) > 1.0 + margin)


def expand_product(nonseasonal, seasonal, s):
    """Expand (1 - sum_i c_i L^i)(1 - sum_j C_j L^{s j}) into plain lag form.

    Returns the vector ``c`` with the convention that the product operator is
    ``1 - sum_k c[k-1] L^k``. Coefficients landing on the same lag add.
    """
    g = check_coeffs(nonseasonal, "nonseasonal coefficients")
    h = check_coeffs(seasonal, "seasonal coefficients")
    s = check_count(s, "s", minimum=1)
    span = g.size + s * h.size
    out = np.zeros(span)
    if g.size:
        out[:g.size] += g
    for j, hj in enumerate(h, start=1):
        out[s * j - 1] += hj
        if g.size:
            out[s * j:s * j + g.size] -= hj * g
    return out


def _filter_polys(spec):
    """Monic lag polynomials (1, -c_1, ...) for the AR and MA sides."""
    ar_poly = np.concatenate(([1.0], -spec.ar_lag_coeffs()))
    ma_poly = np.concatenate(([1.0], -spec.ma_lag_coeffs()))
    return ar_poly, ma_poly


def residuals(spec, x):
    """Residual series e_1..e_n of ``x`` under ``spec``.

    Implements the defining recursion exactly, with all pre-sample values of
    both the series and the residuals set to zero. ``lfilter`` evaluates the
    same difference equation with zero initial state.
    """
    x = check_series(x)
    ar_poly, ma_poly = _filter_polys(spec)
    return lfilter(ar_poly, ma_poly, x)


def residuals_loop(spec, x):
    """Pure-Python reference recursion; oracle for :func:`residuals`."""
    x = check_series(x)
    c = spec.ar_lag_coeffs()
    d = spec.ma_lag_coeffs()
    n = x.size
    e = np.zeros(n)
    for t in range(n):
        val = x[t]
        for k, ck in enumerate(c, start=1):
            if t - k >= 0:
                val -= ck * x[t - k]
        for k, dk in enumerate(d, start=1):
            if t - k >= 0:
                val += dk * e[t - k]
        e[t] = val
    return e


def residual_gradient(spec, x, free_idx=None):
    """Matrix of partial derivatives de_t / dtheta_l, shape (n, n_free).

    Obtained by differentiating the finite residual recursion coordinate-wise,
    so it is exactly consistent with :func:`residuals` (no truncation
    parameter). ``free_idx`` selects a subset of coordinates, default all.
    """
    x = check_series(x)
    order = spec.order
    if free_idx is None:
        free_idx = np.arange(order.k0)
    else:
        free_idx = np.asarray(free_idx, dtype=int)
    _, ma_poly = _filter_polys(spec)
    e = residuals(spec, x)
    a, b, A, B = order.split(spec.theta)
    s, p, q, P = order.s, order.p, order.q, order.P

    grad = np.empty((x.size, free_idx.size))
    for col, l in enumerate(free_idx):
        if l < p:  # d/da_i with i = l+1: drive with -L^i * (1 - sum A_j L^{sj})
            i = l + 1
            num = np.zeros(i + s * A.size + 1)
            num[i] = -1.0
            for j, Aj in enumerate(A, start=1):
                num[s * j + i] += Aj
            grad[:, col] = lfilter(num, ma_poly, x)
        elif l < p + q:  # d/db_i: drive with +L^i * (1 - sum B_j L^{sj}) on e
            i = l - p + 1
            num = np.zeros(i + s * B.size + 1)
            num[i] = 1.0
            for j, Bj in enumerate(B, start=1):
                num[s * j + i] -= Bj
            grad[:, col] = lfilter(num, ma_poly, e)
        elif l < p + q + P:  # d/dA_j: drive with -L^{sj} * (1 - sum a_i L^i)
            j = l - p - q + 1
            num = np.zeros(s * j + a.size + 1)
            num[s * j] = -1.0
            for i, ai in enumerate(a, start=1):
                num[s * j + i] += ai
            grad[:, col] = lfilter(num, ma_poly, x)
        else:  # d/dB_j: drive with +L^{sj} * (1 - sum b_i L^i) on e
            j = l - p - q - P + 1
            num = np.zeros(s * j + b.size + 1)
            num[s * j] = 1.0
            for i, bi in enumerate(b, start=1):
                num[s * j + i] -= bi
            grad[:, col] = lfilter(num, ma_poly, e)
    return grad


def default_burnin(order):
    """Burn-in long enough for the start-up transient to die at double precision."""
    return 50 + 10 * (order.s * max(order.P, order.Q) + max(order.p, order.q))


def simulate(spec, noise, burnin=None):
    """Generate a series of length ``len(noise) - burnin`` driven by ``noise``.

    The recursion is started from zeros and the first ``burnin`` values are
    discarded. Deterministic given the noise vector.
    """
    noise = check_series(noise)
    if burnin is None:
        burnin = default_burnin(spec.order)
    burnin = check_count(burnin, "burnin", minimum=0)
    min_burn = spec.order.ar_span + spec.order.ma_span
    if burnin < min_burn:
        raise ValueError(f"burnin must be >= {min_burn} for this order, got {burnin}")
    if noise.size <= burnin:
        raise ValueError("noise must be longer than burnin")
    if not spec.is_admissible():
        raise NonStationarySpecError(
            "model polynomials must have all zeros strictly outside the unit disk")
    ar_poly, ma_poly = _filter_polys(spec)
    x = lfilter(ma_poly, ar_poly, noise)
    return x[burnin:]
