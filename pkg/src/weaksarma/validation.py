"""Input validation helpers, in the spirit of sklearn's check_array."""

import numpy as np


def check_series(x, name="series", min_length=1):
    """Coerce ``x`` to a 1-d float array and validate it.

    Parameters
    ----------
    x : array-like
        Observations.
    name : str
        Name used in error messages.
    min_length : int
        Minimum admissible length.

    Returns
    -------
    ndarray of shape (n,)
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < min_length:
        raise ValueError(f"{name} must have at least {min_length} observations, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_coeffs(c, name="coefficients"):
    """Coerce to a 1-d float vector of finite polynomial coefficients."""
    arr = np.atleast_1d(np.asarray(c, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_count(value, name, minimum=0):
    """Validate an integer count and return it as a plain int."""
    iv = int(value)
    if iv != value:
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if iv < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {iv}")
    return iv


def check_prob(value, name="level"):
    """Validate a probability strictly inside (0, 1)."""
    fv = float(value)
    if not 0.0 < fv < 1.0:
        raise ValueError(f"{name} must lie strictly between 0 and 1, got {value!r}")
    return fv


def check_matrix(a, name="matrix"):
    """Coerce to a 2-d float array with finite entries."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def symmetrize(a):
    """Return the symmetric part (a + a') / 2."""
    return 0.5 * (a + a.T)
