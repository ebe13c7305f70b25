"""Bessel ratio functions I1(z)/z and J1(z)/z, parameterised by z2 = z**2.

Both ratios are even in z and tend to 1/2 at the origin, so they are
evaluated from the squared argument directly. That keeps the kernels
free of square roots of tiny negative numbers produced by rounding.
"""

import numpy as np
from scipy import special

# Largest squared argument accepted. Valid scenarios stay around 1e2.
ARGUMENT_CAP = 1e4
# Above this z2 the alternating J1 series cancels too much.
J1_SERIES_LIMIT = 25.0
SERIES_RTOL = 1e-16
_MAX_TERMS = 500


def _check_argument(z2):
    arr = np.asarray(z2, dtype=float)
    if np.any(~np.isfinite(arr)):
        raise ValueError("z2 must be finite")
    if np.any(arr < 0):
        raise ValueError(f"z2 must be non-negative, got min {arr.min()!r}")
    if np.any(arr > ARGUMENT_CAP):
        raise ValueError(f"z2 above the argument cap {ARGUMENT_CAP:g}")
    return arr


def _ratio_series(q):
    """Sum 0.5 * sum_m q**m / (m! (m+1)!) for q = z2/4 (signed)."""
    term = np.full_like(q, 0.5)
    total = term.copy()
    for m in range(_MAX_TERMS):
        term = term * q / ((m + 1) * (m + 2))
        total = total + term
        if np.all(np.abs(term) <= SERIES_RTOL * np.abs(total)):
            break
    return total


def _as_output(values, scalar):
    return float(values) if scalar else values


def bessel_i1_ratio(z2):
    """I1(sqrt(z2)) / sqrt(z2) from the ascending series.

    All terms are positive, so the series is used on the whole admissible range.
    """
    arr = _check_argument(z2)
    scalar = arr.ndim == 0
    out = _ratio_series(np.atleast_1d(arr) / 4.0)
    return _as_output(out.reshape(arr.shape), scalar)


def bessel_j1_ratio(z2):
    """J1(sqrt(z2)) / sqrt(z2).

    Alternating series up to ``J1_SERIES_LIMIT``; scipy's ``j1`` beyond it.
    """
    arr = _check_argument(z2)
    scalar = arr.ndim == 0
    flat = np.atleast_1d(arr).astype(float)
    out = np.empty_like(flat)

    small = flat <= J1_SERIES_LIMIT
    if np.any(small):
        out[small] = _ratio_series(-flat[small] / 4.0)
    if np.any(~small):
        z = np.sqrt(flat[~small])
        out[~small] = special.j1(z) / z
    return _as_output(out.reshape(arr.shape), scalar)
