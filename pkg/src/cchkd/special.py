"""Digamma function for the kNN entropy estimators."""

from __future__ import annotations

import numpy as np

__all__ = ["digamma"]

# B_{2k} / (2k) for k = 1..7
_ASYMPTOTIC = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)

_SHIFT_TO = 6.0


def digamma(x):
    """psi(x) for ``x > 0``, scalar or array.

    Arguments below 6 are shifted up with ``psi(x) = psi(x + 1) - 1/x``; the
    asymptotic Bernoulli series is then accurate to ~1e-13.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError("digamma is only defined here for finite x > 0")
    z = arr.copy()
    acc = np.zeros_like(z)
    low = z < _SHIFT_TO
    while np.any(low):
        acc[low] -= 1.0 / z[low]
        z[low] += 1.0
        low = z < _SHIFT_TO
    inv2 = 1.0 / (z * z)
    series = np.zeros_like(z)
    for coef in reversed(_ASYMPTOTIC):
        series = (series + coef) * inv2
    out = acc + np.log(z) - 0.5 / z - series
    if np.ndim(x) == 0:
        return float(out)
    return out
