"""Power-law fits on log-log axes."""

from __future__ import annotations

import numpy as np


def loglog_slope(x, y, inner: float = 0.8) -> float:
    """Least-squares slope of log|y| against log x.

    Only points whose log x lies in the central ``inner`` fraction of the
    scanned log-range take part in the fit.
    """
    x = np.asarray(x, float)
    y = np.abs(np.asarray(y, float))
    if x.shape != y.shape:
        raise ValueError("x and y must have the same shape")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs strictly positive data")
    lx, ly = np.log(x), np.log(y)
    lo, hi = lx.min(), lx.max()
    margin = 0.5 * (1.0 - inner) * (hi - lo)
    keep = (lx >= lo + margin - 1e-12) & (lx <= hi - margin + 1e-12)
    if keep.sum() < 2:
        raise ValueError("fewer than two points inside the fit window")
    slope, _ = np.polyfit(lx[keep], ly[keep], 1)
    return float(slope)
