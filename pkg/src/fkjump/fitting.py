"""Least-squares slopes of log-log convergence plots."""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import InsufficientPoints, NonpositiveValue


@dataclass(frozen=True)
class SlopeFit:
    points: Tuple[Tuple[float, float], ...]
    slope: float
    intercept: float
    r_squared: float

    def within(self, target, tol):
        return abs(self.slope - target) <= tol


def fit_slope(x, y):
    """Ordinary least squares of ``log y`` on ``log x``.

    Parameters
    ----------
    x, y : array_like
        Raw (positive) abscissae and ordinates; at least three pairs.

    Returns
    -------
    SlopeFit
        ``points`` holds the log-log pairs.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if x.size < 3:
        raise InsufficientPoints(f"need at least 3 points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(x * y)):
        raise NonpositiveValue("log-log fit needs finite positive values")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else float(np.clip(1.0 - (resid ** 2).sum() / ss_tot, 0.0, 1.0))
    return SlopeFit(points=tuple(zip(lx.tolist(), ly.tolist())), slope=float(slope),
                    intercept=float(intercept), r_squared=r2)
