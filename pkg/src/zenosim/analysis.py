"""Rate and line-width extraction from sampled curves."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class FitFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class RateFit:
    rate: float
    intercept: float
    r2: float
    n_points: int
    envelope: bool = False


def _loglinear(t, y):
    logy = np.log(y)
    slope, intercept = np.polyfit(t, logy, 1)
    resid = logy - (slope * t + intercept)
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return -float(slope), float(intercept), r2


def _local_maxima(t, y):
    """Interior local maxima, refined by a parabola through the three samples."""
    idx = np.nonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]))[0] + 1
    tm, ym = [], []
    for i in idx:
        t0, t1, t2 = t[i - 1 : i + 2]
        c = np.polyfit([t0 - t1, 0.0, t2 - t1], y[i - 1 : i + 2], 2)
        if c[0] < 0:
            dt = -c[1] / (2 * c[0])
            tm.append(t1 + dt)
            ym.append(np.polyval(c, dt))
        else:
            tm.append(t1)
            ym.append(y[i])
    return np.array(tm), np.array(ym)


def fit_decay_rate(times, values, t_min: float, t_max: float, min_r2: float = 0.99) -> RateFit:
    """Least-squares fit of log(values) = c - rate * t over [t_min, t_max].

    A curve that oscillates inside the window is fitted through its local
    maxima (upper envelope) instead.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    sel = (t >= t_min) & (t <= t_max)
    t, y = t[sel], y[sel]
    if len(t) < 3:
        raise FitFailure(f"fewer than 3 samples in [{t_min}, {t_max}]")
    envelope = bool(np.any(np.diff(y) > 0))
    if envelope:
        t, y = _local_maxima(t, y)
        if len(t) < 3:
            raise FitFailure("oscillating curve with fewer than 3 maxima in the window")
    if np.any(y <= 0):
        raise FitFailure("nonpositive values in the fit window")
    rate, intercept, r2 = _loglinear(t, y)
    if r2 < min_r2:
        raise FitFailure(f"no exponential regime: R^2 = {r2:.4f} < {min_r2}")
    return RateFit(rate, intercept, r2, len(t), envelope)


def half_max_crossings(x, y) -> tuple[float, float]:
    """Outermost half-maximum crossings around the peak, by linear interpolation."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = int(np.argmax(y))
    half = y[k] / 2
    left = np.nonzero(y[:k] < half)[0]
    right = np.nonzero(y[k:] < half)[0]
    if len(left) == 0 or len(right) == 0:
        raise FitFailure("line does not fall below half maximum inside the sampled range")
    i = left[-1]
    xl = x[i] + (half - y[i]) * (x[i + 1] - x[i]) / (y[i + 1] - y[i])
    j = k + right[0]
    xr = x[j - 1] + (half - y[j - 1]) * (x[j] - x[j - 1]) / (y[j] - y[j - 1])
    return float(xl), float(xr)


def fwhm(x, y) -> float:
    xl, xr = half_max_crossings(x, y)
    return xr - xl


def richardson(coarse, fine, ratio: float = 2.0, order: int = 1):
    """Remove the leading error term c / h**order given results at h and h / ratio.

    For band truncation the role of h is played by the inverse band width.
    """
    coarse = np.asarray(coarse, dtype=float)
    fine = np.asarray(fine, dtype=float)
    k = ratio**order
    return (k * fine - coarse) / (k - 1)
