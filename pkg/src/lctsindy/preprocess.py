"""Smoothing, derivative estimation and shape-preserving interpolation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import savgol_filter

from .signals import TimeSeries


@dataclass(frozen=True)
class SmootherConfig:
    """Savitzky-Golay settings.

    ``window_span`` is a physical time horizon; the sample count is derived
    from the grid spacing when the filter is applied.
    """

    window_span: float = 30.0
    poly_degree: int = 3
    enabled: bool = True

    def __post_init__(self):
        if self.window_span <= 0:
            raise ValueError("window_span must be positive")
        if not 0 <= self.poly_degree <= 3:
            raise ValueError("poly_degree must be between 0 and 3")


def realized_window(cfg: SmootherConfig, dt: float, n: int) -> tuple[int, int]:
    """Return ``(window_length, degree)`` actually used on a grid of ``n`` samples.

    The window is the odd integer nearest ``window_span / dt``, at least 3 and
    at most ``n`` (made odd). The degree drops to ``window_length - 1`` when
    the window is too short to carry the requested one.
    """
    if n < 3:
        raise ValueError(f"smoother needs at least 3 samples, got {n}")
    ratio = cfg.window_span / dt
    length = 2 * int(np.floor((ratio - 1) / 2 + 0.5)) + 1
    top = n if n % 2 else n - 1
    length = min(max(length, 3), top)
    degree = min(cfg.poly_degree, length - 1)
    return length, degree


def savitzky_golay(ts: TimeSeries, cfg: SmootherConfig) -> TimeSeries:
    """Local polynomial smoothing of every component.

    Edge samples are taken from the polynomial fitted to the first (last)
    full window, so no values outside the record are invented.
    """
    if len(ts) < 3:
        raise ValueError("smoother needs at least 3 samples")
    if not ts.is_uniform():
        raise ValueError("smoother requires uniform sampling")
    if not cfg.enabled:
        return ts
    length, degree = realized_window(cfg, ts.dt, len(ts))
    smoothed = savgol_filter(ts.values, length, degree, axis=0, mode="interp")
    return ts.with_values(smoothed)


def finite_difference_gradient(ts: TimeSeries) -> TimeSeries:
    """Central differences inside, one-sided differences at both ends."""
    t, x = ts.times, ts.values
    if t.size < 2:
        raise ValueError("gradient needs at least 2 samples")
    out = np.empty_like(x)
    out[0] = (x[1] - x[0]) / (t[1] - t[0])
    out[-1] = (x[-1] - x[-2]) / (t[-1] - t[-2])
    if t.size > 2:
        out[1:-1] = (x[2:] - x[:-2]) / (t[2:] - t[:-2])[:, None]
    return ts.with_values(out)


def fritsch_carlson_slopes(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Knot slopes for a monotone piecewise-cubic Hermite interpolant.

    Interior slopes start from the mean of adjacent secants, are zeroed at
    local extrema and flat runs, and are limited to three times each adjacent
    secant so every interval stays inside the Fritsch-Carlson monotonicity box.
    Works along axis 0 of ``y``.
    """
    h = np.diff(t)[:, None]
    delta = np.diff(y, axis=0) / h
    m = np.empty_like(y)
    m[0] = delta[0]
    m[-1] = delta[-1]
    if y.shape[0] > 2:
        left, right = delta[:-1], delta[1:]
        interior = 0.5 * (left + right)
        same_sign = (left * right) > 0
        interior = np.where(same_sign, interior, 0.0)
        cap = 3.0 * np.minimum(np.abs(left), np.abs(right))
        m[1:-1] = np.sign(interior) * np.minimum(np.abs(interior), cap)
    # endpoint slopes only need the one-sided cap
    m[0] = np.sign(delta[0]) * np.minimum(np.abs(m[0]), 3 * np.abs(delta[0]))
    m[-1] = np.sign(delta[-1]) * np.minimum(np.abs(m[-1]), 3 * np.abs(delta[-1]))
    return m


class Interpolant:
    """Monotone piecewise-cubic Hermite interpolant of a time series.

    Calling it returns an array of shape ``(len(t), d)`` (or ``(len(t),)`` when
    a component is given). Queries outside the knot range are clamped to the
    boundary values.
    """

    def __init__(self, knots, values, names=()):
        self.knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        self.values = values
        self.names = tuple(names)
        self.slopes = fritsch_carlson_slopes(self.knots, self.values)
        for arr in (self.knots, self.values, self.slopes):
            arr.flags.writeable = False

    @classmethod
    def from_series(cls, ts: TimeSeries) -> "Interpolant":
        return cls(ts.times, ts.values, ts.names)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    def _column(self, component):
        if component is None:
            return slice(None)
        if isinstance(component, str):
            return self.names.index(component)
        return int(component)

    def __call__(self, t, component=None, derivative: bool = False) -> np.ndarray:
        col = self._column(component)
        scalar = np.ndim(t) == 0
        tq = np.clip(np.atleast_1d(np.asarray(t, dtype=float)), *self.domain)
        k = np.searchsorted(self.knots, tq, side="right") - 1
        k = np.clip(k, 0, self.knots.size - 2)
        t0, t1 = self.knots[k], self.knots[k + 1]
        h = (t1 - t0)[:, None]
        s = ((tq - t0) / (t1 - t0))[:, None]
        y0, y1 = self.values[k], self.values[k + 1]
        m0, m1 = self.slopes[k] * h, self.slopes[k + 1] * h
        if derivative:
            out = (
                (6 * s**2 - 6 * s) * (y0 - y1)
                + (3 * s**2 - 4 * s + 1) * m0
                + (3 * s**2 - 2 * s) * m1
            ) / h
            outside = (np.asarray(t) < self.domain[0]) | (np.asarray(t) > self.domain[1])
            out[np.atleast_1d(outside)] = 0.0
        else:
            s2, s3 = s * s, s * s * s
            out = (
                (2 * s3 - 3 * s2 + 1) * y0
                + (s3 - 2 * s2 + s) * m0
                + (-2 * s3 + 3 * s2) * y1
                + (s3 - s2) * m1
            )
            # knots must come back exactly, including the right end
            at_right = tq == self.knots[-1]
            out[at_right] = self.values[-1]
        out = out[:, col]
        return out[0] if scalar else out


def build_interpolant(ts: TimeSeries) -> Interpolant:
    return Interpolant.from_series(ts)


@dataclass(frozen=True)
class Preprocessed:
    """Smoothed series, its derivative estimate and a continuous interpolant."""

    raw: TimeSeries
    smoothed: TimeSeries
    derivative: TimeSeries
    interpolant: Interpolant


def preprocess(ts: TimeSeries, cfg: SmootherConfig) -> Preprocessed:
    smoothed = savitzky_golay(ts, cfg) if cfg.enabled else ts
    return Preprocessed(
        raw=ts,
        smoothed=smoothed,
        derivative=finite_difference_gradient(smoothed),
        interpolant=build_interpolant(smoothed),
    )
