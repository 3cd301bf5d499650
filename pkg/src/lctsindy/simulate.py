"""Ground-truth generators for the Hes1, delayed-logistic and Ikeda benchmarks.

The distributed-delay models are integrated in their chain-augmented form,
which is exact for Erlang kernels. The Ikeda equation has a genuine discrete
delay and is integrated by the method of steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable, Mapping

import numpy as np

from .lct import MAX_RATE_STEP, ErlangKernel
from .signals import TimeSeries

#: default cap on the internal RK4 step of the generators
DEFAULT_MAX_STEP = 0.02


class _Params:
    @classmethod
    def from_mapping(cls, data: Mapping):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class Hes1Params(_Params):
    """Hes1 mRNA (M) / protein (P) feedback with an Erlang-delayed repression.

    Defaults are the baseline values of the published parameter table. The
    kernel is given by its mean delay ``tau`` and order ``p``.
    """

    alpha_m: float = 1.0
    mu_m: float = 0.03
    alpha_p: float = 2.0
    mu_p: float = 0.03
    P0: float = 100.0
    n: int = 5
    tau: float = 20.0
    p: int = 2

    def __post_init__(self):
        for name in ("alpha_m", "mu_m", "alpha_p", "mu_p", "P0", "tau"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("Hill exponent n must be an integer >= 1")
        object.__setattr__(self, "n", int(self.n))

    @property
    def kernel(self) -> ErlangKernel:
        return ErlangKernel.from_mean(self.tau, self.p)

    def equilibrium(self) -> tuple[float, float]:
        """Positive steady state, found by bisection on the protein level."""

        def g(P):
            return self.alpha_m / (1 + (P / self.P0) ** self.n) - self.mu_m * self.mu_p * P / self.alpha_p

        lo, hi = 0.0, self.alpha_m * self.alpha_p / (self.mu_m * self.mu_p)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g(mid) > 0:
                lo = mid
            else:
                hi = mid
        P = 0.5 * (lo + hi)
        return self.mu_p * P / self.alpha_p, P


@dataclass(frozen=True)
class LogisticParams(_Params):
    r: float = 1.0
    K: float = 1.0
    tau: float = 4.0
    p: int = 2

    def __post_init__(self):
        if not (self.r > 0 and self.K > 0 and self.tau > 0):
            raise ValueError("r, K and tau must be positive")

    @property
    def kernel(self) -> ErlangKernel:
        return ErlangKernel.from_mean(self.tau, self.p)


@dataclass(frozen=True)
class IkedaParams(_Params):
    alpha: float = 6.0
    tau: float = 1.59

    def __post_init__(self):
        if not (self.alpha > 0 and self.tau > 0):
            raise ValueError("alpha and tau must be positive")


@dataclass(frozen=True)
class AugmentedRun:
    """Observed series plus the hidden chain states and exact derivatives."""

    series: TimeSeries
    chain: np.ndarray
    derivative: TimeSeries


def _grid(t_end: float, dt: float) -> np.ndarray:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_end > dt:
        raise ValueError("t_end must exceed dt")
    n = int(math.floor(t_end / dt + 1e-9))
    return dt * np.arange(n + 1)


def _rk4_on_grid(rhs: Callable, y0: np.ndarray, times: np.ndarray, h_max: float) -> np.ndarray:
    out = np.empty((times.size, y0.size))
    out[0] = y = y0.astype(float)
    for i in range(times.size - 1):
        span = times[i + 1] - times[i]
        m = max(1, math.ceil(span / h_max - 1e-9))
        h = span / m
        for _ in range(m):
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * h * k1)
            k3 = rhs(y + 0.5 * h * k2)
            k4 = rhs(y + h * k3)
            y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = y
    return out


def _chain_part(a: float, source: float, z: np.ndarray) -> np.ndarray:
    dz = np.empty_like(z)
    dz[0] = a * (source - z[0])
    dz[1:] = a * (z[:-1] - z[1:])
    return dz


def hes1_rhs(params: Hes1Params) -> Callable:
    a = params.kernel.a

    def rhs(y):
        M, P, z = y[0], y[1], y[2:]
        dM = params.alpha_m / (1.0 + (z[-1] / params.P0) ** params.n) - params.mu_m * M
        dP = params.alpha_p * M - params.mu_p * P
        return np.concatenate(([dM, dP], _chain_part(a, P, z)))

    return rhs


def hes1_run(params: Hes1Params, history=(3.0, 100.0), t_end=500.0, dt=DEFAULT_MAX_STEP,
             max_step=DEFAULT_MAX_STEP) -> AugmentedRun:
    """Integrate Hes1 from a constant history ``(M, P)``."""
    times = _grid(t_end, dt)
    k = params.kernel
    M0, P0 = map(float, history)
    y0 = np.concatenate(([M0, P0], np.full(k.p, P0)))
    rhs = hes1_rhs(params)
    states = _rk4_on_grid(rhs, y0, times, min(max_step, MAX_RATE_STEP / k.a))
    deriv = np.array([rhs(y)[:2] for y in states])
    names = ("M", "P")
    return AugmentedRun(
        TimeSeries(times, states[:, :2], names),
        states[:, 2:],
        TimeSeries(times, deriv, names),
    )


def simulate_hes1(params: Hes1Params, history=(3.0, 100.0), t_end=500.0, dt=DEFAULT_MAX_STEP,
                  max_step=DEFAULT_MAX_STEP) -> TimeSeries:
    return hes1_run(params, history, t_end, dt, max_step).series


def logistic_rhs(params: LogisticParams) -> Callable:
    a = params.kernel.a

    def rhs(y):
        x, z = y[0], y[1:]
        dx = params.r * x * (1.0 - z[-1] / params.K)
        return np.concatenate(([dx], _chain_part(a, x, z)))

    return rhs


def logistic_run(params: LogisticParams, x0=None, t_end=100.0, dt=0.1,
                 max_step=DEFAULT_MAX_STEP) -> AugmentedRun:
    """Integrate the delayed logistic equation from constant history ``x0``
    (default ``K / 2``)."""
    x0 = params.K / 2 if x0 is None else float(x0)
    if not x0 > 0:
        raise ValueError("logistic history must be positive")
    times = _grid(t_end, dt)
    k = params.kernel
    y0 = np.concatenate(([x0], np.full(k.p, x0)))
    rhs = logistic_rhs(params)
    states = _rk4_on_grid(rhs, y0, times, min(max_step, MAX_RATE_STEP / k.a))
    deriv = np.array([rhs(y)[:1] for y in states])
    return AugmentedRun(
        TimeSeries(times, states[:, :1], ("x",)),
        states[:, 1:],
        TimeSeries(times, deriv, ("x",)),
    )


def simulate_logistic(params: LogisticParams, x0=None, t_end=100.0, dt=0.1,
                      max_step=DEFAULT_MAX_STEP) -> TimeSeries:
    return logistic_run(params, x0, t_end, dt, max_step).series


class _HermiteHistory:
    """Dense output of a scalar method-of-steps solution.

    Before ``t = 0`` the constant history is returned; afterwards the cubic
    Hermite interpolant built from the stored values and slopes.
    """

    def __init__(self, x0: float, capacity: int):
        self.x0 = x0
        self.t = np.empty(capacity)
        self.x = np.empty(capacity)
        self.f = np.empty(capacity)
        self.size = 0

    def append(self, t, x, f):
        self.t[self.size], self.x[self.size], self.f[self.size] = t, x, f
        self.size += 1

    def __call__(self, s: float, h: float) -> float:
        if s <= 0.0:
            return self.x0 if s < 0.0 else self.x[0]
        if s >= self.t[self.size - 1]:
            return self.x[self.size - 1]
        # uniform internal grid, so the interval index is direct
        k = min(int(s / h), self.size - 2)
        u = (s - self.t[k]) / h
        u2, u3 = u * u, u * u * u
        return ((2 * u3 - 3 * u2 + 1) * self.x[k] + (u3 - 2 * u2 + u) * h * self.f[k]
                + (-2 * u3 + 3 * u2) * self.x[k + 1] + (u3 - u2) * h * self.f[k + 1])


def simulate_ikeda(params: IkedaParams, history: float = 1.0, t_end: float = 70.0,
                   dt: float = 0.05, substeps: int = 1) -> TimeSeries:
    """Method of steps for ``x' = -x + alpha sin(x(t - tau))``.

    RK4 with internal step ``dt / substeps``; lagged values come from the
    cubic Hermite interpolant of the solution computed so far.
    """
    if dt > params.tau:
        raise ValueError(f"dt = {dt} exceeds the delay tau = {params.tau}")
    times = _grid(t_end, dt)
    h = dt / int(substeps)
    n_internal = (times.size - 1) * int(substeps)
    alpha, tau = params.alpha, params.tau
    hist = _HermiteHistory(float(history), n_internal + 1)

    def f(x, lag):
        return -x + alpha * math.sin(lag)

    x = float(history)
    hist.append(0.0, x, f(x, hist(-tau, h)))
    out = np.empty(times.size)
    out[0] = x
    for i in range(n_internal):
        t = i * h
        k1 = hist.f[i]
        lag_mid = hist(t + 0.5 * h - tau, h)
        k2 = f(x + 0.5 * h * k1, lag_mid)
        k3 = f(x + 0.5 * h * k2, lag_mid)
        k4 = f(x + h * k3, hist(t + h - tau, h))
        x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t_next = (i + 1) * h
        hist.append(t_next, x, f(x, hist(t_next - tau, h)))
        if (i + 1) % substeps == 0:
            out[(i + 1) // substeps] = x
    return TimeSeries(times, out[:, None], ("x",))
