"""Erlang memory kernels and the linear chain trick.

A distributed delay with an Erlang kernel of order ``p`` and rate ``a`` is the
terminal state of ``p`` first-order stages ``z_j' = a (z_{j-1} - z_j)`` fed by
``z_0 = u``. This module integrates that chain for a continuous input and
provides a quadrature oracle for the equivalent convolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit
from scipy.integrate import quad
from scipy.special import gammaincc, gammaln

#: internal RK4 steps satisfy ``a * h <= MAX_RATE_STEP``
MAX_RATE_STEP = 0.1
#: orders above this evaluate the density in log space
LOG_SPACE_ORDER = 20


@dataclass(frozen=True)
class ErlangKernel:
    p: int
    a: float

    def __post_init__(self):
        if int(self.p) != self.p or self.p <= 0:
            raise ValueError(f"kernel order must be a positive integer, got {self.p}")
        if not self.a > 0:
            raise ValueError(f"kernel rate must be positive, got {self.a}")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "a", float(self.a))

    @classmethod
    def from_mean(cls, tau: float, p: int) -> "ErlangKernel":
        if not tau > 0:
            raise ValueError(f"mean delay must be positive, got {tau}")
        return cls(p, p / tau)

    def mean(self) -> float:
        return self.p / self.a

    def variance(self) -> float:
        return self.p / self.a**2

    def pdf(self, s):
        return kernel_eval(self, s)

    def survival(self, s):
        """Mass of the kernel beyond lag ``s``."""
        return gammaincc(self.p, self.a * np.asarray(s, dtype=float))


def kernel_eval(k: ErlangKernel, s):
    """``a^p s^(p-1) exp(-a s) / (p-1)!`` for ``s >= 0``."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("kernel lag must be non-negative")
    p, a = k.p, k.a
    if p == 1:
        out = a * np.exp(-a * s_arr)
    elif p <= LOG_SPACE_ORDER:
        out = a**p * s_arr ** (p - 1) * np.exp(-a * s_arr) / math.factorial(p - 1)
    else:
        with np.errstate(divide="ignore"):
            logs = np.log(s_arr)
        out = np.exp(p * math.log(a) + (p - 1) * logs - a * s_arr - gammaln(p))
    return float(out) if np.ndim(s) == 0 else out


@dataclass(frozen=True)
class ChainTrajectory:
    """Chain states ``z_1..z_p`` recorded on a time grid."""

    times: np.ndarray
    states: np.ndarray
    kernel: ErlangKernel
    initial_state: np.ndarray

    def last_state(self) -> np.ndarray:
        return self.states[:, -1]


def substep_schedule(times: np.ndarray, rate: float):
    """Number of RK4 substeps per grid interval and the substep lengths."""
    dts = np.diff(times)
    nsub = np.maximum(1, np.ceil(dts * rate / MAX_RATE_STEP - 1e-9)).astype(np.int64)
    h = np.repeat(dts / nsub, nsub)
    starts = np.repeat(times[:-1], nsub) + _offsets(nsub) * h
    return nsub, starts, h


def _offsets(nsub: np.ndarray) -> np.ndarray:
    # 0, 1, ..., n_i - 1 for every interval, flattened
    total = int(nsub.sum())
    first = np.repeat(np.cumsum(nsub) - nsub, nsub)
    return (np.arange(total) - first).astype(float)


@njit(cache=True, nogil=True)
def _chain_rhs(a, z, u, out):
    out[0] = a * (u - z[0])
    for j in range(1, z.size):
        out[j] = a * (z[j - 1] - z[j])


@njit(cache=True, nogil=True)
def _chain_rk4(a, h, u0, um, u1, nsub, z0, out):
    p = z0.size
    z = z0.copy()
    tmp = np.empty(p)
    k1 = np.empty(p)
    k2 = np.empty(p)
    k3 = np.empty(p)
    k4 = np.empty(p)
    out[0, :] = z
    step = 0
    for i in range(nsub.size):
        for _ in range(nsub[i]):
            hh = h[step]
            _chain_rhs(a, z, u0[step], k1)
            for j in range(p):
                tmp[j] = z[j] + 0.5 * hh * k1[j]
            _chain_rhs(a, tmp, um[step], k2)
            for j in range(p):
                tmp[j] = z[j] + 0.5 * hh * k2[j]
            _chain_rhs(a, tmp, um[step], k3)
            for j in range(p):
                tmp[j] = z[j] + hh * k3[j]
            _chain_rhs(a, tmp, u1[step], k4)
            for j in range(p):
                z[j] += hh / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            step += 1
        out[i + 1, :] = z


def stage_inputs(u: Callable, times: np.ndarray, rate: float):
    """Substep schedule plus the input sampled at every RK4 stage time."""
    nsub, starts, h = substep_schedule(times, rate)
    u0 = np.asarray(u(starts), dtype=float)
    um = np.asarray(u(starts + 0.5 * h), dtype=float)
    u1 = np.asarray(u(starts + h), dtype=float)
    return nsub, h, u0, um, u1


def integrate_chain(kernel: ErlangKernel, u: Callable, times, init=None) -> ChainTrajectory:
    """Drive the chain with ``u`` and record its states on ``times``.

    ``u`` maps an array of times to an array of input values (an
    :class:`~lctsindy.preprocess.Interpolant` column works). Fixed-step RK4 is
    used with substeps keeping ``a * h <= 0.1``. The default initial state is
    ``u(t_1)`` in every stage, i.e. a constant input history.
    """
    times = np.asarray(times, dtype=float)
    if init is None:
        init = np.full(kernel.p, float(np.asarray(u(times[:1]))[0]))
    init = np.asarray(init, dtype=float).reshape(-1)
    if init.size != kernel.p:
        raise ValueError(f"initial state has {init.size} entries, kernel order is {kernel.p}")
    nsub, h, u0, um, u1 = stage_inputs(u, times, kernel.a)
    states = np.empty((times.size, kernel.p))
    _chain_rk4(kernel.a, h, u0, um, u1, nsub, init, states)
    return ChainTrajectory(times, states, kernel, init)


def convolution_oracle(
    kernel: ErlangKernel,
    u: Callable[[float], float],
    t: float,
    history_start: float,
    include_history: bool = True,
    epsabs: float = 1e-9,
) -> float:
    """Evaluate ``int_0^(t - t0) K(s) u(t - s) ds`` by adaptive quadrature.

    With ``include_history`` the input before ``t0 = history_start`` is taken
    to be the constant ``u(t0)``, which adds ``u(t0)`` times the kernel mass
    beyond ``t - t0``. That is the convolution a chain started from
    ``u(t0) * ones(p)`` reproduces. Without it the integral is truncated.
    """
    if t < history_start:
        raise ValueError("t must not precede history_start")
    span = t - history_start

    def integrand(s):
        return kernel_eval(kernel, s) * float(np.asarray(u(t - s)).reshape(-1)[0])

    value = 0.0
    if span > 0:
        # split at the kernel's bulk so quad does not miss a narrow peak
        mean, sd = kernel.mean(), math.sqrt(kernel.variance())
        points = sorted({x for x in (mean - 3 * sd, mean, mean + 3 * sd) if 0 < x < span})
        edges = [0.0, *points, span]
        for lo, hi in zip(edges[:-1], edges[1:]):
            part, _ = quad(integrand, lo, hi, epsabs=epsabs / len(edges), epsrel=1e-12, limit=500)
            value += part
    if include_history:
        value += float(np.asarray(u(history_start)).reshape(-1)[0]) * float(kernel.survival(span))
    return value
