"""Candidate sweep over delay structures and model selection.

For every candidate delay (mean ``tau``, chain order ``p``, optional Hill
parameters) the delayed channel is rebuilt from data, a sparse model is fitted
on the training segment, and the candidate is scored either by simulating the
identified model forward (BIC on the validation segment) or by its
derivative mismatch on the validation segment.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Sequence

import numpy as np
from numba import njit

from .features import (
    LagSpec,
    LibrarySpec,
    build_library,
    compile_features,
    normalize_columns,
)
from .lct import MAX_RATE_STEP, ErlangKernel, integrate_chain
from .preprocess import Preprocessed, SmootherConfig, preprocess
from .regression import SparseModel, STRidgeConfig, stridge
from .signals import SplitSpec, TimeSeries, split_index

BLOWUP = 1e12


@dataclass(frozen=True)
class Candidate:
    tau: float
    p: int | None = None
    hill_P0: float | None = None
    hill_n: float | None = None
    index: int = 0

    @property
    def kernel(self) -> ErlangKernel | None:
        return None if self.p is None else ErlangKernel.from_mean(self.tau, self.p)

    def as_dict(self) -> dict:
        out = {"tau": self.tau, "p": self.p}
        if self.hill_P0 is not None:
            out["hill_P0"] = self.hill_P0
        if self.hill_n is not None:
            out["hill_n"] = self.hill_n
        return out


@dataclass(frozen=True)
class CandidateGrid:
    """Product grid iterated in the order tau, p, Hill P0, Hill n.

    ``ps`` of ``(None,)`` means no chain (discrete-lag baseline).
    """

    taus: tuple[float, ...]
    ps: tuple = (None,)
    hill_P0s: tuple = (None,)
    hill_ns: tuple = (None,)

    def __post_init__(self):
        for name in ("taus", "ps", "hill_P0s", "hill_ns"):
            vals = tuple(getattr(self, name) or (None,))
            object.__setattr__(self, name, vals)
        if not self.taus or any(t is None or not t > 0 for t in self.taus):
            raise ValueError("candidate delays must be positive and non-empty")
        for p in self.ps:
            if p is not None and (int(p) != p or p < 1):
                raise ValueError(f"chain orders must be integers >= 1, got {p}")

    def candidates(self) -> list[Candidate]:
        return [
            Candidate(float(t), None if p is None else int(p), P0, n, i)
            for i, (t, p, P0, n) in enumerate(product(self.taus, self.ps, self.hill_P0s, self.hill_ns))
        ]

    def __len__(self):
        return len(self.taus) * len(self.ps) * len(self.hill_P0s) * len(self.hill_ns)


@dataclass(frozen=True)
class IdentifyConfig:
    """Everything the sweep needs besides the data and the grid.

    ``burn_in`` excludes the first ``burn_in * tau`` time units from the
    regression. ``score_against`` picks the reference for trajectory errors:
    the raw samples or their smoothed version.
    """

    library: LibrarySpec = LibrarySpec()
    stridge: STRidgeConfig = STRidgeConfig()
    smoother: SmootherConfig = SmootherConfig()
    split: SplitSpec = SplitSpec()
    delay_source: str = "P"
    delay_name: str = "z"
    alpha: float = 1.0
    burn_in: float = 0.0
    criterion: str = "bic"
    threads: int = 1
    max_step: float | None = None
    score_against: str = "raw"

    def __post_init__(self):
        if self.criterion not in ("bic", "deriv"):
            raise ValueError(f"criterion must be 'bic' or 'deriv', got {self.criterion!r}")
        if self.score_against not in ("raw", "smoothed"):
            raise ValueError("score_against must be 'raw' or 'smoothed'")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")


@dataclass(frozen=True)
class FitScore:
    rss: float
    mse: float
    rel_error: tuple[float, ...]
    bic: float
    k: int
    n_scored: int
    deriv_error: float | None = None
    blew_up: bool = False

    def as_dict(self) -> dict:
        return {
            "rss": self.rss,
            "mse": self.mse,
            "rel_error": list(self.rel_error),
            "bic": self.bic,
            "k": self.k,
            "n_scored": self.n_scored,
            "deriv_error": self.deriv_error,
            "blew_up": self.blew_up,
        }


@dataclass(frozen=True)
class LeaderboardEntry:
    candidate: Candidate
    score: FitScore
    model: SparseModel


@dataclass
class IdentifiedModel:
    model: SparseModel
    candidate: Candidate
    score: FitScore
    leaderboard: list[LeaderboardEntry]
    method: str
    criterion: str
    simulation: TimeSeries | None = None
    split_time: float | None = None
    library: LibrarySpec | None = None

    @property
    def tau_star(self) -> float:
        return self.candidate.tau

    @property
    def p_star(self) -> int | None:
        return self.candidate.p

    @property
    def hill_star(self):
        if self.candidate.hill_P0 is None and self.candidate.hill_n is None:
            return None
        return self.candidate.hill_P0, self.candidate.hill_n


def bic(mse: float, n: int, k: int, alpha: float = 1.0, chain_length: int = 0) -> float:
    """``N ln(MSE) + k ln N + alpha * sum(p)``; infinite for a non-finite MSE."""
    if not np.isfinite(mse):
        return math.inf
    if mse <= 0:
        return -math.inf
    return n * math.log(mse) + k * math.log(n) + alpha * chain_length


# --------------------------------------------------------------------------
# compiled simulators of identified models


@njit(cache=True, nogil=True)
def _features_times_coefs(sig, kinds, powers, targets, p0s, ns, coefs, out):
    out[:] = 0.0
    for i in range(kinds.size):
        if kinds[i] == 0:
            v = 1.0
            for j in range(sig.size):
                k = powers[i, j]
                if k == 1:
                    v *= sig[j]
                elif k > 1:
                    v *= sig[j] ** k
        elif kinds[i] == 1:
            v = 1.0 / (1.0 + (sig[targets[i]] / p0s[i]) ** ns[i])
        else:
            v = math.sin(sig[targets[i]])
        for j in range(out.size):
            out[j] += v * coefs[i, j]


@njit(cache=True, nogil=True)
def _lct_rhs(y, d, src, a, kinds, powers, targets, p0s, ns, coefs, sig, dx, out):
    p = y.size - d
    for j in range(d):
        sig[j] = y[j]
    if p > 0:
        sig[d] = y[y.size - 1]
    _features_times_coefs(sig, kinds, powers, targets, p0s, ns, coefs, dx)
    for j in range(d):
        out[j] = dx[j]
    if p > 0:
        out[d] = a * (y[src] - y[d])
        for j in range(d + 1, y.size):
            out[j] = a * (y[j - 1] - y[j])


@njit(cache=True, nogil=True)
def _simulate_lct(y0, d, src, a, nsub, h, kinds, powers, targets, p0s, ns, coefs, limit, out):
    n = y0.size
    y = y0.copy()
    tmp = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    nsig = d + (1 if n > d else 0)
    sig = np.empty(nsig)
    dx = np.empty(d)
    out[0, :] = y[:d]
    for i in range(nsub.size):
        hh = h[i]
        for _ in range(nsub[i]):
            _lct_rhs(y, d, src, a, kinds, powers, targets, p0s, ns, coefs, sig, dx, k1)
            for j in range(n):
                tmp[j] = y[j] + 0.5 * hh * k1[j]
            _lct_rhs(tmp, d, src, a, kinds, powers, targets, p0s, ns, coefs, sig, dx, k2)
            for j in range(n):
                tmp[j] = y[j] + 0.5 * hh * k2[j]
            _lct_rhs(tmp, d, src, a, kinds, powers, targets, p0s, ns, coefs, sig, dx, k3)
            for j in range(n):
                tmp[j] = y[j] + hh * k3[j]
            _lct_rhs(tmp, d, src, a, kinds, powers, targets, p0s, ns, coefs, sig, dx, k4)
            for j in range(n):
                y[j] += hh / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        for j in range(d):
            if not (abs(y[j]) <= limit):
                return i + 1
            out[i + 1, j] = y[j]
    return nsub.size + 1


@njit(cache=True, nogil=True)
def _lagged(s, src, h, xs, fs, size, x0):
    # Hermite dense output of the stored trajectory; constant history before 0
    if s < 0.0:
        return x0[src]
    last = (size - 1) * h
    if s >= last:
        return xs[size - 1, src]
    k = int(s / h)
    if k > size - 2:
        k = size - 2
    u = (s - k * h) / h
    u2 = u * u
    u3 = u2 * u
    return ((2 * u3 - 3 * u2 + 1) * xs[k, src] + (u3 - 2 * u2 + u) * h * fs[k, src]
            + (-2 * u3 + 3 * u2) * xs[k + 1, src] + (u3 - u2) * h * fs[k + 1, src])


@njit(cache=True, nogil=True)
def _simulate_lag(x0, src, tau, h, steps, every, kinds, powers, targets, p0s, ns, coefs, limit, out):
    d = x0.size
    xs = np.empty((steps + 1, d))
    fs = np.empty((steps + 1, d))
    sig = np.empty(d + 1)
    k1 = np.empty(d)
    k2 = np.empty(d)
    k3 = np.empty(d)
    k4 = np.empty(d)
    tmp = np.empty(d)
    xs[0, :] = x0
    for j in range(d):
        sig[j] = x0[j]
    sig[d] = x0[src]
    _features_times_coefs(sig, kinds, powers, targets, p0s, ns, coefs, k1)
    fs[0, :] = k1
    out[0, :] = x0
    y = x0.copy()
    for i in range(steps):
        t = i * h
        for j in range(d):
            k1[j] = fs[i, j]
        lag_mid = _lagged(t + 0.5 * h - tau, src, h, xs, fs, i + 1, x0)
        for j in range(d):
            tmp[j] = y[j] + 0.5 * h * k1[j]
            sig[j] = tmp[j]
        sig[d] = lag_mid
        _features_times_coefs(sig, kinds, powers, targets, p0s, ns, coefs, k2)
        for j in range(d):
            tmp[j] = y[j] + 0.5 * h * k2[j]
            sig[j] = tmp[j]
        _features_times_coefs(sig, kinds, powers, targets, p0s, ns, coefs, k3)
        for j in range(d):
            tmp[j] = y[j] + h * k3[j]
            sig[j] = tmp[j]
        sig[d] = _lagged(t + h - tau, src, h, xs, fs, i + 1, x0)
        _features_times_coefs(sig, kinds, powers, targets, p0s, ns, coefs, k4)
        for j in range(d):
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            xs[i + 1, j] = y[j]
            sig[j] = y[j]
        sig[d] = _lagged(t + h - tau, src, h, xs, fs, i + 2, x0)
        _features_times_coefs(sig, kinds, powers, targets, p0s, ns, coefs, k1)
        for j in range(d):
            fs[i + 1, j] = k1[j]
        if (i + 1) % every == 0:
            row = (i + 1) // every
            for j in range(d):
                if not (abs(y[j]) <= limit):
                    return row
                out[row, j] = y[j]
    return steps // every + 1


def _active_rows(model: SparseModel, features):
    keep = np.any(model.coefficients != 0, axis=1)
    feats = [f for f, k in zip(features, keep) if k]
    return feats, np.ascontiguousarray(model.coefficients[keep])


def simulate_identified(model: SparseModel, features, times, x0, source: int = 0,
                        kernel: ErlangKernel | None = None, lag: float | None = None,
                        max_step: float | None = None, limit: float = BLOWUP):
    """Integrate ``x' = Theta(x, delayed) Xi`` from ``x0``.

    With ``kernel`` the delayed signal is the terminal state of a live chain
    fed by component ``source`` and started at ``x0[source]``. With ``lag``
    it is ``x_source(t - lag)`` with constant history ``x0`` (method of
    steps on a uniform grid). With neither the model is a plain ODE.

    Returns ``(series, blew_up)``; on blow-up the series stops at the last
    sample whose states stayed below ``limit``.
    """
    times = np.asarray(times, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    d = x0.size
    n_base = d + (0 if kernel is None and lag is None else 1)
    feats, coefs = _active_rows(model, features)
    kinds, powers, targets, p0s, ns = compile_features(feats, n_base)
    out = np.empty((times.size, d))
    rel = times - times[0]
    if lag is None:
        a = kernel.a if kernel is not None else 0.0
        spans = np.diff(rel)
        cap = spans.max() if max_step is None else max_step
        if kernel is not None:
            cap = min(cap, MAX_RATE_STEP / a)
        nsub = np.maximum(1, np.ceil(spans / cap - 1e-9)).astype(np.int64)
        y0 = x0 if kernel is None else np.concatenate([x0, np.full(kernel.p, x0[source])])
        filled = _simulate_lct(y0, d, source, a, nsub, spans / nsub, kinds, powers, targets,
                               p0s, ns, coefs, limit, out)
    else:
        dt = rel[-1] / (times.size - 1)
        if not np.allclose(np.diff(rel), dt, rtol=1e-9, atol=0):
            raise ValueError("lag models need a uniform time grid")
        cap = dt if max_step is None else min(dt, max_step)
        every = max(1, math.ceil(dt / cap - 1e-9))
        h = dt / every
        if h > lag:
            raise ValueError("internal step exceeds the lag")
        filled = _simulate_lag(x0, source, float(lag), h, (times.size - 1) * every, every,
                               kinds, powers, targets, p0s, ns, coefs, limit, out)
    blew_up = filled < times.size
    if filled < 2:
        series = None
    else:
        series = TimeSeries(times[:filled], out[:filled], model.component_names)
    return series, blew_up


# --------------------------------------------------------------------------
# candidate scoring


@dataclass(frozen=True)
class PreparedData:
    """Preprocessed series with its split index, shared by all candidates."""

    prep: Preprocessed
    boundary: int
    source: int

    @classmethod
    def build(cls, data: TimeSeries, config: IdentifyConfig) -> "PreparedData":
        prep = preprocess(data, config.smoother)
        b = split_index(data.times, config.split.fraction)
        if b + 1 < 2 or len(data) - b - 1 < 2:
            raise ValueError("split too extreme")
        return cls(prep, b, data.index(config.delay_source))

    @property
    def times(self):
        return self.prep.raw.times

    @property
    def validation(self) -> slice:
        return slice(self.boundary + 1, None)

    def training_rows(self, start_time: float) -> np.ndarray:
        rows = np.arange(self.boundary + 1)
        return rows[self.times[rows] >= start_time]


def candidate_library(config: IdentifyConfig, cand: Candidate, method: str) -> LibrarySpec:
    lib = config.library
    if cand.hill_P0 is not None or cand.hill_n is not None:
        lib = lib.with_hill(cand.hill_P0, cand.hill_n)
    if method == "discrete":
        lib = replace(lib, lag_features=(LagSpec(config.delay_source, cand.tau, config.delay_name),))
    return lib


def _candidate_theta(data: PreparedData, cand: Candidate, config: IdentifyConfig, method: str):
    lib = candidate_library(config, cand, method)
    smooth = data.prep.smoothed
    if method == "lct":
        src_name = smooth.names[data.source]
        chain = integrate_chain(
            cand.kernel, lambda t: data.prep.interpolant(t, src_name), smooth.times
        )
        theta = build_library(lib, smooth, {config.delay_name: chain})
    else:
        theta = build_library(lib, smooth, lag_interp=data.prep.interpolant)
    return lib, theta


def fit_candidate(data: PreparedData, cand: Candidate, config: IdentifyConfig, method: str = "lct"):
    """Fit the sparse model of one candidate on the training segment.

    Returns ``(model, raw_theta)`` where ``raw_theta`` covers the full grid.
    """
    lib, theta = _candidate_theta(data, cand, config, method)
    start = data.times[0] + config.burn_in * cand.tau
    rows = data.training_rows(start)
    if rows.size < 2:
        raise ValueError("burn-in leaves fewer than 2 training samples")
    normalized = normalize_columns(theta.rows(rows))
    model = stridge(normalized, data.prep.derivative.values[rows], config.stridge)
    # re-express on the full column set so every candidate shares one layout
    full = np.zeros((len(theta.names), model.coefficients.shape[1]))
    idx = [theta.names.index(n) for n in normalized.names]
    full[idx] = model.coefficients
    model = SparseModel(full, theta.names, data.prep.raw.names, model.flags)
    return model, theta


def _simulate_candidate(data: PreparedData, cand: Candidate, model: SparseModel, theta, config, method):
    x0 = data.prep.smoothed.values[0]
    return simulate_identified(
        model,
        theta.features,
        data.times,
        x0,
        source=data.source,
        kernel=cand.kernel if method == "lct" else None,
        lag=cand.tau if method == "discrete" else None,
        max_step=config.max_step,
    )


def trajectory_score(reference: np.ndarray, sim: TimeSeries | None, blew_up: bool, k: int,
                     alpha: float, chain_length: int) -> FitScore:
    n, d = reference.shape
    if blew_up or sim is None:
        return FitScore(math.inf, math.inf, (math.inf,) * d, math.inf, k, n, blew_up=True)
    resid = sim.values[-n:] - reference
    rss = float(np.sum(resid**2))
    mse = rss / (n * d)
    rel = tuple(
        float(np.linalg.norm(resid[:, j]) / np.linalg.norm(reference[:, j])) for j in range(d)
    )
    return FitScore(rss, mse, rel, bic(mse, n, k, alpha, chain_length), k, n)


def score_candidate(data: PreparedData, cand: Candidate, config: IdentifyConfig, method: str = "lct"):
    """Fit, then score one candidate. Returns ``(model, score)``."""
    model, theta = fit_candidate(data, cand, config, method)
    chain_len = cand.p if (method == "lct" and cand.p) else 0
    val = data.validation
    if config.criterion == "deriv":
        pred = theta.values[val] @ model.coefficients
        target = data.prep.derivative.values[val]
        err = float(np.linalg.norm(pred - target) / np.linalg.norm(target))
        n = target.shape[0]
        score = FitScore(math.nan, math.nan, (math.nan,) * target.shape[1], math.nan, model.k, n,
                         deriv_error=err if np.isfinite(err) else math.inf)
        return model, score
    sim, blew_up = _simulate_candidate(data, cand, model, theta, config, method)
    if sim is not None and len(sim) < len(data.times):
        blew_up = True
    ref = (data.prep.raw if config.score_against == "raw" else data.prep.smoothed).values[val]
    return model, trajectory_score(ref, sim, blew_up, model.k, config.alpha, chain_len)


def _sort_key(entry: LeaderboardEntry, criterion: str):
    s = entry.score
    value = s.deriv_error if criterion == "deriv" else s.bic
    if value is None or not np.isfinite(value) and value != -math.inf:
        value = math.inf
    c = entry.candidate
    return (value, c.p or 0, c.tau, c.index)


def _sweep(data: TimeSeries, grid: CandidateGrid, config: IdentifyConfig, method: str) -> IdentifiedModel:
    prepared = PreparedData.build(data, config)
    cands = grid.candidates()

    def evaluate(cand):
        model, score = score_candidate(prepared, cand, config, method)
        return LeaderboardEntry(cand, score, model)

    if config.threads > 1 and len(cands) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            entries = list(pool.map(evaluate, cands))
    else:
        entries = [evaluate(c) for c in cands]
    board = sorted(entries, key=lambda e: _sort_key(e, config.criterion))
    best = board[0]
    if _sort_key(best, config.criterion)[0] == math.inf:
        raise RuntimeError("no viable candidate: every candidate diverged or failed")
    _, theta = _candidate_theta(prepared, best.candidate, config, method)
    sim, _ = _simulate_candidate(prepared, best.candidate, best.model, theta, config, method)
    return IdentifiedModel(
        model=best.model,
        candidate=best.candidate,
        score=best.score,
        leaderboard=board,
        method=method,
        criterion=config.criterion,
        simulation=sim,
        split_time=float(prepared.times[prepared.boundary]),
        library=candidate_library(config, best.candidate, method),
    )


def identify(data: TimeSeries, grid: CandidateGrid, config: IdentifyConfig) -> IdentifiedModel:
    """Chain-augmented identification: sweep ``(tau, p, ...)`` and keep the best."""
    if any(p is None for p in grid.ps):
        raise ValueError("identify needs chain orders in the grid")
    return _sweep(data, grid, config, "lct")


def identify_discrete_baseline(data: TimeSeries, taus: Sequence[float], config: IdentifyConfig,
                               hill_P0s=(None,), hill_ns=(None,)) -> IdentifiedModel:
    """Same sweep with the lagged signal ``source(t - tau)`` as delayed channel."""
    grid = CandidateGrid(tuple(taus), (None,), hill_P0s, hill_ns)
    return _sweep(data, grid, config, "discrete")


def derivative_error_select(data: TimeSeries, grid: CandidateGrid, config: IdentifyConfig,
                            method: str = "lct") -> IdentifiedModel:
    """Select by validation derivative error, for chaotic data where trajectory
    errors carry no information beyond the first few delays."""
    return _sweep(data, grid, replace(config, criterion="deriv"), method)


# --------------------------------------------------------------------------
# sampling / noise robustness of the reconstructed delayed state


ROBUSTNESS_COLUMNS = ("dt", "eta", "err_z", "err_dM", "err_dP")


def relative_error(estimate, truth) -> float:
    """Global l2 ratio ``||estimate - truth|| / ||truth||``."""
    return float(np.linalg.norm(np.asarray(estimate) - truth) / np.linalg.norm(truth))


def robustness_study(dts: Sequence[float], etas: Sequence[float], params=None, history=(3.0, 100.0),
                     t_end: float = 1000.0, fine_dt: float = 0.02, smoother: SmootherConfig = SmootherConfig(),
                     seed: int = 0) -> list[dict]:
    """Error of the chain-reconstructed delayed state versus derivative errors.

    One clean Hes1 run on a fine grid is subsampled at every ``dt`` and
    corrupted at every noise level ``eta``; each cell smooths, interpolates,
    rebuilds ``z_p`` with the true kernel, and differentiates the smoothed
    data. Errors are global l2 ratios against the exact chain state and the
    exact right-hand side.
    """
    from .signals import NoiseSpec, add_noise
    from .simulate import Hes1Params, hes1_run

    params = params or Hes1Params()
    run = hes1_run(params, history, t_end, fine_dt)
    k = params.kernel
    rows = []
    for i, dt in enumerate(dts):
        stride = int(round(dt / fine_dt))
        if not math.isclose(stride * fine_dt, dt, rel_tol=1e-9):
            raise ValueError(f"sampling step {dt} is not a multiple of the fine step {fine_dt}")
        sel = slice(0, None, stride)
        clean = run.series.select(sel)
        z_true = run.chain[sel, -1]
        d_true = run.derivative.values[sel]
        for j, eta in enumerate(etas):
            noisy = add_noise(clean, NoiseSpec(eta, seed + 1000 * i + j))
            prep = preprocess(noisy, smoother)
            chain = integrate_chain(k, lambda t: prep.interpolant(t, "P"), clean.times)
            rows.append({
                "dt": float(dt),
                "eta": float(eta),
                "err_z": relative_error(chain.last_state(), z_true),
                "err_dM": relative_error(prep.derivative.values[:, 0], d_true[:, 0]),
                "err_dP": relative_error(prep.derivative.values[:, 1], d_true[:, 1]),
            })
    return rows
