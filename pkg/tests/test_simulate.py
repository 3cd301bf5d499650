import numpy as np
import pytest
from scipy.optimize import brentq

from lctsindy.experiments import count_peaks
from lctsindy.lct import convolution_oracle
from lctsindy.preprocess import build_interpolant
from lctsindy.simulate import (
    Hes1Params,
    IkedaParams,
    LogisticParams,
    hes1_run,
    logistic_run,
    simulate_hes1,
    simulate_ikeda,
    simulate_logistic,
)


def _equilibrium_oracle(p: Hes1Params):
    # alpha_p M = mu_p P and alpha_m / (1 + (P/P0)^n) = mu_m M
    g = lambda P: p.alpha_m / (1 + (P / p.P0) ** p.n) - p.mu_m * p.mu_p * P / p.alpha_p  # noqa: E731
    P = brentq(g, 0.0, 1e6, xtol=1e-14, rtol=1e-15)
    return p.mu_p * P / p.alpha_p, P


def test_equilibrium_matches_root_finder():
    p = Hes1Params()
    M, P = p.equilibrium()
    Mo, Po = _equilibrium_oracle(p)
    assert M == pytest.approx(Mo, rel=1e-10) and P == pytest.approx(Po, rel=1e-10)


@pytest.mark.parametrize("p_order", [2, 100])
def test_hes1_equilibrium_is_fixed(p_order):
    p = Hes1Params(p=p_order)
    eq = _equilibrium_oracle(p)
    ts = simulate_hes1(p, eq, t_end=200.0, dt=0.5)
    assert np.max(np.abs(ts.values - np.array(eq))) < 1e-6


@pytest.mark.parametrize("p_order", [2, 100])
def test_hes1_sustained_oscillation(p_order):
    ts = simulate_hes1(Hes1Params(tau=20.0, p=p_order), t_end=500.0, dt=0.1)
    tail = ts.values[int(0.8 * len(ts)):]
    amp = tail.max(axis=0) - tail.min(axis=0)
    assert np.all(amp > 0.1 * tail.mean(axis=0))
    assert count_peaks(ts.values[:, 1], tail=0.5) >= 2


def test_hes1_positive_and_deterministic():
    a = simulate_hes1(Hes1Params(), t_end=300.0, dt=0.2)
    b = simulate_hes1(Hes1Params(), t_end=300.0, dt=0.2)
    assert a.equals(b)
    assert np.all(a.values >= 0)
    assert a.names == ("M", "P")


def test_hes1_param_validation():
    with pytest.raises(ValueError):
        Hes1Params(mu_m=0.0)
    with pytest.raises(ValueError):
        Hes1Params(n=2.5)
    with pytest.raises(ValueError):
        Hes1Params.from_mapping({"tau": 20, "bogus": 1})


def test_chain_state_matches_convolution_oracle():
    run = hes1_run(Hes1Params(tau=15.0, p=10), (3.0, 100.0), t_end=300.0, dt=0.02)
    f = build_interpolant(run.series)
    k = Hes1Params(tau=15.0, p=10).kernel
    idx = np.linspace(50, len(run.series) - 1, 20).astype(int)
    P = lambda s: f(s, "P")  # noqa: E731
    for i in idx:
        t = run.series.times[i]
        oracle = convolution_oracle(k, P, t, 0.0)
        assert run.chain[i, -1] == pytest.approx(oracle, rel=1e-4)


def test_logistic_carrying_capacity_fixed():
    p = LogisticParams(r=0.6, K=2.0, tau=4.0, p=3)
    ts = simulate_logistic(p, 2.0, t_end=100.0, dt=0.1)
    assert np.max(np.abs(ts.values - 2.0)) < 1e-12


def test_logistic_regimes():
    stable = simulate_logistic(LogisticParams(r=0.6, tau=4.0, p=2), t_end=200.0, dt=0.1)
    osc = simulate_logistic(LogisticParams(r=0.6, tau=4.0, p=10), t_end=200.0, dt=0.1)
    assert count_peaks(stable.values[:, 0]) < 2
    assert abs(stable.values[-1, 0] - 1.0) < 1e-3
    assert count_peaks(osc.values[:, 0]) >= 2
    tail = osc.values[-500:, 0]
    assert tail.min() < 1.0 < tail.max()


def test_logistic_positive_and_default_history():
    run = logistic_run(LogisticParams(r=0.6, p=10), None, t_end=100.0, dt=0.1)
    assert run.series.values[0, 0] == 0.5
    assert np.all(run.series.values > 0)
    with pytest.raises(ValueError):
        simulate_logistic(LogisticParams(), x0=0.0)


def test_ikeda_origin_fixed():
    ts = simulate_ikeda(IkedaParams(), 0.0, 30.0, 0.05)
    assert np.all(ts.values == 0.0)


def test_ikeda_bounded():
    p = IkedaParams(alpha=6.0, tau=1.59)
    ts = simulate_ikeda(p, 1.0, 70.0, 0.05)
    assert np.max(np.abs(ts.values)) <= max(1.0, p.alpha) + 1e-9
    assert np.std(ts.values[len(ts) // 2:]) > 0.5


def test_ikeda_step_convergence():
    p = IkedaParams()
    coarse = simulate_ikeda(p, 1.0, 10.0, 0.05)
    fine = simulate_ikeda(p, 1.0, 10.0, 0.025)
    assert np.max(np.abs(fine.values[::2] - coarse.values)) < 1e-3
    sub = simulate_ikeda(p, 1.0, 10.0, 0.05, substeps=2)
    assert np.max(np.abs(fine.values[::2] - sub.values)) < 1e-12


def test_ikeda_dt_above_tau():
    with pytest.raises(ValueError):
        simulate_ikeda(IkedaParams(tau=0.1), 1.0, 10.0, 0.2)


def test_ikeda_first_interval_closed_form():
    # on [0, tau] the lag reads the constant history: x' = -x + alpha sin(h)
    p = IkedaParams()
    ts = simulate_ikeda(p, 1.0, 1.5, 0.05)
    t = ts.times
    exact = p.alpha * np.sin(1.0) + (1.0 - p.alpha * np.sin(1.0)) * np.exp(-t)
    assert np.max(np.abs(ts.values[:, 0] - exact)) < 1e-7
