"""Acceptance suite: one PASS/FAIL line per criterion, printed in the terminal summary.

Tolerances are pinned here and cross-checked against the package constants so
that loosening them in the library is caught.
"""

import time
from itertools import combinations

import numpy as np
import pytest

from lctsindy import repro
from lctsindy.features import FeatureMatrix, normalize_columns
from lctsindy.lct import ErlangKernel, convolution_oracle, integrate_chain
from lctsindy.preprocess import build_interpolant
from lctsindy.regression import STRidgeConfig, stridge
from lctsindy.signals import TimeSeries
from oracles import planted_instance, recovery_threshold, smooth_input

pytestmark = pytest.mark.slow

PINNED = {
    "coef_rel": 0.02,
    "rel_error": 5e-3,
    "ikeda_c1": 0.05,
    "ikeda_c2": 0.3,
    "replicate_hits": 4,
    "osc_min_peaks": 2,
}
RUNTIME_LIMIT = 600.0
STABILITY_SLACK = 1e-8
ORACLE_REL = 1e-4
COEF_ABS = 1e-8


def test_tolerances_are_pinned():
    for key, value in PINNED.items():
        assert repro.TOLERANCES[key] == value, key


def _report(record, number, title, checks):
    ok = all(c.passed for c in checks)
    record(number, title, ok, "; ".join(f"{c.name}: {c.detail}" for c in checks if not c.passed) or
           "; ".join(c.detail for c in checks))
    return ok


@pytest.fixture
def out(tmp_path):
    return tmp_path


def test_criterion_01_chain_recovers_gamma_delay(out, record_criterion):
    start = time.perf_counter()
    checks = repro.repro_table4(out, threads=1, figures=False)
    elapsed = time.perf_counter() - start
    checks.append(repro.Check("table4", "runtime", elapsed <= RUNTIME_LIMIT, f"{elapsed:.0f} s"))
    assert _report(record_criterion, 1, "clean p = 2 data: (20, 2), supports, 2% coefficients, rel_error", checks)


def test_criterion_02_discrete_baseline_narrow_kernel(out, record_criterion):
    checks = repro.repro_table3(out, threads=1, figures=False)
    assert _report(record_criterion, 2, "p = 100 data: discrete baseline tau* = 20, 2% coefficients", checks)


def test_criterion_03_discrete_baseline_failure_mode(out, record_criterion):
    checks = repro.repro_table2(out, threads=1, figures=False)
    required = checks[:2]  # the spurious-term check is informative only
    assert _report(record_criterion, 3, "p = 2 data: discrete tau* < 20 and BIC above chain", required)


def test_criterion_04_ikeda_derivative_selection(out, record_criterion):
    checks = repro.repro_table6(out, threads=1, figures=False)
    assert _report(record_criterion, 4, "Ikeda: tau* = 1.59 clean and in >= 4/5 replicates per noise level", checks)


def test_criterion_05_chain_state_dominates_derivatives(out, record_criterion):
    checks = repro.repro_fig4(out, threads=1, figures=False)
    assert _report(record_criterion, 5, "robustness grid: err_z < min(err_dM, err_dP)", checks[:1])


def test_criterion_06_noisy_end_to_end(out, record_criterion):
    checks = repro.repro_fig5(out, threads=1, figures=False)
    assert _report(record_criterion, 6, "noise 0.5, dt 0.5: (tau*, p*) in >= 4/5 replicates", checks)


def test_criterion_07_stability(record_criterion):
    rng = np.random.default_rng(20240607)
    t = np.linspace(0.0, 20.0, 81)
    dense = np.linspace(0.0, 20.0, 16001)
    worst, violations = -np.inf, 0
    for _ in range(200):
        k = ErlangKernel(int(rng.integers(1, 11)), float(rng.uniform(0.1, 10.0)))
        u = np.sin(rng.uniform(0.1, 2.0) * t) + 0.3 * rng.normal(size=t.size)
        v = u + rng.uniform(-1, 1) * rng.uniform(0, 1, t.size)
        fu = build_interpolant(TimeSeries(t, u))
        fv = build_interpolant(TimeSeries(t, v))
        zu = integrate_chain(k, lambda s: fu(s, 0), t).last_state()
        zv = integrate_chain(k, lambda s: fv(s, 0), t).last_state()
        margin = np.max(np.abs(zu - zv)) - np.max(np.abs(fu(dense, 0) - fv(dense, 0)))
        worst = max(worst, margin)
        violations += margin > STABILITY_SLACK
    ok = record_criterion(7, "stability over 200 random pairs", violations == 0,
                          f"{violations} violations, max(out - in) = {worst:.3g}")
    assert ok


def test_criterion_08_oracle_equivalence(record_criterion):
    rng = np.random.default_rng(8)
    worst = 0.0
    for seed in range(20):
        k = ErlangKernel.from_mean(float(rng.uniform(0.5, 4.0)), int(rng.integers(1, 11)))
        t = np.arange(0.0, 5 * k.mean() + 20.0, 0.01)
        f = build_interpolant(TimeSeries(t, smooth_input(seed, t)))
        u = lambda s: f(s, 0)  # noqa: E731
        z = integrate_chain(k, u, t).last_state()
        idx = np.linspace(np.searchsorted(t, 5 * k.mean()), t.size - 1, 20).astype(int)
        oracle = np.array([convolution_oracle(k, u, t[i], 0.0) for i in idx])
        worst = max(worst, np.max(np.abs(z[idx] - oracle)) / np.max(np.abs(oracle)))
    t = np.arange(0.0, 40.0 + 0.005, 0.01)
    f = build_interpolant(TimeSeries(t, np.sin(t)))
    keep = t >= 10.0
    limit = [float(np.max(np.abs(integrate_chain(ErlangKernel.from_mean(2.0, p), lambda s: f(s, 0), t)
                                 .last_state()[keep] - np.sin(t[keep] - 2.0)))) for p in (5, 20, 80, 200)]
    monotone = all(b < a for a, b in zip(limit, limit[1:]))
    ok = record_criterion(8, "chain vs quadrature oracle and discrete-delay limit",
                          worst <= ORACLE_REL and monotone,
                          f"max rel error {worst:.3g}; sup error p = 5, 20, 80, 200: "
                          + ", ".join(f"{e:.3g}" for e in limit))
    assert ok


def _minimal_exact_support(theta, y):
    """Smallest column subset that reproduces ``y`` exactly, by enumeration."""
    tol = 1e-10 * np.linalg.norm(y)
    for size in range(1, theta.shape[1] + 1):
        for sub in combinations(range(theta.shape[1]), size):
            w, *_ = np.linalg.lstsq(theta[:, list(sub)], y, rcond=None)
            if np.linalg.norm(theta[:, list(sub)] @ w - y) <= tol:
                return sub, w
    raise AssertionError("no exact support")


def test_criterion_09_sparse_recovery(record_criterion):
    mismatched, worst = 0, 0.0
    for seed in range(100):
        size = 1 + seed % 3
        raw, y, support, xi = planted_instance(seed, size=size)
        fm = normalize_columns(FeatureMatrix(tuple(f"f{i}" for i in range(raw.shape[1])), raw, (), ()))
        model = stridge(fm, y, STRidgeConfig(threshold=recovery_threshold(raw, y, xi)))
        sub, w = _minimal_exact_support(raw, y)
        mismatched += tuple(np.flatnonzero(model.active[:, 0])) != sub
        full = np.zeros_like(xi)
        full[list(sub)] = w
        worst = max(worst, float(np.max(np.abs(model.coefficients[:, 0] - full))))
    ok = record_criterion(9, "STRidge vs brute-force support on 100 planted instances",
                          mismatched == 0 and worst <= COEF_ABS,
                          f"{mismatched} support mismatches, max coefficient error {worst:.3g}")
    assert ok


def test_criterion_10_logistic_classification(out, record_criterion):
    checks = repro.repro_figS1(out, threads=1, figures=False)
    assert _report(record_criterion, 10, "logistic p = 2 non-oscillatory, p = 10 oscillatory", checks)
