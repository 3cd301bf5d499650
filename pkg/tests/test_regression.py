import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lctsindy.features import FeatureMatrix, HillSpec, LibrarySpec, build_library, normalize_columns
from lctsindy.lct import integrate_chain
from lctsindy.preprocess import SmootherConfig, preprocess
from lctsindy.regression import SparseModel, STRidgeConfig, stlsq, stridge
from lctsindy.simulate import Hes1Params, simulate_hes1
from oracles import brute_force_support, planted_instance, recovery_threshold


def _fm(values, names=None):
    names = names or tuple(f"f{i}" for i in range(values.shape[1]))
    return FeatureMatrix(tuple(names), values, (), ())


def test_orthonormal_projection():
    q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(50, 6)))
    model = stridge(_fm(q), 2 * q[:, 3], STRidgeConfig(ridge=1e-6, threshold=0.5))
    expect = np.zeros(6)
    expect[3] = 2.0
    assert np.allclose(model.coefficients[:, 0], expect, atol=1e-12)
    assert model.k == 1


def test_orthogonal_target_gives_zero_model():
    q, _ = np.linalg.qr(np.random.default_rng(1).normal(size=(40, 5)))
    model = stridge(_fm(q[:, :4]), q[:, 4], STRidgeConfig(threshold=0.01))
    assert model.k == 0 and np.all(model.coefficients == 0)
    assert model.flags["x1"]["empty_support"]
    zero = stridge(_fm(q[:, :4]), np.zeros(40), STRidgeConfig())
    assert zero.flags["x1"]["empty_support"]


def test_rank_deficient_flagged():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(30, 2))
    theta = np.column_stack([a, a[:, 0]]) / np.sqrt(30)
    model = stridge(_fm(theta), a[:, 0] + a[:, 1], STRidgeConfig(ridge=0.0, threshold=1e-6))
    assert model.flags["x1"].get("rank_deficient")


def test_config_validation():
    for kw in ({"ridge": -1.0}, {"threshold": 0.0}, {"max_iters": 0}):
        with pytest.raises(ValueError):
            STRidgeConfig(**kw)


def test_threshold_above_all_coefficients():
    rng = np.random.default_rng(3)
    theta = normalize_columns(_fm(rng.normal(size=(60, 5))))
    y = rng.normal(size=60)
    assert stlsq(theta, y, threshold=10.0).k == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.01, 0.5))
def test_stlsq_is_stridge_without_ridge(seed, thr):
    rng = np.random.default_rng(seed)
    theta = normalize_columns(_fm(rng.normal(size=(40, 6))))
    y = rng.normal(size=(40, 2))
    a = stlsq(theta, y, thr)
    b = stridge(theta, y, STRidgeConfig(ridge=0.0, threshold=thr))
    assert np.array_equal(a.coefficients, b.coefficients)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_idempotent_on_own_support(seed):
    rng = np.random.default_rng(seed)
    raw = rng.normal(size=(80, 7))
    y = raw[:, [1, 4]] @ np.array([1.5, -0.7]) + 0.05 * rng.normal(size=80)
    cfg = STRidgeConfig(threshold=0.1)
    m1 = stridge(normalize_columns(_fm(raw)), y, cfg)
    keep = m1.active[:, 0]
    sub = normalize_columns(_fm(raw[:, keep], tuple(np.array(m1.feature_names)[keep])))
    m2 = stridge(sub, y, cfg)
    assert np.allclose(m2.coefficients[:, 0], m1.coefficients[keep, 0], rtol=1e-10, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(1e-3, 1e3))
def test_scale_equivariance(seed, c):
    rng = np.random.default_rng(seed)
    raw = rng.normal(size=(60, 5))
    y = raw @ np.array([0.0, 2.0, 0.0, -1.0, 0.3]) + 0.01 * rng.normal(size=60)
    cfg = STRidgeConfig(threshold=0.05)
    base = stridge(normalize_columns(_fm(raw)), y, cfg)
    scaled_raw = raw.copy()
    scaled_raw[:, 2] *= c
    scaled = stridge(normalize_columns(_fm(scaled_raw)), y, cfg)
    assert np.array_equal(base.active, scaled.active)
    assert np.allclose(scaled.coefficients[2] * c, base.coefficients[2], rtol=1e-8, atol=1e-12)
    assert np.allclose(scaled_raw @ scaled.coefficients, raw @ base.coefficients, rtol=1e-8, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_planted_support_matches_brute_force(seed):
    raw, y, support, xi = planted_instance(seed)
    model = stridge(normalize_columns(_fm(raw)), y, STRidgeConfig(threshold=recovery_threshold(raw, y, xi)))
    _, oracle_sub, _ = brute_force_support(raw, y, 2)
    assert tuple(np.flatnonzero(model.active[:, 0])) == oracle_sub == tuple(support)
    assert np.max(np.abs(model.coefficients[:, 0] - xi)) <= 1e-8


@pytest.fixture(scope="module")
def hes1_p100():
    params = Hes1Params(tau=20.0, p=100)
    ts = simulate_hes1(params, t_end=400.0, dt=0.02)
    prep = preprocess(ts, SmootherConfig(2.0, 3))
    chain = integrate_chain(params.kernel, lambda t: prep.interpolant(t, "P"), ts.times)
    spec = LibrarySpec(poly_degree=1, hill_features=(HillSpec("z", 100.0, 5),))
    theta = build_library(spec, prep.smoothed, {"z": chain})
    half = len(ts) // 2
    return normalize_columns(theta.rows(slice(0, half))), prep.derivative.values[:half]


def test_hes1_recovery(hes1_p100):
    theta, dx = hes1_p100
    cols = ("M", "P")
    model = stridge(theta, dx, STRidgeConfig(threshold=0.05))
    model = SparseModel(model.coefficients, model.feature_names, cols)
    assert set(model.support("M")) == {"M", "Hill(z)"}
    assert set(model.support("P")) == {"M", "P"}
    truth = {("M", "M"): -0.03, ("Hill(z)", "M"): 1.0, ("M", "P"): 2.0, ("P", "P"): -0.03}
    for (feat, comp), v in truth.items():
        assert model.coefficient(feat, comp) == pytest.approx(v, rel=0.02)


def test_threshold_sweep_support_nonincreasing(hes1_p100):
    theta, dx = hes1_p100
    ks = [stlsq(theta, dx, thr).k for thr in np.logspace(-4, 0, 25)]
    assert all(b <= a for a, b in zip(ks, ks[1:]))
    assert ks[0] > ks[-1]
