"""Sequentially thresholded ridge regression."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import FeatureMatrix


@dataclass(frozen=True)
class STRidgeConfig:
    """``ridge`` penalizes the normalized problem; ``threshold`` prunes its
    coefficients. Both act after the target column is scaled to unit norm, so
    they are unit-free."""

    ridge: float = 1e-6
    threshold: float = 0.05
    max_iters: int = 25

    def __post_init__(self):
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class SparseModel:
    """Coefficient matrix ``Xi`` (features x components) in original units."""

    coefficients: np.ndarray
    feature_names: tuple[str, ...]
    component_names: tuple[str, ...]
    flags: dict = field(default_factory=dict)

    @property
    def active(self) -> np.ndarray:
        return self.coefficients != 0

    @property
    def k(self) -> int:
        return int(self.active.sum())

    def support(self, component) -> tuple[str, ...]:
        j = component if isinstance(component, int) else self.component_names.index(component)
        return tuple(n for n, a in zip(self.feature_names, self.active[:, j]) if a)

    def coefficient(self, feature: str, component: str) -> float:
        return float(
            self.coefficients[self.feature_names.index(feature), self.component_names.index(component)]
        )

    def equations(self, precision: int = 6) -> dict[str, str]:
        out = {}
        for j, comp in enumerate(self.component_names):
            terms = [
                f"{c:+.{precision}g} {name}" if name != "1" else f"{c:+.{precision}g}"
                for name, c in zip(self.feature_names, self.coefficients[:, j])
                if c != 0
            ]
            out[comp] = " ".join(terms) if terms else "0"
        return out


def _solve(theta: np.ndarray, y: np.ndarray, ridge: float):
    """Ridge solve via the augmented least-squares system; returns (w, rank)."""
    if ridge > 0:
        p = theta.shape[1]
        a = np.vstack([theta, np.sqrt(ridge) * np.eye(p)])
        b = np.concatenate([y, np.zeros(p)])
    else:
        a, b = theta, y
    w, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    return w, rank


def stridge_vector(theta: np.ndarray, y: np.ndarray, ridge: float, threshold: float,
                   max_iters: int = 25) -> tuple[np.ndarray, dict]:
    """STRidge for one target on a normalized library.

    Returns coefficients of the normalized problem (target not rescaled) and
    diagnostic flags. The final fit on the converged support is an
    unpenalized least-squares solve.
    """
    p = theta.shape[1]
    flags = {}
    scale = np.linalg.norm(y)
    if scale == 0:
        flags["empty_support"] = True
        return np.zeros(p), flags
    yn = y / scale
    active = np.ones(p, dtype=bool)
    w, _ = _solve(theta, yn, ridge)
    for it in range(max_iters):
        new_active = active & (np.abs(w) >= threshold)
        if np.array_equal(new_active, active):
            break
        active = new_active
        w = np.zeros(p)
        if not active.any():
            break
        w[active], _ = _solve(theta[:, active], yn, ridge)
    else:
        flags["max_iters_reached"] = True
    w = np.zeros(p)
    if not active.any():
        flags["empty_support"] = True
        return w, flags
    w[active], rank = _solve(theta[:, active], yn, 0.0)
    if rank < active.sum():
        flags["rank_deficient"] = True
    flags["iterations"] = it + 1
    return w * scale, flags


def stridge(theta: FeatureMatrix, targets, cfg: STRidgeConfig) -> SparseModel:
    """Fit one sparse coefficient vector per target column.

    ``theta`` should come from :func:`~lctsindy.features.normalize_columns`;
    its ``column_scales`` convert the result back to original units.
    ``targets`` is a :class:`~lctsindy.signals.TimeSeries` of derivative
    estimates or a plain ``(N, d)`` array.
    """
    y = np.asarray(getattr(targets, "values", targets), dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    names = tuple(getattr(targets, "names", ())) or tuple(f"x{j + 1}" for j in range(y.shape[1]))
    if y.shape[0] != theta.values.shape[0]:
        raise ValueError("library and targets have different row counts")
    coefs = np.zeros((theta.values.shape[1], y.shape[1]))
    flags = {}
    for j in range(y.shape[1]):
        w, f = stridge_vector(theta.values, y[:, j], cfg.ridge, cfg.threshold, cfg.max_iters)
        coefs[:, j] = w / theta.column_scales
        if f:
            flags[names[j]] = f
    return SparseModel(coefs, theta.names, names, flags)


def stlsq(theta: FeatureMatrix, targets, threshold: float, max_iters: int = 25) -> SparseModel:
    """Sequential thresholded least squares: STRidge without the ridge term."""
    return stridge(theta, targets, STRidgeConfig(ridge=0.0, threshold=threshold, max_iters=max_iters))
