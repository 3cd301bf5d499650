"""Candidate-term libraries and their numeric evaluation.

A library is built over *base signals*: the observed components followed by
any delayed channels (chain outputs or lagged copies of a component). Every
column is one :class:`Feature`; the same description drives numeric
evaluation on data and the compiled right-hand side used when an identified
model is simulated.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from itertools import combinations_with_replacement
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

POLY, HILL, SIN = 0, 1, 2


@dataclass(frozen=True)
class HillSpec:
    """Repression term ``1 / (1 + (target / P0)^n)``."""

    target: str
    P0: float
    n: float

    def __post_init__(self):
        if not self.P0 > 0:
            raise ValueError(f"Hill threshold P0 must be positive, got {self.P0}")
        if not self.n > 0:
            raise ValueError(f"Hill exponent must be positive, got {self.n}")


@dataclass(frozen=True)
class LagSpec:
    """Base signal ``component(t - tau)`` exposed under ``name``."""

    component: str
    tau: float
    name: str = "z"


@dataclass(frozen=True)
class LibrarySpec:
    """Which candidate terms enter the regression.

    Monomials of total degree ``<= poly_degree`` are formed over the observed
    components, and over the delayed channels too when ``delayed_in_poly`` is
    set. Delayed channels otherwise enter only through ``linear_features``,
    ``hill_features`` and ``sin_features``.
    """

    poly_degree: int = 1
    include_constant: bool = True
    hill_features: tuple[HillSpec, ...] = ()
    sin_features: tuple[str, ...] = ()
    linear_features: tuple[str, ...] = ()
    lag_features: tuple[LagSpec, ...] = ()
    delayed_in_poly: bool = False

    def __post_init__(self):
        if self.poly_degree < 0:
            raise ValueError("poly_degree must be >= 0")
        object.__setattr__(self, "hill_features", tuple(self.hill_features))
        object.__setattr__(self, "sin_features", tuple(self.sin_features))
        object.__setattr__(self, "linear_features", tuple(self.linear_features))
        object.__setattr__(self, "lag_features", tuple(self.lag_features))
        specials = (
            [("hill", h.target, h.P0, h.n) for h in self.hill_features]
            + [("sin", s) for s in self.sin_features]
            + [("lin", s) for s in self.linear_features]
        )
        if len(set(specials)) != len(specials):
            raise ValueError("duplicate feature definitions in library")

    def with_hill(self, P0=None, n=None) -> "LibrarySpec":
        """Copy with every Hill term's threshold and/or exponent replaced."""
        hills = tuple(
            HillSpec(h.target, h.P0 if P0 is None else P0, h.n if n is None else n)
            for h in self.hill_features
        )
        return replace(self, hill_features=hills)


@dataclass(frozen=True)
class Feature:
    name: str
    kind: int
    powers: tuple[int, ...] = ()
    target: int = -1
    P0: float = 1.0
    n: float = 1.0

    def evaluate(self, signals: np.ndarray) -> np.ndarray:
        """Evaluate on an ``(N, n_base)`` array of base signals."""
        if self.kind == POLY:
            col = np.ones(signals.shape[0])
            for j, k in enumerate(self.powers):
                if k:
                    col = col * signals[:, j] ** k
            return col
        x = signals[:, self.target]
        if self.kind == HILL:
            return 1.0 / (1.0 + (x / self.P0) ** self.n)
        return np.sin(x)


@dataclass(frozen=True)
class FeatureMatrix:
    """Numeric library ``Theta`` with column labels.

    ``column_scales`` holds the 2-norms divided out by
    :func:`normalize_columns` (ones for a raw matrix), so coefficients fitted
    on the normalized matrix convert back as ``xi / scale``.
    """

    names: tuple[str, ...]
    values: np.ndarray
    features: tuple[Feature, ...]
    base_names: tuple[str, ...]
    column_scales: np.ndarray = None
    dropped: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.column_scales is None:
            object.__setattr__(self, "column_scales", np.ones(len(self.names)))

    @property
    def shape(self):
        return self.values.shape

    def rows(self, index) -> "FeatureMatrix":
        return replace(self, values=self.values[index])


def _monomial_name(powers: Sequence[int], base_names: Sequence[str]) -> str:
    parts = []
    for name, k in zip(base_names, powers):
        if k == 1:
            parts.append(name)
        elif k > 1:
            parts.append(f"{name}^{k}")
    return "*".join(parts) if parts else "1"


def library_features(spec: LibrarySpec, observed: Sequence[str], delayed: Sequence[str]) -> list[Feature]:
    """Column descriptions in the order constant, monomials by degree, Hill, sin."""
    base = list(observed) + list(delayed)
    nb = len(base)
    index = {name: i for i, name in enumerate(base)}

    def locate(name):
        if name not in index:
            raise KeyError(f"feature target {name!r} is not a base signal ({base})")
        return index[name]

    poly_vars = list(range(nb)) if spec.delayed_in_poly else list(range(len(observed)))
    feats: list[Feature] = []
    if spec.include_constant:
        feats.append(Feature("1", POLY, (0,) * nb))
    for deg in range(1, spec.poly_degree + 1):
        for combo in combinations_with_replacement(poly_vars, deg):
            powers = [0] * nb
            for j in combo:
                powers[j] += 1
            feats.append(Feature(_monomial_name(powers, base), POLY, tuple(powers)))
    for name in spec.linear_features:
        powers = [0] * nb
        powers[locate(name)] = 1
        feats.append(Feature(name, POLY, tuple(powers)))
    for h in spec.hill_features:
        feats.append(Feature(f"Hill({h.target})", HILL, target=locate(h.target), P0=h.P0, n=h.n))
    for name in spec.sin_features:
        feats.append(Feature(f"sin({name})", SIN, target=locate(name)))

    names = [f.name for f in feats]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise ValueError(f"duplicate feature definitions: {dupes}")
    return feats


def build_library(spec: LibrarySpec, ts, chains: dict | None = None, lag_interp=None) -> FeatureMatrix:
    """Evaluate the library on a series.

    ``chains`` maps a delayed-channel name to its terminal chain state on the
    grid of ``ts`` (a :class:`~lctsindy.lct.ChainTrajectory` or an array).
    Lag features are read from ``lag_interp`` at ``t - tau``; the interpolant
    clamps queries before the record to the first sample.
    """
    chains = dict(chains or {})
    delayed_names, delayed_cols = [], []
    for name, chain in chains.items():
        col = chain.last_state() if hasattr(chain, "last_state") else np.asarray(chain)
        if col.shape[0] != len(ts):
            raise ValueError(f"chain {name!r} does not share the series grid")
        delayed_names.append(name)
        delayed_cols.append(col)
    for lag in spec.lag_features:
        if lag_interp is None:
            raise ValueError("lag features need an interpolant")
        delayed_names.append(lag.name)
        delayed_cols.append(lag_interp(ts.times - lag.tau, lag.component))
    signals = np.column_stack([ts.values] + delayed_cols) if delayed_cols else ts.values
    feats = library_features(spec, ts.names, delayed_names)
    values = np.column_stack([f.evaluate(signals) for f in feats])
    return FeatureMatrix(
        tuple(f.name for f in feats), values, tuple(feats), tuple(ts.names) + tuple(delayed_names)
    )


def normalize_columns(fm: FeatureMatrix) -> FeatureMatrix:
    """Scale every column to unit 2-norm; zero columns are dropped."""
    norms = np.linalg.norm(fm.values, axis=0)
    keep = norms > 0
    dropped = tuple(n for n, k in zip(fm.names, keep) if not k)
    if dropped:
        logger.warning("dropping all-zero library columns: %s", ", ".join(dropped))
    return FeatureMatrix(
        names=tuple(n for n, k in zip(fm.names, keep) if k),
        values=fm.values[:, keep] / norms[keep],
        features=tuple(f for f, k in zip(fm.features, keep) if k),
        base_names=fm.base_names,
        column_scales=fm.column_scales[keep] * norms[keep],
        dropped=fm.dropped + dropped,
    )


def compile_features(features: Sequence[Feature], n_base: int):
    """Pack feature descriptions into arrays for the compiled simulators."""
    kinds = np.array([f.kind for f in features], dtype=np.int64)
    powers = np.zeros((len(features), n_base), dtype=np.int64)
    targets = np.full(len(features), -1, dtype=np.int64)
    p0s = np.ones(len(features))
    ns = np.ones(len(features))
    for i, f in enumerate(features):
        if f.kind == POLY:
            powers[i] = f.powers
        else:
            targets[i] = f.target
            p0s[i], ns[i] = f.P0, f.n
    return kinds, powers, targets, p0s, ns
