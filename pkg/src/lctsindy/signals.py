"""Time-series container, noise injection, train/validation split and CSV I/O."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class ParseError(ValueError):
    """Raised when a CSV file does not describe a valid time series."""


@dataclass(frozen=True)
class TimeSeries:
    """Sampled multivariate trajectory.

    ``values[i]`` is the state at ``times[i]``. Arrays are copied and frozen
    on construction so a series can be shared freely between workers.
    """

    times: np.ndarray
    values: np.ndarray
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ValueError(f"values must be 1-D or 2-D, got shape {values.shape}")
        if times.size < 2:
            raise ValueError("a time series needs at least 2 samples")
        if values.shape[0] != times.size:
            raise ValueError(
                f"values has {values.shape[0]} rows but there are {times.size} times"
            )
        if values.shape[1] < 1:
            raise ValueError("a time series needs at least one component")
        if not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise ValueError("times and values must be finite")
        names = tuple(self.names) if self.names else tuple(
            f"x{j + 1}" for j in range(values.shape[1])
        )
        if len(names) != values.shape[1]:
            raise ValueError(
                f"{len(names)} component names given for {values.shape[1]} components"
            )
        if len(set(names)) != len(names):
            raise ValueError(f"component names must be unique, got {names}")
        times.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)

    def __len__(self):
        return self.times.size

    @property
    def n_components(self) -> int:
        return self.values.shape[1]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no component {name!r}; have {self.names}") from None

    def component(self, name: str) -> np.ndarray:
        return self.values[:, self.index(name)]

    def with_values(self, values: np.ndarray) -> "TimeSeries":
        return TimeSeries(self.times, values, self.names)

    def select(self, rows) -> "TimeSeries":
        return TimeSeries(self.times[rows], self.values[rows], self.names)

    def is_uniform(self, rtol: float = 1e-9) -> bool:
        steps = np.diff(self.times)
        return bool(np.all(np.abs(steps - steps.mean()) <= rtol * steps.mean()))

    @property
    def dt(self) -> float:
        """Mean sampling step."""
        return float((self.times[-1] - self.times[0]) / (self.times.size - 1))

    def equals(self, other: "TimeSeries") -> bool:
        return (
            self.names == other.names
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian noise of ``level`` times each component's std."""

    level: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.level >= 0:
            raise ValueError(f"noise level must be >= 0, got {self.level}")


@dataclass(frozen=True)
class SplitSpec:
    fraction: float = 0.5

    def __post_init__(self):
        if not 0 < self.fraction < 1:
            raise ValueError(f"split fraction must lie in (0, 1), got {self.fraction}")


def add_noise(ts: TimeSeries, spec: NoiseSpec) -> TimeSeries:
    """Return ``ts`` plus i.i.d. noise ``N(0, (level * std_j)^2)`` per component.

    The standard deviation is the sample std (ddof=1) of each clean component,
    so constant components receive no noise. Draws come from numpy's PCG64
    generator seeded with ``spec.seed``.
    """
    if spec.level == 0:
        return ts
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    sigma = ts.values.std(axis=0, ddof=1)
    eps = rng.standard_normal(ts.values.shape) * (spec.level * sigma)
    return ts.with_values(ts.values + eps)


def split_index(times: np.ndarray, fraction: float) -> int:
    """Index of the last training sample (nearest to the split time, ties go earlier)."""
    target = times[0] + fraction * (times[-1] - times[0])
    return int(np.argmin(np.abs(times - target)))


def split(ts: TimeSeries, spec: SplitSpec) -> tuple[TimeSeries, TimeSeries]:
    """Split into contiguous training and validation segments.

    The sample nearest to ``t_1 + fraction * (t_N - t_1)`` closes the training
    segment.
    """
    b = split_index(ts.times, spec.fraction)
    if b + 1 < 2 or len(ts) - b - 1 < 2:
        raise ValueError(
            f"split too extreme: fraction {spec.fraction} leaves "
            f"{b + 1} training and {len(ts) - b - 1} validation samples"
        )
    return ts.select(slice(0, b + 1)), ts.select(slice(b + 1, None))


def write_csv(ts: TimeSeries, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("t",) + ts.names)
        for t, row in zip(ts.times, ts.values):
            writer.writerow([f"{t:.16e}"] + [f"{v:.16e}" for v in row])
    return path


def read_csv(path) -> TimeSeries:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0] != "t":
        raise ParseError(f"{path}:1: header must be 't,<name1>,...', got {rows[0]}")
    width = len(header)
    times, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != width:
            raise ParseError(
                f"{path}:{lineno}: expected {width} columns, found {len(row)}"
            )
        try:
            nums = [float(cell) for cell in row]
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: non-numeric cell ({exc})") from None
        if not all(np.isfinite(nums)):
            raise ParseError(f"{path}:{lineno}: non-finite value")
        if times and nums[0] <= times[-1]:
            raise ParseError(f"{path}:{lineno}: times must be strictly increasing")
        times.append(nums[0])
        values.append(nums[1:])
    if len(times) < 2:
        raise ParseError(f"{path}: need at least 2 samples, found {len(times)}")
    return TimeSeries(np.array(times), np.array(values), tuple(header[1:]))


def stack(series: Sequence[TimeSeries]) -> TimeSeries:
    """Concatenate consecutive segments back into one series."""
    return TimeSeries(
        np.concatenate([s.times for s in series]),
        np.concatenate([s.values for s in series]),
        series[0].names,
    )
