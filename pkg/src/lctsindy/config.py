"""Experiment configuration files.

Configs are flat text with dotted keys, one assignment per line::

    model = "hes1"
    params.tau = 20
    smoother.window_span = 30
    grid.ps = [1, 2, 3]

The syntax is the dotted-key subset of TOML, so files are read with
``tomli``. :func:`dumps` writes the same flat form back, with keys sorted, so a
resolved config can be stored next to the outputs it produced.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import tomli

from .features import HillSpec, LibrarySpec
from .preprocess import SmootherConfig
from .regression import STRidgeConfig
from .selection import CandidateGrid, IdentifyConfig
from .signals import NoiseSpec, SplitSpec
from .simulate import Hes1Params, IkedaParams, LogisticParams

MODELS = {"hes1": Hes1Params, "logistic": LogisticParams, "ikeda": IkedaParams}
EXPERIMENTS = ("identify", "robustness")
METHODS = ("lct", "discrete")

#: default ``sim.*`` values per model
SIM_DEFAULTS = {
    "hes1": {"t_end": 500.0, "dt": 0.02, "history": [3.0, 100.0], "max_step": 0.02},
    "logistic": {"t_end": 100.0, "dt": 0.1, "history": None, "max_step": 0.02},
    "ikeda": {"t_end": 70.0, "dt": 0.05, "history": 1.0, "substeps": 1},
}


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key path."""


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    model: str
    params: Any
    sim: dict
    experiment: str = "identify"
    seed: int = 0
    noise: NoiseSpec = NoiseSpec()
    noise_levels: tuple[float, ...] = ()
    replicates: int = 1
    grid: CandidateGrid | None = None
    method: str = "lct"
    identify: IdentifyConfig = IdentifyConfig()
    robustness: dict = field(default_factory=dict)
    figures: bool = True
    raw: dict = field(default_factory=dict)

    def runs(self) -> list[tuple[str, NoiseSpec]]:
        """Named (noise level, seed) combinations covered by this config."""
        levels = self.noise_levels or (self.noise.level,)
        out = []
        for level in levels:
            for r in range(self.replicates):
                spec = NoiseSpec(level, self.noise.seed + r)
                if len(levels) == 1 and self.replicates == 1:
                    tag = "run"
                else:
                    tag = f"eta{level:g}_seed{spec.seed}"
                out.append((tag, spec))
        return out

    def with_overrides(self, overrides: Mapping[str, Any]) -> "ExperimentConfig":
        """Rebuild with dotted-key overrides applied to the raw mapping."""
        flat = flatten(self.raw)
        flat.update({k: v for k, v in overrides.items() if v is not None})
        return from_mapping(unflatten(flat), self.name)


# --------------------------------------------------------------------------
# flat <-> nested


def flatten(data: Mapping, prefix: str = "") -> dict:
    out = {}
    for key, value in data.items():
        path = f"{prefix}{key}"
        if isinstance(value, Mapping):
            out.update(flatten(value, path + "."))
        else:
            out[path] = value
    return out


def unflatten(flat: Mapping) -> dict:
    out: dict = {}
    for path, value in flat.items():
        node = out
        parts = path.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                _fail(path, "key is both a value and a section")
        node[parts[-1]] = value
    return out


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            raise ValueError("non-finite numbers cannot be written to a config")
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format_value(v) for v in value) + "]"
    raise TypeError(f"cannot write {type(value).__name__} to a config")


def dumps(data: Mapping) -> str:
    """Flat ``key = value`` text for a nested mapping, keys sorted."""
    flat = flatten(data)
    return "".join(f"{k} = {_format_value(v)}\n" for k, v in sorted(flat.items()) if v is not None)


def loads(text: str, name: str = "config") -> ExperimentConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{name}: {exc}") from None
    return from_mapping(data, name)


def load(path) -> ExperimentConfig:
    path = Path(path)
    return loads(path.read_text(), path.stem)


# --------------------------------------------------------------------------
# validation


def _section(data: Mapping, key: str) -> dict:
    value = data.get(key, {})
    if not isinstance(value, Mapping):
        _fail(key, "expected a section of dotted keys")
    return dict(value)


def _take(section: dict, path: str, cls, transform=None):
    """Build ``cls`` from a section, prefixing constructor errors with ``path``."""
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(section) - known)
    if unknown:
        _fail(f"{path}.{unknown[0]}", f"unknown key (allowed: {', '.join(sorted(known))})")
    kwargs = transform(section) if transform else section
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        _fail(path, str(exc))


def _float_list(values, path: str) -> tuple[float, ...]:
    if not isinstance(values, list) or not values:
        _fail(path, "expected a non-empty list")
    try:
        return tuple(float(v) for v in values)
    except (TypeError, ValueError):
        _fail(path, "expected numbers")


def _tau_values(g: dict) -> tuple[float, ...]:
    if "taus" in g:
        return _float_list(g.pop("taus"), "grid.taus")
    keys = ("tau_start", "tau_stop", "tau_step")
    if not all(k in g for k in keys):
        _fail("grid.taus", "give either grid.taus or grid.tau_start/tau_stop/tau_step")
    start, stop, step = (float(g.pop(k)) for k in keys)
    if not step > 0 or stop < start:
        _fail("grid.tau_step", "need tau_step > 0 and tau_stop >= tau_start")
    n = int(round((stop - start) / step))
    # rounding keeps grid values like 1.59 exact in reports
    return tuple(round(start + i * step, 10) for i in range(n + 1))


def _library(section: dict) -> LibrarySpec:
    lib = dict(section)
    hills = ()
    if "hill_target" in lib or "hill_P0" in lib or "hill_n" in lib:
        try:
            hills = (HillSpec(str(lib.pop("hill_target", "z")), float(lib.pop("hill_P0", 100.0)),
                              float(lib.pop("hill_n", 5.0))),)
        except ValueError as exc:
            _fail("library.hill_P0", str(exc))
    for key in ("sin_features", "linear_features"):
        if key in lib:
            if not isinstance(lib[key], list):
                _fail(f"library.{key}", "expected a list of signal names")
            lib[key] = tuple(str(s) for s in lib[key])
    known = {"poly_degree", "include_constant", "sin_features", "linear_features", "delayed_in_poly"}
    unknown = sorted(set(lib) - known)
    if unknown:
        _fail(f"library.{unknown[0]}", "unknown key")
    try:
        return LibrarySpec(hill_features=hills, **lib)
    except (TypeError, ValueError) as exc:
        _fail("library", str(exc))


def from_mapping(data: Mapping, name: str = "config", require_grid: bool = True) -> ExperimentConfig:
    """Validate a nested mapping. ``require_grid=False`` accepts configs that
    only describe a simulation."""
    data = dict(data)
    raw = json.loads(json.dumps(data))
    top_known = {
        "model", "experiment", "seed", "threads", "params", "sim", "noise", "split", "smoother",
        "library", "stridge", "grid", "identify", "robustness", "output",
    }
    unknown = sorted(set(data) - top_known)
    if unknown:
        _fail(unknown[0], "unknown key")

    model = data.get("model")
    if model not in MODELS:
        _fail("model", f"expected one of {', '.join(MODELS)}, got {model!r}")
    experiment = data.get("experiment", "identify")
    if experiment not in EXPERIMENTS:
        _fail("experiment", f"expected one of {', '.join(EXPERIMENTS)}")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        _fail("seed", "expected a non-negative integer")

    params = _take(_section(data, "params"), "params", MODELS[model])

    sim = dict(SIM_DEFAULTS[model])
    sim_in = _section(data, "sim")
    for key in sim_in:
        if key not in sim:
            _fail(f"sim.{key}", f"unknown key (allowed: {', '.join(sim)})")
    sim.update(sim_in)
    for key in ("t_end", "dt"):
        if not isinstance(sim[key], (int, float)) or not sim[key] > 0:
            _fail(f"sim.{key}", "must be a positive number")

    noise_sec = _section(data, "noise")
    levels = noise_sec.pop("levels", None)
    replicates = noise_sec.pop("replicates", 1)
    noise_sec.setdefault("seed", seed)
    noise = _take(noise_sec, "noise", NoiseSpec)
    noise_levels = ()
    if levels is not None:
        noise_levels = _float_list(levels, "noise.levels")
        if any(v < 0 for v in noise_levels):
            _fail("noise.levels", "levels must be >= 0")
    if not isinstance(replicates, int) or replicates < 1:
        _fail("noise.replicates", "expected an integer >= 1")

    split = _take(_section(data, "split"), "split", SplitSpec)
    smoother = _take(_section(data, "smoother"), "smoother", SmootherConfig)
    library = _library(_section(data, "library"))
    stridge_cfg = _take(_section(data, "stridge"), "stridge", STRidgeConfig)

    ident = _section(data, "identify")
    method = ident.pop("method", "lct")
    if method not in METHODS:
        _fail("identify.method", f"expected one of {', '.join(METHODS)}")
    threads = data.get("threads", 1)
    if not isinstance(threads, int) or threads < 1:
        _fail("threads", "expected an integer >= 1")
    id_cfg = _take(
        ident, "identify", IdentifyConfig,
        lambda s: dict(s, library=library, stridge=stridge_cfg, smoother=smoother, split=split,
                       threads=threads),
    )

    grid = None
    if experiment == "identify" and (require_grid or "grid" in data):
        g = _section(data, "grid")
        taus = _tau_values(g)
        ps = tuple(int(p) for p in g.pop("ps", [])) or (None,)
        P0s = _float_list(g.pop("hill_P0s"), "grid.hill_P0s") if "hill_P0s" in g else (None,)
        ns = _float_list(g.pop("hill_ns"), "grid.hill_ns") if "hill_ns" in g else (None,)
        if g:
            _fail(f"grid.{sorted(g)[0]}", "unknown key")
        if method == "lct" and ps == (None,):
            _fail("grid.ps", "the chain method needs chain orders")
        if method == "discrete" and ps != (None,):
            _fail("grid.ps", "the discrete baseline takes no chain orders")
        if (P0s != (None,) or ns != (None,)) and not library.hill_features:
            _fail("grid.hill_P0s", "Hill search needs a Hill feature in the library")
        try:
            grid = CandidateGrid(taus, ps, P0s, ns)
        except ValueError as exc:
            _fail("grid", str(exc))

    rob = _section(data, "robustness")
    if experiment == "robustness":
        rob = {
            "dts": _float_list(rob.get("dts"), "robustness.dts"),
            "etas": _float_list(rob.get("etas"), "robustness.etas"),
        }
        if model != "hes1":
            _fail("model", "the robustness study runs on hes1 data")

    out = _section(data, "output")
    figures = out.pop("figures", True)
    if out:
        _fail(f"output.{sorted(out)[0]}", "unknown key")

    return ExperimentConfig(
        name=name, model=model, params=params, sim=sim, experiment=experiment, seed=seed,
        noise=noise, noise_levels=noise_levels, replicates=replicates, grid=grid, method=method,
        identify=id_cfg, robustness=rob, figures=bool(figures), raw=raw,
    )


def bundled_dir() -> Path:
    return Path(__file__).resolve().parent / "configs"


def bundled(name: str) -> ExperimentConfig:
    path = bundled_dir() / f"{name}.cfg"
    if not path.exists():
        raise ConfigError(f"no bundled config named {name!r}")
    return load(path)


def with_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    """Replace the base seed; an explicit ``noise.seed`` follows it."""
    raw = dict(cfg.raw)
    raw["seed"] = int(seed)
    noise = dict(raw.get("noise", {}))
    noise.pop("seed", None)
    raw["noise"] = noise
    return from_mapping(raw, cfg.name)
