"""Command-line entry point.

Subcommands: ``simulate``, ``noise``, ``identify``, ``robustness``, ``run``
and ``repro``. Global options ``--seed``, ``--threads`` and ``--out-dir`` come
before the subcommand; ``LCT_SINDY_THREADS`` overrides ``--threads``.
"""

from __future__ import annotations

import logging
import os
import sys
import time
from pathlib import Path

import click
import numpy as np
import tomli

from . import __version__
from . import config as config_mod
from .config import ConfigError, MODELS, SIM_DEFAULTS
from .signals import NoiseSpec, ParseError, add_noise, read_csv, write_csv

THREADS_ENV = "LCT_SINDY_THREADS"


def _threads(ctx) -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise click.UsageError(f"{THREADS_ENV} must be an integer, got {env!r}")
        if n < 1:
            raise click.UsageError(f"{THREADS_ENV} must be >= 1")
        return n
    return ctx.obj["threads"]


def _load_config(path):
    try:
        if path is None:
            return None
        p = Path(path)
        if not p.exists() and not p.suffix:
            return config_mod.bundled(str(path))
        return config_mod.load(p)
    except ConfigError as exc:
        raise click.ClickException(f"config error: {exc}")


@click.group()
@click.version_option(__version__, prog_name="lct-sindy")
@click.option("--seed", type=int, default=None, help="Base seed; replaces the config seed.")
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True,
              help="Worker threads for candidate sweeps.")
@click.option("--out-dir", type=click.Path(file_okay=False), default="lct_out", show_default=True)
@click.option("-v", "--verbose", count=True)
@click.pass_context
def main(ctx, seed, threads, out_dir, verbose):
    """Identify distributed-delay models with the linear chain trick."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    ctx.ensure_object(dict)
    ctx.obj.update(seed=seed, threads=threads, out_dir=Path(out_dir))


@main.command()
@click.option("--model", type=click.Choice(sorted(MODELS)), required=True)
@click.option("--params", "params_file", type=click.Path(exists=True, dir_okay=False),
              help="Flat key = value file of model parameters.")
@click.option("--t-end", type=float, default=None)
@click.option("--dt", type=float, default=None)
@click.option("--history", type=float, multiple=True, help="Constant history; repeat per component.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def simulate(model, params_file, t_end, dt, history, out):
    """Generate a clean ground-truth series."""
    raw_params = {}
    if params_file:
        try:
            data = tomli.loads(Path(params_file).read_text())
        except tomli.TOMLDecodeError as exc:
            raise click.ClickException(f"{params_file}: {exc}")
        raw_params = data.get("params", data)
    sim = {}
    if t_end is not None:
        sim["t_end"] = t_end
    if dt is not None:
        sim["dt"] = dt
    if history:
        sim["history"] = list(history) if model == "hes1" else history[0]
    try:
        cfg = config_mod.from_mapping({"model": model, "params": raw_params, "sim": sim}, "simulate",
                                         require_grid=False)
    except ConfigError as exc:
        raise click.ClickException(f"config error: {exc}")
    from .experiments import generate

    try:
        truth = generate(cfg)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    write_csv(truth.series, out)
    click.echo(f"wrote {len(truth.series)} samples of {', '.join(truth.series.names)} to {out}")


@main.command()
@click.option("--data", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--level", type=click.FloatRange(min=0), required=True)
@click.option("--seed", "local_seed", type=int, default=None, help="Overrides the global seed.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def noise(ctx, data, level, local_seed, out):
    """Add Gaussian noise scaled by each component's standard deviation."""
    seed = local_seed if local_seed is not None else (ctx.obj["seed"] or 0)
    try:
        ts = read_csv(data)
    except ParseError as exc:
        raise click.ClickException(str(exc))
    write_csv(add_noise(ts, NoiseSpec(level, seed)), out)
    click.echo(f"wrote noisy copy (level {level:g}, seed {seed}) to {out}")


def _overrides(**kw) -> dict:
    keys = {
        "sg_window": "smoother.window_span",
        "sg_degree": "smoother.poly_degree",
        "ridge": "stridge.ridge",
        "threshold": "stridge.threshold",
        "max_iters": "stridge.max_iters",
        "burn_in": "identify.burn_in",
        "alpha": "identify.alpha",
        "method": "identify.method",
        "criterion": "identify.criterion",
    }
    return {keys[k]: v for k, v in kw.items() if v is not None}


def _apply_overrides(cfg, overrides: dict, seed):
    flat = config_mod.flatten(cfg.raw)
    if overrides.get("identify.method") == "discrete":
        flat.pop("grid.ps", None)
    flat.update(overrides)
    if seed is not None:
        flat["seed"] = int(seed)
        flat.pop("noise.seed", None)
    try:
        return config_mod.from_mapping(config_mod.unflatten(flat), cfg.name)
    except ConfigError as exc:
        raise click.ClickException(f"config error: {exc}")


def _tuning_options(f):
    opts = [
        click.option("--sg-window", type=float, default=None, help="Smoother window span in time units."),
        click.option("--sg-degree", type=int, default=None, help="Smoother polynomial degree."),
        click.option("--ridge", type=float, default=None),
        click.option("--threshold", type=float, default=None),
        click.option("--max-iters", type=int, default=None),
        click.option("--burn-in", type=float, default=None, help="Skip burn_in * tau at the start of training."),
        click.option("--alpha", type=float, default=None, help="Chain-length penalty in the BIC."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


@main.command("identify")
@click.option("--data", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Series to identify; simulated from the config when omitted.")
@click.option("--config", "config_path", required=True, help="Config file or bundled config name.")
@click.option("--method", type=click.Choice(["lct", "discrete"]), default=None)
@click.option("--criterion", type=click.Choice(["bic", "deriv"]), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Report path (JSON); defaults to <out-dir>/<config>_report.json.")
@click.option("--figures/--no-figures", default=True)
@_tuning_options
@click.pass_context
def identify_cmd(ctx, data, config_path, method, criterion, out, figures, **tuning):
    """Sweep the candidate delays of a config and report the winner."""
    from . import report
    from .experiments import generate, identify_series
    from .preprocess import preprocess

    cfg = _load_config(config_path)
    if cfg.experiment != "identify":
        raise click.ClickException(f"{cfg.name} is a {cfg.experiment} config")
    cfg = _apply_overrides(cfg, _overrides(method=method, criterion=criterion, **tuning), ctx.obj["seed"])
    if data is not None:
        try:
            series = read_csv(data)
        except ParseError as exc:
            raise click.ClickException(str(exc))
        header = {"config": cfg.name, "data": str(data)}
    else:
        tag, spec = cfg.runs()[0]
        series = add_noise(generate(cfg).series, spec)
        header = {"config": cfg.name, "noise": {"level": spec.level, "seed": spec.seed}}
    out = Path(out) if out else ctx.obj["out_dir"] / f"{cfg.name}_report.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        result = identify_series(series, cfg, _threads(ctx))
    except (ValueError, RuntimeError) as exc:
        raise click.ClickException(str(exc))
    elapsed = time.perf_counter() - t0
    report.write_json(report.result_report(result, header), out)
    stem = out.with_suffix("")
    report.write_rows(report.leaderboard_rows(result), report.leaderboard_columns(result),
                      Path(f"{stem}_leaderboard.csv"))
    smoothed = preprocess(series, cfg.identify.smoother).smoothed
    ident = np.full_like(series.values, np.nan)
    if result.simulation is not None:
        ident[: len(result.simulation)] = result.simulation.values
    names = series.names
    cols = ["t"] + [f"{k}_{c}" for k in ("data", "smoothed", "identified") for c in names]
    report.write_table(cols, np.column_stack([series.times, series.values, smoothed.values, ident]),
                       Path(f"{stem}_trajectory.csv"))
    if figures:
        report.plot_fit(result, series, smoothed, ident, Path(f"{stem}_fit.svg"))
        if len(cfg.grid.taus) > 1:
            report.plot_landscape(result, Path(f"{stem}_landscape.svg"))
    c = result.candidate
    click.echo(f"winner tau* = {c.tau:g}" + (f", p* = {c.p}" if c.p is not None else "")
               + (f", Hill {result.hill_star}" if result.hill_star else "")
               + f" ({len(result.leaderboard)} candidates, {elapsed:.1f} s)")
    for comp, eq in result.model.equations().items():
        click.echo(f"  d{comp}/dt = {eq}")
    click.echo(f"report: {out}")


@main.command()
@click.option("--config", "config_path", default="fig4", show_default=True,
              help="Robustness config file or bundled name.")
@click.option("--dts", type=str, default=None, help="Comma-separated sampling steps.")
@click.option("--etas", type=str, default=None, help="Comma-separated noise levels.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--figures/--no-figures", default=True)
@click.option("--sg-window", type=float, default=None)
@click.pass_context
def robustness(ctx, config_path, dts, etas, out, figures, sg_window):
    """Error of the rebuilt delayed state versus derivative errors (CSV)."""
    from . import report
    from .experiments import run_robustness
    from .selection import ROBUSTNESS_COLUMNS

    cfg = _load_config(config_path)
    if cfg.experiment != "robustness":
        raise click.ClickException(f"{cfg.name} is not a robustness config")
    over = _overrides(sg_window=sg_window)

    def parse(text, key):
        try:
            return [float(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise click.BadParameter(f"expected comma-separated numbers, got {text!r}", param_hint=key)

    if dts:
        over["robustness.dts"] = parse(dts, "--dts")
    if etas:
        over["robustness.etas"] = parse(etas, "--etas")
    cfg = _apply_overrides(cfg, over, ctx.obj["seed"])
    rows = run_robustness(cfg)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report.write_rows(rows, ROBUSTNESS_COLUMNS + ("z_dominates",), out)
    if figures:
        report.plot_robustness(rows, out.parent)
    n_ok = sum(r["z_dominates"] for r in rows)
    click.echo(f"wrote {len(rows)} rows to {out}; z_p error below both derivative errors in {n_ok}/{len(rows)}")


@main.command()
@click.option("--config", "config_path", required=True, help="Config file or bundled config name.")
@click.option("--figures/--no-figures", default=True)
@click.pass_context
def run(ctx, config_path, figures):
    """Run a full experiment config and write every output under --out-dir."""
    from .experiments import run_experiment

    cfg = _load_config(config_path)
    cfg = _apply_overrides(cfg, {}, ctx.obj["seed"])
    t0 = time.perf_counter()
    outcome = run_experiment(cfg, ctx.obj["out_dir"], threads=_threads(ctx), figures=figures)
    click.echo(f"{cfg.name}: {len(outcome.files)} files in {ctx.obj['out_dir'] / cfg.name} "
               f"({time.perf_counter() - t0:.1f} s)")
    for r in outcome.runs:
        c = r.result.candidate
        click.echo(f"  {r.tag}: tau* = {c.tau:g}" + (f", p* = {c.p}" if c.p is not None else ""))


@main.command()
@click.argument("name")
@click.option("--figures/--no-figures", default=True)
@click.pass_context
def repro(ctx, name, figures):
    """Reproduce one table or figure dataset and check it against tolerances.

    NAME is one of table2, table3, table4, table6, fig4, fig5, figS1, figS2.
    """
    from .repro import TARGETS
    from .repro import repro as run_target

    if name not in TARGETS:
        raise click.UsageError(f"unknown target {name!r}; available: {', '.join(TARGETS)}")
    out_dir = ctx.obj["out_dir"] / name
    t0 = time.perf_counter()
    checks = run_target(name, out_dir, seed=ctx.obj["seed"], threads=_threads(ctx), figures=figures)
    for c in checks:
        click.echo(c.line())
    n_ok = sum(c.passed for c in checks)
    click.echo(f"{name}: {n_ok}/{len(checks)} checks passed in {time.perf_counter() - t0:.1f} s; outputs in {out_dir}")
    sys.exit(0 if n_ok == len(checks) else 1)


if __name__ == "__main__":
    main()
