"""Report files: structured JSON, delimited tables, plot-ready CSVs and figures.

Everything except the figures is a pure function of the config and package
version, so repeated runs produce byte-identical text outputs.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, dumps
from .preprocess import preprocess
from .signals import write_csv


def _clean(obj):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def write_config(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(f"# resolved config {cfg.name}, lctsindy {__version__}\n" + dumps(cfg.raw))
    return path


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_rows(rows, columns, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])
    return path


# --------------------------------------------------------------------------
# identification reports


def model_dict(model) -> dict:
    return {
        "features": list(model.feature_names),
        "components": list(model.component_names),
        "coefficients": model.coefficients.tolist(),
        "equations": model.equations(),
        "support": {c: list(model.support(c)) for c in model.component_names},
        "flags": model.flags,
    }


def leaderboard_rows(result) -> list[dict]:
    rows = []
    comps = result.model.component_names
    for rank, e in enumerate(result.leaderboard, 1):
        s = e.score
        row = {"rank": rank, "index": e.candidate.index, **e.candidate.as_dict(),
               "bic": s.bic, "mse": s.mse, "rss": s.rss, "deriv_error": s.deriv_error,
               "k": s.k, "blew_up": s.blew_up}
        for c, r in zip(comps, s.rel_error):
            row[f"rel_error_{c}"] = r
        rows.append(row)
    return rows


def leaderboard_columns(result) -> tuple[str, ...]:
    return ("rank", "index", "tau", "p", "hill_P0", "hill_n", "bic", "mse", "rss", "deriv_error",
            "k", "blew_up") + tuple(f"rel_error_{c}" for c in result.model.component_names)


def result_report(result, header: dict) -> dict:
    """Winner, coefficient matrix, scores and full leaderboard of one sweep."""
    return {
        "version": __version__,
        **header,
        "method": result.method,
        "criterion": result.criterion,
        "split_time": result.split_time,
        "winner": result.candidate.as_dict(),
        "model": model_dict(result.model),
        "score": result.score.as_dict(),
        "leaderboard": [
            {**row, "support": {c: list(e.model.support(c)) for c in e.model.component_names}}
            for row, e in zip(leaderboard_rows(result), result.leaderboard)
        ],
    }


def run_report(cfg: ExperimentConfig, run, truth_terms: dict, truth_delay: dict) -> dict:
    header = {
        "config": cfg.name,
        "run": run.tag,
        "noise": {"level": run.noise.level, "seed": run.noise.seed},
        "truth": {"delay": truth_delay, "terms": truth_terms},
    }
    return result_report(run.result, header)


def trajectory_columns(run, smoothed) -> tuple[list[str], np.ndarray]:
    """Columns ``t, truth_*, data_*, smoothed_*, identified_*`` on the data grid."""
    names = run.clean.names
    n = len(run.clean)
    ident = np.full((n, len(names)), np.nan)
    sim = run.result.simulation
    if sim is not None:
        ident[: len(sim)] = sim.values
    header = ["t"] + [f"{kind}_{c}" for kind in ("truth", "data", "smoothed", "identified") for c in names]
    cols = np.column_stack([run.clean.times, run.clean.values, run.data.values, smoothed.values, ident])
    return header, cols


def write_table(header, values, path) -> Path:
    path = Path(path)
    np.savetxt(path, values, delimiter=",", header=",".join(header), comments="", fmt="%.16e")
    return path


def _prefix(tag: str) -> str:
    return "" if tag == "run" else f"{tag}_"


def write_runs(cfg: ExperimentConfig, truth, runs, out_dir: Path, figures: bool = True) -> list[Path]:
    from .experiments import true_delay, true_terms

    terms, delay = true_terms(cfg), true_delay(cfg)
    files = [write_csv(truth.series, out_dir / "data_clean.csv")]
    summary = []
    for run in runs:
        pre = _prefix(run.tag)
        r = run.result
        files.append(write_json(run_report(cfg, run, terms, delay), out_dir / f"{pre}report.json"))
        files.append(write_rows(leaderboard_rows(r), leaderboard_columns(r), out_dir / f"{pre}leaderboard.csv"))
        if run.noise.level > 0:
            files.append(write_csv(run.data, out_dir / f"{pre}data_noisy.csv"))
        smoothed = preprocess(run.data, cfg.identify.smoother).smoothed
        header, cols = trajectory_columns(run, smoothed)
        files.append(write_table(header, cols, out_dir / f"{pre}trajectory.csv"))
        row = {"run": run.tag, "eta": run.noise.level, "seed": run.noise.seed, **r.candidate.as_dict(),
               "score": r.score.deriv_error if r.criterion == "deriv" else r.score.bic}
        for c in r.model.component_names:
            row[f"support_{c}"] = " ".join(r.model.support(c))
        summary.append(row)
        if figures:
            d = len(run.clean.names)
            files.append(plot_fit(r, run.data, smoothed, cols[:, 1 + 3 * d:], out_dir / f"{pre}fit.svg",
                                  truth=run.clean))
            if len(cfg.grid.taus) > 1:
                files.append(plot_landscape(r, out_dir / f"{pre}landscape.svg"))
    comps = runs[0].result.model.component_names if runs else ()
    columns = ("run", "eta", "seed", "tau", "p", "hill_P0", "hill_n", "score") + tuple(f"support_{c}" for c in comps)
    files.append(write_rows(summary, columns, out_dir / "summary.csv"))
    return files


# --------------------------------------------------------------------------
# figures


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # fixed ids so repeated runs give identical SVG files
    matplotlib.rcParams["svg.hashsalt"] = "lctsindy"
    return plt


def _save(fig, path) -> Path:
    import matplotlib.pyplot as plt

    path = Path(path)
    meta = {"Date": None} if path.suffix == ".svg" else {}
    fig.savefig(path, dpi=120, metadata=meta)
    plt.close(fig)
    return path


def plot_fit(result, data, smoothed, identified, path, truth=None) -> Path:
    """Left: data, smoothed signal and split. Right: identified model against
    the truth when available, otherwise against the data."""
    plt = _pyplot()
    names = data.names
    d = len(names)
    fig, axes = plt.subplots(d, 2, figsize=(10, 2.6 * d), squeeze=False, sharex=True)
    t = data.times
    ref, ref_label = (truth, "truth") if truth is not None else (data, "data")
    for j, c in enumerate(names):
        ax = axes[j, 0]
        ax.plot(t, data.values[:, j], lw=0.6, color="tab:blue", label="data")
        ax.plot(t, smoothed.values[:, j], lw=1.2, color="tab:red", label="smoothed")
        ax.axvline(result.split_time, ls="--", color="k", lw=0.8)
        ax.set_ylabel(c)
        ax = axes[j, 1]
        ax.plot(t, ref.values[:, j], lw=1.2, color="tab:blue", label=ref_label)
        ax.plot(t, identified[:, j], lw=1.2, ls="--", color="tab:red", label="identified")
        ax.axvline(result.split_time, ls="--", color="k", lw=0.8)
    axes[0, 0].legend(loc="upper right", fontsize=8)
    axes[0, 1].legend(loc="upper right", fontsize=8)
    cand = result.candidate
    axes[0, 1].set_title(f"tau* = {cand.tau:g}" + (f", p* = {cand.p}" if cand.p is not None else ""))
    axes[-1, 0].set_xlabel("t")
    axes[-1, 1].set_xlabel("t")
    fig.tight_layout()
    return _save(fig, path)


def plot_landscape(result, path) -> Path:
    """Selection score against tau, one line per chain order."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.6))
    key = "deriv_error" if result.criterion == "deriv" else "bic"
    groups: dict = {}
    for e in result.leaderboard:
        groups.setdefault(e.candidate.p, []).append((e.candidate.tau, getattr(e.score, key)))
    for p, pts in sorted(groups.items(), key=lambda kv: kv[0] or 0):
        # several Hill settings per tau: keep the best one
        best: dict = {}
        for tau, v in pts:
            v = v if v is not None and np.isfinite(v) else np.nan
            if tau not in best or (np.isfinite(v) and not v >= best[tau]):
                best[tau] = v
        taus = sorted(best)
        ax.plot(taus, [best[t] for t in taus], marker="o", ms=2.5, lw=1, label="lag" if p is None else f"p = {p}")
    ax.axvline(result.candidate.tau, color="k", ls=":", lw=0.8)
    ax.set_xlabel("tau")
    ax.set_ylabel(key)
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    return _save(fig, path)


def plot_robustness(rows, out_dir: Path) -> list[Path]:
    """Error of the rebuilt delayed state and of the derivatives, against
    noise at the sampling step closest to 5 and against sampling at zero noise."""
    plt = _pyplot()
    dts = sorted({r["dt"] for r in rows})
    dt_ref = min(dts, key=lambda d: abs(d - 5.0))
    eta0 = min(r["eta"] for r in rows)
    fig, (a, b) = plt.subplots(1, 2, figsize=(10, 3.6))
    sel = sorted((r for r in rows if r["dt"] == dt_ref), key=lambda r: r["eta"])
    for key, color, label in (("err_z", "tab:blue", "z_p"), ("err_dP", "tab:red", "dP/dt"),
                              ("err_dM", "goldenrod", "dM/dt")):
        a.plot([r["eta"] for r in sel], [r[key] for r in sel], marker="o", color=color, label=label)
    a.set_xlabel("noise level")
    a.set_ylabel("relative error")
    a.set_title(f"dt = {dt_ref:g}")
    a.legend(fontsize=8)
    sel = sorted((r for r in rows if r["eta"] == eta0), key=lambda r: r["dt"])
    b.plot([r["dt"] for r in sel], [r["err_z"] for r in sel], marker="o", color="tab:blue")
    b.set_xlabel("sampling step")
    b.set_ylabel("relative error of z_p")
    b.set_title(f"noise = {eta0:g}")
    fig.tight_layout()
    return [_save(fig, Path(out_dir) / "robustness.svg")]
