"""Figure rendering for CLI run outputs.

Reads the delimited files a run directory contains and renders the
matching matplotlib figures next to them.  Kept separate from the
compute path: the subcommands emit plot-ready CSV, and the report step
turns those files into PNGs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd


def plot_spectrum_csv(csv_path, out_png=None) -> Path:
    """Transition frequencies versus the sweep axis, one line per
    (branch, transition) pair."""
    csv_path = Path(csv_path)
    df = pd.read_csv(csv_path)
    axis = "flux_phi0" if "flux_phi0" in df.columns else "ng"
    fig, ax = plt.subplots(figsize=(7, 5))
    for (branch, i, j), grp in df.groupby(["branch", "from_index", "to_index"]):
        style = "-" if branch == "even" else "--"
        ax.plot(grp[axis], grp["freq_ghz"], style, lw=1,
                label=f"{branch} {i}-{j}")
    ax.set_xlabel("external flux (Phi_0)" if axis == "flux_phi0"
                  else "offset charge n_g")
    ax.set_ylabel("transition frequency (GHz)")
    if df.groupby(["branch", "from_index", "to_index"]).ngroups <= 14:
        ax.legend(fontsize=7, ncol=2)
    out_png = Path(out_png) if out_png else csv_path.with_suffix(".png")
    fig.savefig(out_png, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out_png


def plot_wannier_csv(csv_path, out_png=None) -> Path:
    """Probability density of a Wannier function over the phase plane."""
    csv_path = Path(csv_path)
    df = pd.read_csv(csv_path)
    grid = df.pivot(index="phi", columns="theta", values="probability")
    fig, ax = plt.subplots(figsize=(7, 4))
    mesh = ax.pcolormesh(grid.columns, grid.index, grid.values,
                         shading="auto", cmap="magma")
    fig.colorbar(mesh, ax=ax, label="|w(theta, phi)|^2")
    ax.set_xlabel("theta")
    ax.set_ylabel("phi")
    out_png = Path(out_png) if out_png else csv_path.with_suffix(".png")
    fig.savefig(out_png, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out_png


def plot_bloch_dispersion_csv(csv_path, out_png=None) -> Path:
    """Band energy versus offset charge."""
    csv_path = Path(csv_path)
    df = pd.read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(df["ng"], df["energy_ghz"], "o-", ms=3)
    ax.set_xlabel("offset charge n_g")
    ax.set_ylabel("band energy (GHz)")
    out_png = Path(out_png) if out_png else csv_path.with_suffix(".png")
    fig.savefig(out_png, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out_png


def plot_raman_csv(csv_path, out_png=None) -> Path:
    """Level populations and readout signal versus time."""
    csv_path = Path(csv_path)
    df = pd.read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(7, 4))
    for col, label in (("p0", "P0"), ("p1", "P1"), ("p2", "P2")):
        ax.plot(df["time_us"], df[col], label=label)
    ax.plot(df["time_us"], df["signal"], "k--", lw=1, label="signal")
    ax.set_xlabel("time (us)")
    ax.set_ylabel("population")
    ax.legend()
    out_png = Path(out_png) if out_png else csv_path.with_suffix(".png")
    fig.savefig(out_png, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out_png


def plot_sequence_csv(csv_path, out_png=None) -> Path:
    """Sequence signal versus the scanned axis."""
    csv_path = Path(csv_path)
    df = pd.read_csv(csv_path)
    xcol = df.columns[0]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(df[xcol], df["signal"], "o-", ms=3)
    ax.set_xlabel(xcol)
    ax.set_ylabel("signal")
    out_png = Path(out_png) if out_png else csv_path.with_suffix(".png")
    fig.savefig(out_png, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out_png


def plot_fit_residuals(result_json, out_png=None) -> Path:
    """Best-metric trace and per-point residuals of a fit result."""
    import json

    result_json = Path(result_json)
    with open(result_json) as fh:
        doc = json.load(fh)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.semilogy(doc["best_metric_trace"])
    ax1.set_xlabel("evaluation")
    ax1.set_ylabel("best metric (GHz^2)")
    ax2.plot(1e3 * pd.Series(doc["residuals_ghz"]), ".")
    ax2.set_xlabel("data point")
    ax2.set_ylabel("residual (MHz)")
    out_png = Path(out_png) if out_png else result_json.with_suffix(".png")
    fig.savefig(out_png, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out_png


#: filename stem -> renderer used by the report step
_RENDERERS = {
    "spectrum": plot_spectrum_csv,
    "wannier": plot_wannier_csv,
    "bloch_dispersion": plot_bloch_dispersion_csv,
    "trajectory": plot_raman_csv,
    "sequence": plot_sequence_csv,
}


def render_run(run_dir) -> list[Path]:
    """Render every recognized delimited file in a run directory,
    writing the PNGs alongside.  Returns the figure paths."""
    run_dir = Path(run_dir)
    out = []
    for csv_path in sorted(run_dir.glob("*.csv")):
        for stem, renderer in _RENDERERS.items():
            if csv_path.stem == stem or csv_path.stem.startswith(stem + "_"):
                out.append(renderer(csv_path))
                break
    fit_json = run_dir / "fit_result.json"
    if fit_json.exists():
        out.append(plot_fit_residuals(fit_json))
    return out
