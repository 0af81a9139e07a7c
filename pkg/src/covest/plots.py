"""Figure rendering for benchmark outputs.

Renders the same curves that land in the CSV files, one PNG per curve
family, next to the delimited output.  Uses the Agg backend so it works
headless.
"""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .montecarlo import DEFAULT_KAPPAS, ExperimentResult, ccdf

_AXIS_LABELS = {
    "snr_db": "SNR [dB]",
    "N": "snapshots N",
    "delta_nu_x": "signal dof offset",
    "delta_nu_w": "noise dof offset",
    "epsilon": "stopping tolerance",
}


def apply_style():
    plt.rcParams.update({
        "figure.figsize": (6.0, 4.0),
        "figure.dpi": 120,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "lines.linewidth": 1.4,
        "legend.fontsize": 9,
        "axes.labelsize": 10,
    })


def _save(fig, outdir, stem):
    path = os.path.join(outdir, f"{stem}.png")
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def render_nmse(result: ExperimentResult, outdir, stem="nmse"):
    """NMSE-vs-grid curves, one line per estimator."""
    apply_style()
    fig, ax = plt.subplots()
    grid = [p.grid_value for p in result.points]
    estimators = sorted({e for p in result.points for e in p.nmse_db})
    for est in estimators:
        vals = [p.nmse_db.get(est, np.nan) for p in result.points]
        ax.plot(grid, vals, marker="o", label=est)
    if result.config.sweep == "epsilon":
        ax.set_xscale("log")
    ax.set_xlabel(_AXIS_LABELS.get(result.config.sweep, result.config.sweep))
    ax.set_ylabel("NMSE [dB]")
    ax.set_title(result.config.name)
    ax.legend()
    return _save(fig, outdir, stem)


def render_ccdf(result: ExperimentResult, outdir, stem="ccdf", kappas=DEFAULT_KAPPAS):
    """Exceedance curves Pr{NSE > kappa} on log-log axes."""
    apply_style()
    fig, ax = plt.subplots()
    kappas = np.asarray(kappas)
    multi = len(result.points) > 1
    for p in result.points:
        for est, samples in sorted(p.nse_samples.items()):
            if not len(samples):
                continue
            label = f"{est}@{p.grid_value:g}" if multi else est
            ax.loglog(kappas, np.maximum(ccdf(samples, kappas), 1e-12), label=label)
    ax.set_xlabel("kappa")
    ax.set_ylabel("Pr{NSE > kappa}")
    ax.set_ylim(1e-5, 1.2)
    ax.set_title(result.config.name)
    ax.legend()
    return _save(fig, outdir, stem)


def render_iteration_ccdf(result: ExperimentResult, outdir, stem="niter_ccdf"):
    """Exceedance of the solver iteration counts per grid point."""
    apply_style()
    fig, ax = plt.subplots()
    multi = len(result.points) > 1
    drew = False
    for p in result.points:
        for est, vals in sorted(p.iteration_samples.items()):
            ks = np.arange(0, int(vals.max()) + 1)
            label = f"{est}@{p.grid_value:g}" if multi else est
            ax.semilogy(ks, np.maximum(ccdf(vals, ks), 1e-12), label=label)
            drew = True
    if not drew:
        plt.close(fig)
        return None
    ax.set_xlabel("iterations k")
    ax.set_ylabel("Pr{N_iter > k}")
    ax.set_ylim(1e-5, 1.2)
    ax.set_title(result.config.name)
    ax.legend()
    return _save(fig, outdir, stem)


def render_experiment(result: ExperimentResult, outdir):
    """Render the standard figure set for one experiment."""
    paths = [render_nmse(result, outdir)]
    total_samples = sum(len(s) for p in result.points for s in p.nse_samples.values())
    if total_samples and len(result.points) * len(result.points[0].nse_samples) <= 24:
        paths.append(render_ccdf(result, outdir))
    it_path = render_iteration_ccdf(result, outdir)
    if it_path:
        paths.append(it_path)
    return [p for p in paths if p]
