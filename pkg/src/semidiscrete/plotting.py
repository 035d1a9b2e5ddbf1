"""Schematic SVG error plot: points, confidence bars, fitted lines."""

from __future__ import annotations

import math

import numpy as np

from .analysis import ConvergenceReport


def plot_convergence(report: ConvergenceReport, path) -> None:
    """Write a log2-log2 error plot with CI bars and fitted order lines."""
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "semidiscrete"
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    schemes = sorted({row.scheme for row in report.rows}, key=lambda s: s.value)
    for scheme in schemes:
        rows = [
            row
            for row in report.rows
            if row.scheme is scheme and math.isfinite(row.err_mean) and row.err_mean > 0
        ]
        if not rows:
            continue
        x = np.array([math.log2(row.dt) for row in rows])
        y = np.array([math.log2(row.err_mean) for row in rows])
        lower = np.empty(len(rows))
        upper = np.empty(len(rows))
        for i, row in enumerate(rows):
            ci = row.ci_half_width if math.isfinite(row.ci_half_width) else 0.0
            lo = max(row.err_mean - ci, row.err_mean * 1e-3)
            lower[i] = y[i] - math.log2(lo)
            upper[i] = math.log2(row.err_mean + ci) - y[i]
        ax.errorbar(x, y, yerr=[lower, upper], marker="o", capsize=3, label=scheme.value)
        for fit in report.fits:
            if fit.scheme is scheme and fit.subset == "all":
                xs = np.array([x.min(), x.max()])
                ax.plot(
                    xs,
                    fit.slope * xs + fit.intercept,
                    linestyle="--",
                    linewidth=0.8,
                    label=f"{scheme.value} fit: slope {fit.slope:.3f}",
                )
    ax.set_xlabel("log2 step size")
    ax.set_ylabel("log2 endpoint error")
    ax.legend(fontsize=8)
    ax.grid(True, linewidth=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
