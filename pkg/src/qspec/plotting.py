"""Static figures for pricing runs, written as SVG next to the CSV tables."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "axes.linewidth": 0.8,
    "svg.fonttype": "none",
    # fixed salt so element ids, and therefore files, are reproducible
    "svg.hashsalt": "qspec",
}
PALETTE = ["#0C5DA5", "#00A08A", "#F2AD00", "#F98400", "#5BBCD6", "#B40F20"]


def _finish(fig, ax, path, description=None):
    for spine in ("top", "right"):
        ax.spines[spine].set_visible(False)
    ax.grid(alpha=0.25, linewidth=0.5, linestyle="--")
    fig.tight_layout()
    meta = {"Date": None, "Creator": "qspec"}
    if description is not None:
        meta["Description"] = description
    fig.savefig(path, format="svg", metadata=meta)
    plt.close(fig)
    return path


def scatter_predicted(result, path, title=None):
    """Predicted vs actual mean returns with the 45-degree line; one point per asset."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.6, 3.4))
        ax.scatter(result.predicted, result.actual, s=14, color=PALETTE[0], zorder=3, gid="assets")
        lo = float(min(result.predicted.min(), result.actual.min()))
        hi = float(max(result.predicted.max(), result.actual.max()))
        pad = 0.05 * (hi - lo or 1.0)
        ax.plot([lo - pad, hi + pad], [lo - pad, hi + pad], color="0.3", lw=0.8)
        ax.set_xlabel("predicted mean return (%)")
        ax.set_ylabel("actual mean return (%)")
        label = title or result.model + (f" tau={result.tau:g}" if result.tau is not None else "")
        ax.set_title(f"{label}  RMSPE {result.rmspe:.2f}")
        return _finish(fig, ax, path)


def rmspe_curves(curves: dict, path, benchmark: float | None = None, benchmark_label="benchmark"):
    """RMSPE against tau for each model; failed points leave gaps."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.0))
        for i, (name, pts) in enumerate(curves.items()):
            tau = np.array([p[0] for p in pts])
            val = np.array([p[1] for p in pts], dtype=float)
            ax.plot(tau, val, color=PALETTE[i % len(PALETTE)], lw=1.2, label=name)
        desc = None
        if benchmark is not None and math.isfinite(benchmark):
            ax.axhline(benchmark, color="0.2", lw=0.8, ls="--", label=benchmark_label)
            desc = f"benchmark_rmspe={benchmark!r}"
        ax.set_xlabel("tau")
        ax.set_ylabel("RMSPE")
        ax.legend(frameon=False)
        return _finish(fig, ax, path, description=desc)


def per_frequency_betas(spectrum, path, cutoff=None, title=None):
    """Real part of the per-frequency beta ratio, with the band split marked."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.0))
        ax.plot(spectrum.frequencies, spectrum.betas().real, color=PALETTE[0], lw=1.0)
        if cutoff is not None:
            ax.axvline(2 * math.pi / cutoff, color="0.4", lw=0.8, ls=":")
        ax.set_xlabel("frequency (radians)")
        ax.set_ylabel("QS beta")
        if title:
            ax.set_title(title)
        return _finish(fig, ax, path)
