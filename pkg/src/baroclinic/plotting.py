"""Figures written straight to files (Agg canvas; no pyplot state)."""

from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

__all__ = ["plot_stability_map", "plot_growth", "plot_residual_scaling"]


def _save(fig, path):
    FigureCanvasAgg(fig)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    return path


def plot_stability_map(rows, path, q_c=None):
    """Re lambda against q, one curve per B."""
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot(111)
    for B in sorted({r["B"] for r in rows}):
        sel = [r for r in rows if r["B"] == B]
        ax.plot([r["q"] for r in sel], [r["re_lambda"] for r in sel], label=f"B = {B:g}")
    if q_c is not None:
        ax.axvline(q_c, color="k", lw=0.8, ls="--", label=f"q_c = {q_c:.4f}")
    ax.axhline(0.0, color="grey", lw=0.5)
    ax.set_xlabel("q")
    ax.set_ylabel("Re λ")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_growth(series, path, rate=None, window=None):
    """Log amplitude series with an optional reference slope."""
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot(111)
    t = np.asarray(series.times)
    ax.semilogy(t, series.amplitudes, label="energy$^{1/2}$")
    for (m, n), vals in series.modes.items():
        ax.semilogy(t, vals, lw=0.9, label=f"mode ({m},{n})")
    if rate is not None and series.modes:
        ref = next(iter(series.modes.values()))
        t0 = window[0] if window else t[0]
        i0 = int(np.argmin(np.abs(t - t0)))
        ax.semilogy(t, ref[i0] * np.exp(rate * (t - t[i0])), "k:", label=f"exp({rate:.4f} t)")
    ax.set_xlabel("t")
    ax.set_ylabel("amplitude")
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)


def plot_residual_scaling(reports, slopes, path, equations=("momentum_x", "momentum_y", "temperature", "divergence")):
    """Residual L2 norms against Ro on log-log axes."""
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot(111)
    Ro = [r.Ro for r in reports]
    for eq in equations:
        ax.loglog(Ro, [r.l2[eq] for r in reports], "o-", label=f"{eq} (slope {slopes[eq]:.2f})")
    ax.set_xlabel("Ro")
    ax.set_ylabel("residual L2 norm")
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)
