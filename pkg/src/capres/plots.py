"""Figure rendering for the report path (matplotlib, file output only)."""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_spectra_figure", "render_width_figure"]

_STYLE = {
    "oracle": dict(marker="x", color="k", s=60, zorder=5, label="oracle"),
    "cap": dict(marker="o", facecolors="none", edgecolors="C0", s=45, label="cap"),
    "scaled": dict(marker="s", facecolors="none", edgecolors="C3", s=40, label="scaled"),
    "dirichlet": dict(marker=".", color="0.6", s=12, label="dirichlet"),
}


def render_spectra_figure(rows, path, title=None, window=None):
    """Scatter of eigenvalues/resonances in the complex plane.

    rows: iterable of (re, im, method) tuples.  Symlog vertical axis so that
    widths spanning many orders of magnitude stay visible.
    """
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    by_method = {}
    for re, im, method in rows:
        by_method.setdefault(method, []).append((re, im))
    for method, pts in sorted(by_method.items()):
        arr = np.asarray(pts)
        style = _STYLE.get(method, dict(marker="+", label=method))
        ax.scatter(arr[:, 0], arr[:, 1], **style)
    ax.set_yscale("symlog", linthresh=1e-14)
    ax.axhline(0.0, color="0.8", lw=0.8, zorder=0)
    if window is not None:
        a, b, c = window
        ax.axvspan(a, b, color="C2", alpha=0.08, zorder=0)
        ax.axhline(-c, color="C2", lw=0.8, ls="--", zorder=0)
    ax.set_xlabel("Re z")
    ax.set_ylabel("Im z")
    if title:
        ax.set_title(title)
    ax.legend(loc="lower left", fontsize=8)
    fig.tight_layout()
    os.makedirs(os.path.dirname(os.fspath(path)) or ".", exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_width_figure(records, path):
    """Resonance width -Im z against Re z for each h (log vertical axis)."""
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for h, pts in sorted(records.items()):
        arr = np.asarray(pts)
        widths = np.maximum(-arr[:, 1], 1e-300)
        ax.semilogy(arr[:, 0], widths, "o-", ms=4, label=f"h={h:g}")
    ax.set_xlabel("Re z")
    ax.set_ylabel("-Im z")
    ax.set_title("resonance widths")
    ax.legend(fontsize=8)
    fig.tight_layout()
    os.makedirs(os.path.dirname(os.fspath(path)) or ".", exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
