"""Report figures, rendered off-screen to PNG."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import PolyCollection  # noqa: E402

plt.rcParams.update({
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 120,
})


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def measure_vs_bound(grid, measured, bound, stderr, path, xlabel="eps", title=None, curve_label="lower bound"):
    """Log-log plot of the measured values (with 3-sigma bars) against a lower bound."""
    grid, measured = np.asarray(grid, dtype=float), np.asarray(measured, dtype=float)
    bound, stderr = np.asarray(bound, dtype=float), np.asarray(stderr, dtype=float)
    fig, ax = plt.subplots(figsize=(4.5, 3.4))
    ax.errorbar(grid, measured, yerr=3 * stderr, fmt="o-", ms=3, label="measured")
    pos = bound > 0
    if pos.any():
        ax.plot(grid[pos], bound[pos], "s--", ms=3, label=curve_label)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("measure")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    return _save(fig, path)


def box_counts(deltas, counts, slope, intercept, path, title=None):
    deltas, counts = np.asarray(deltas, dtype=float), np.asarray(counts, dtype=float)
    fig, ax = plt.subplots(figsize=(4.5, 3.4))
    x = np.log(1.0 / deltas)
    ax.plot(x, np.log(counts), "o", ms=4, label="log N(delta)")
    ax.plot(x, slope * x + intercept, "-", lw=1, label=f"slope {slope:.3f}")
    ax.set_xlabel("log(1/delta)")
    ax.set_ylabel("log N")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    return _save(fig, path)


def fan(polygons, path, title=None):
    """Outline of a planar tube family; ``polygons`` has shape (k, 4, 2)."""
    polygons = np.asarray(polygons)
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.add_collection(PolyCollection(polygons, facecolors="C0", edgecolors="none", alpha=0.25))
    pts = polygons.reshape(-1, 2)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = 0.05 * float(np.max(hi - lo))
    ax.set_xlim(lo[0] - pad, hi[0] + pad)
    ax.set_ylim(lo[1] - pad, hi[1] + pad)
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def history(values, path, title=None):
    fig, ax = plt.subplots(figsize=(4.5, 3.0))
    ax.plot(np.arange(1, len(values) + 1), values, "-", lw=1)
    ax.set_xlabel("iteration")
    ax.set_ylabel("union area (MC)")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def displacement(deltas, measured, bound, path, title=None):
    fig, ax = plt.subplots(figsize=(4.5, 3.4))
    ax.loglog(deltas, measured, "o-", ms=3, label="max displacement")
    ax.loglog(deltas, bound, "--", label="allowed")
    ax.set_xlabel("delta")
    ax.set_ylabel("distance")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    return _save(fig, path)


def segments_2d(starts, ends, path, title=None, sector=None):
    """Planar segment family, optionally with a witnessed sector (points) overlaid."""
    fig, ax = plt.subplots(figsize=(4, 4))
    for a, b in zip(starts, ends):
        ax.plot([a[0], b[0]], [a[1], b[1]], "-", lw=0.3, color="C0")
    if sector is not None and len(sector):
        ax.plot(sector[:, 0], sector[:, 1], ".", ms=1, color="C3", alpha=0.5)
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    return _save(fig, path)
