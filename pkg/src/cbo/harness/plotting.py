"""
SVG figures from run directories: error curves on a log axis, quantile
snapshots, and overlays of several runs.
"""

from __future__ import annotations

import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiment import read_csv, read_manifest  # noqa: E402

__all__ = ["PLOT_FLOOR", "error_curve_data", "render_plots", "render_overlay"]

# values at or below this are drawn at the floor of the log axis
PLOT_FLOOR = 1e-16

# fixed salt and no timestamp keep the SVG bytes reproducible; without
# simplification every recorded sample appears as a path vertex
_RC = {"svg.hashsalt": "cbo", "svg.fonttype": "none", "path.simplify": False}
_META = {"Date": None, "Creator": "cbo"}


def error_curve_data(run_dir):
    """
    ``(t, w2, clipped)`` as drawn in ``error_curve.svg``; ``w2`` is the
    averaged W2 error with values below ``PLOT_FLOOR`` raised to it.
    """
    series = read_csv(Path(run_dir) / "series.csv")
    for col in ("t", "w2_mean"):
        if col not in series:
            raise ValueError("%s/series.csv lacks the %r column" % (run_dir, col))
    t = series["t"]
    w2 = series["w2_mean"]
    if not np.all(np.isfinite(w2)):
        raise ValueError("%s/series.csv has no finite W2 errors (objective without a known minimizer?)" % run_dir)
    clipped = w2 <= PLOT_FLOOR
    return t, np.where(clipped, PLOT_FLOOR, w2), clipped


def _label(run_dir):
    m = read_manifest(run_dir)
    scheme = m.get("config.scheme", Path(run_dir).name)
    parts = [scheme]
    if scheme in ("porous", "chi") and "effective.p" in m:
        parts.append("p=%s" % m["effective.p"])
    eps = m.get("effective.heaviside_eps")
    if eps is not None and float(eps) > 0:
        parts.append("eps=%s" % eps)
    return " ".join(parts)


def _draw_curve(ax, t, w2, clipped, label, gid):
    style = "o" if len(t) == 1 else "-"
    ax.semilogy(t, w2, style, label=label, lw=1.2, gid=gid)
    if np.any(clipped):
        ax.semilogy(t[clipped], w2[clipped], "v", ms=3, color=ax.lines[-1].get_color(), label="%s (at floor %.0e)" % (label, PLOT_FLOOR))


def _save(fig, path, description):
    meta = dict(_META, Description=description)
    fig.savefig(path, format="svg", metadata=meta)
    plt.close(fig)


def render_plots(run_dir):
    """
    Write ``error_curve.svg`` and, when quantile snapshots exist,
    ``chi_progression.svg`` into ``run_dir``.

    Returns
    -------
    list of Path
    """
    run_dir = Path(run_dir)
    t, w2, clipped = error_curve_data(run_dir)
    written = []
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        _draw_curve(ax, t, w2, clipped, _label(run_dir), "curve_0")
        ax.set_xlabel("t")
        ax.set_ylabel("W2 distance to the minimizer")
        ax.legend(fontsize=8)
        path = run_dir / "error_curve.svg"
        _save(fig, path, "error curve of %s/series.csv" % run_dir.name)
        written.append(path)

        snaps = sorted(run_dir.glob("chi_t*.csv"), key=lambda p: int(re.findall(r"\d+", p.stem)[0]))
        if snaps:
            fig, ax = plt.subplots(figsize=(6, 4))
            cmap = plt.get_cmap("viridis")
            for k, snap in enumerate(snaps):
                grid = read_csv(snap)
                step = int(re.findall(r"\d+", snap.stem)[0])
                ax.plot(grid["eta"], grid["chi"], color=cmap(k / max(1, len(snaps) - 1)), lw=1.0, label="step %d" % step)
            ax.set_xlabel("eta")
            ax.set_ylabel("chi")
            if len(snaps) <= 12:
                ax.legend(fontsize=7)
            path = run_dir / "chi_progression.svg"
            _save(fig, path, "quantile snapshots of %s" % run_dir.name)
            written.append(path)
    return written


def render_overlay(run_dirs, path):
    """
    One log-scale axis with the error curve of every run, labeled by scheme.

    The curve of ``run_dirs[k]`` is the SVG group with id ``curve_k``.
    """
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        for k, run_dir in enumerate(run_dirs):
            t, w2, clipped = error_curve_data(run_dir)
            _draw_curve(ax, t, w2, clipped, _label(run_dir), "curve_%d" % k)
        ax.set_xlabel("t")
        ax.set_ylabel("W2 distance to the minimizer")
        ax.legend(fontsize=8)
        _save(fig, path, "overlay of %d runs" % len(run_dirs))
    return Path(path)
