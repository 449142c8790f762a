"""Side-by-side convergence summary of several run directories."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..diagnostics import fit_decay_rate
from .experiment import _write_csv, read_csv, read_manifest

__all__ = ["NOT_REACHED", "FIT_RANGE", "time_to_threshold", "compare_runs"]

NOT_REACHED = "not reached"
# the decay rate is fit where the averaged error lies in this band
FIT_RANGE = (1e-6, 1e-1)


class _Columns:
    # the minimal series interface fit_decay_rate needs
    def __init__(self, t, w2):
        self.t = t
        self._w2 = w2

    def field(self, name):
        if name != "w2":
            raise ValueError("only the w2 column is available")
        return self._w2


def time_to_threshold(t, values, threshold):
    """First ``t`` with ``value < threshold``, or ``None``."""
    hit = np.flatnonzero(np.asarray(values) < threshold)
    return float(t[hit[0]]) if hit.size else None


def compare_runs(run_dirs, threshold=1e-2, out=None):
    """
    Tabulate time-to-threshold and fitted decay rate of ``w2_mean`` per run.

    Parameters
    ----------
    run_dirs : list of path
        At least two completed run directories.
    threshold : float
    out : path, optional
        Where to write ``comparison.csv``; skipped when ``None``.

    Returns
    -------
    list of dict
        Keys ``run``, ``scheme``, ``p``, ``heaviside_eps``,
        ``time_to_threshold`` (float or ``"not reached"``), ``rate_hat``,
        ``r_squared``. Runs too short for a fit carry NaN rates.
    """
    if len(run_dirs) < 2:
        raise ValueError("compare needs at least two run directories")
    rows = []
    for run_dir in run_dirs:
        series = read_csv(Path(run_dir) / "series.csv")
        if "w2_mean" not in series:
            raise ValueError("%s/series.csv has no w2_mean column" % run_dir)
        manifest = read_manifest(run_dir)
        t, w2 = series["t"], series["w2_mean"]
        hit = time_to_threshold(t, w2, threshold)
        try:
            fit = fit_decay_rate(_Columns(t, w2), "w2", value_range=FIT_RANGE)
            rate, r2 = fit.rate_hat, fit.r_squared
        except ValueError:
            rate, r2 = float("nan"), float("nan")
        rows.append(
            {
                "run": str(run_dir),
                "scheme": manifest.get("config.scheme", "unknown"),
                "p": manifest.get("effective.p", ""),
                "heaviside_eps": manifest.get("effective.heaviside_eps", ""),
                "time_to_threshold": NOT_REACHED if hit is None else hit,
                "rate_hat": rate,
                "r_squared": r2,
            }
        )
    if out is not None:
        header = ["run", "scheme", "p", "heaviside_eps", "threshold", "time_to_threshold", "rate_hat", "r_squared"]
        _write_csv(
            out,
            header,
            [
                [r["run"], r["scheme"], r["p"], r["heaviside_eps"], threshold, r["time_to_threshold"], r["rate_hat"], r["r_squared"]]
                for r in rows
            ],
        )
    return rows
