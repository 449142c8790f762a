"""Time series of run diagnostics shared by every solver."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["DiagnosticsSeries", "SeriesRecorder"]


@dataclass
class DiagnosticsSeries:
    """
    Snapshots recorded along a run.

    ``w2`` is the 2-Wasserstein distance to a point mass at the known
    minimizer (NaN when the objective has none). ``support_width`` is only
    meaningful for quantile grids and is NaN for particle runs.
    """

    step: np.ndarray
    t: np.ndarray
    variance: np.ndarray
    mean: np.ndarray
    m_f: np.ndarray
    weight_norm: np.ndarray
    w2: np.ndarray
    support_width: np.ndarray
    terminated_by: str = "max_steps"
    steps_taken: int = 0
    snapshots: list = None

    def __len__(self):
        return len(self.t)

    def field(self, name):
        if name in ("variance", "V"):
            return self.variance
        if name == "w2":
            return self.w2
        if name == "support_width":
            return self.support_width
        raise ValueError("unknown series field %r" % name)


@dataclass
class SeriesRecorder:
    dt: float
    rows: list = field(default_factory=list)

    def add(self, step, variance, mean, m_f, weight_norm, w2=np.nan, support_width=np.nan):
        self.rows.append(
            (
                int(step),
                step * self.dt,
                float(variance),
                np.atleast_1d(np.asarray(mean, dtype=float)).copy(),
                np.atleast_1d(np.asarray(m_f, dtype=float)).copy(),
                float(weight_norm),
                float(w2),
                float(support_width),
            )
        )

    def last_step(self):
        return self.rows[-1][0] if self.rows else None

    def finish(self, terminated_by, steps_taken):
        cols = list(zip(*self.rows))
        return DiagnosticsSeries(
            step=np.array(cols[0], dtype=int),
            t=np.array(cols[1], dtype=float),
            variance=np.array(cols[2], dtype=float),
            mean=np.vstack(cols[3]),
            m_f=np.vstack(cols[4]),
            weight_norm=np.array(cols[5], dtype=float),
            w2=np.array(cols[6], dtype=float),
            support_width=np.array(cols[7], dtype=float),
            terminated_by=terminated_by,
            steps_taken=int(steps_taken),
        )
