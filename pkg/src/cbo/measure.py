"""
Empirical-measure primitives: weighted mean, moments, the Laplace functional
and 2-Wasserstein distances used as error metrics.

All weight computations shift the exponent by its maximum before
exponentiating, so ``alpha * f`` may be large without underflowing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Ensemble",
    "WeightedStats",
    "weighted_stats",
    "mean",
    "variance",
    "second_moment",
    "laplace_functional",
    "wasserstein2_1d",
    "w2_to_dirac",
    "w2_grid_to_dirac",
]


class Ensemble:
    """
    Immutable set of ``N`` equally weighted particles in ``d`` dimensions.

    A 1-D input is read as ``N`` particles in one dimension.
    """

    __slots__ = ("_positions",)

    def __init__(self, positions):
        x = np.array(positions, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise ValueError("positions must be an (N, d) array")
        if x.shape[0] < 1:
            raise ValueError("an ensemble needs at least one particle")
        if not np.all(np.isfinite(x)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(x), axis=1))[0])
            raise ValueError("non-finite coordinates at particle %d" % bad)
        x.setflags(write=False)
        self._positions = x

    @property
    def positions(self):
        return self._positions

    @property
    def count(self):
        return self._positions.shape[0]

    @property
    def dim(self):
        return self._positions.shape[1]

    def __len__(self):
        return self.count

    def __repr__(self):
        return "Ensemble(count=%d, dim=%d)" % (self.count, self.dim)


@dataclass(frozen=True)
class WeightedStats:
    m_f: np.ndarray
    weight_norm: float
    log_weight_norm: float
    normalized_weights: np.ndarray
    alpha: float


def _check_costs(values):
    finite = np.isfinite(values)
    if not np.all(finite):
        bad = int(np.flatnonzero(~finite)[0])
        raise FloatingPointError("non-finite objective value at particle %d" % bad)


def weighted_stats(ensemble, obj, alpha):
    """
    Weighted mean ``m_f = sum x_i exp(-alpha f(x_i)) / sum exp(-alpha f(x_i))``.

    The mean is accumulated as offsets from the best particle, so an ensemble
    collapsed onto one point returns that point bit-exactly.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive, got %s" % alpha)
    x = ensemble.positions
    if x.shape[1] != obj.dim:
        raise ValueError("dimension mismatch: objective dim %d, ensemble dim %d" % (obj.dim, x.shape[1]))
    costs = obj(x)
    _check_costs(costs)
    best = int(np.argmin(costs))
    w = np.exp(-alpha * (costs - costs[best]))
    total = w.sum()
    offsets = x - x[best]
    m = x[best] + (w @ offsets) / total
    log_norm = -alpha * costs[best] + np.log(total / x.shape[0])
    # the norm itself may overflow for negative costs; its log stays exact
    with np.errstate(over="ignore"):
        norm = float(np.exp(log_norm))
    return WeightedStats(
        m_f=m,
        weight_norm=norm,
        log_weight_norm=float(log_norm),
        normalized_weights=w / total,
        alpha=float(alpha),
    )


def mean(ensemble):
    return ensemble.positions.mean(axis=0)


def variance(ensemble):
    """Half the mean squared distance to the ensemble mean."""
    # offsets from the first particle are exactly zero for a collapsed ensemble
    y = ensemble.positions - ensemble.positions[0]
    dev = y - y.mean(axis=0)
    return 0.5 * float(np.mean(np.sum(dev**2, axis=1)))


def second_moment(ensemble, p=1):
    """Mean of ``|x_i|^(2p)``."""
    if int(p) < 1:
        raise ValueError("p must be a positive integer, got %s" % p)
    sq = np.sum(ensemble.positions**2, axis=1)
    return float(np.mean(sq ** int(p)))


def _log_mean_exp(a):
    top = np.max(a)
    return top + np.log(np.mean(np.exp(a - top)))


def laplace_functional(ensemble, obj, alpha):
    """``-(1/alpha) log mean exp(-alpha f(x_i))``; lies in ``[min f, max f]``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive, got %s" % alpha)
    costs = obj(ensemble.positions)
    _check_costs(costs)
    value = -_log_mean_exp(-alpha * costs) / alpha
    # rounding can leave the value a few ulps outside the hull
    return float(np.clip(value, costs.min(), costs.max()))


def wasserstein2_1d(a, b):
    """Exact W2 between two equal-size 1-D empirical measures (sorted matching)."""
    if a.dim != 1 or b.dim != 1:
        raise ValueError("wasserstein2_1d needs one-dimensional ensembles")
    if a.count != b.count:
        raise ValueError("particle counts differ (%d vs %d); resampling is not supported" % (a.count, b.count))
    xa = np.sort(a.positions[:, 0])
    xb = np.sort(b.positions[:, 0])
    return float(np.sqrt(np.mean((xa - xb) ** 2)))


def w2_to_dirac(ensemble, target):
    """W2 between the empirical measure and a point mass at ``target``."""
    target = np.asarray(target, dtype=float).reshape(-1)
    if target.shape[0] != ensemble.dim:
        raise ValueError("target has dim %d, ensemble has dim %d" % (target.shape[0], ensemble.dim))
    dev = ensemble.positions - target
    return float(np.sqrt(np.mean(np.sum(dev**2, axis=1))))


def w2_grid_to_dirac(grid, target):
    """W2 between a quantile grid and ``delta_target`` by trapezoid quadrature."""
    chi = np.asarray(grid.values, dtype=float)
    return float(np.sqrt(np.trapezoid((chi - float(target)) ** 2, dx=grid.spacing)))
