"""
Deterministic mollified particle scheme for the porous-medium variant of
the consensus dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi

import numba
import numpy as np
from scipy.integrate import quad

from .errors import SolverError
from .measure import Ensemble, weighted_stats
from .particle import CboParams, heaviside, iterate

__all__ = ["Mollifier", "PorousParams", "mollifier_value", "mollifier_grad", "porous_rhs", "porous_step", "porous_run"]


def _bump_radial(r):
    return np.exp(1.0 / (r * r - 1.0)) if r < 1.0 else 0.0


def bump_normalization(dim):
    """``Z_d``: integral of ``exp(1 / (|x|^2 - 1))`` over the unit ball in ``R^dim``."""
    sphere = 2.0 * pi ** (dim / 2.0) / gamma(dim / 2.0)
    radial, _ = quad(lambda r: r ** (dim - 1) * _bump_radial(r), 0.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    return sphere * radial


class Mollifier:
    """Compactly supported bump ``eps^-d phi(x / eps)`` with unit mass."""

    def __init__(self, eps, dim):
        if not eps > 0:
            raise ValueError("eps must be positive, got %s" % eps)
        if int(dim) < 1:
            raise ValueError("dim must be a positive integer, got %s" % dim)
        self.eps = float(eps)
        self.dim = int(dim)
        self.z_norm = bump_normalization(self.dim)

    def __repr__(self):
        return "Mollifier(eps=%g, dim=%d)" % (self.eps, self.dim)

    def _scaled(self, x):
        y = np.asarray(x, dtype=float) / self.eps
        if y.shape[-1] != self.dim:
            raise ValueError("point dimension %d does not match mollifier dim %d" % (y.shape[-1], self.dim))
        u = 1.0 - np.sum(y * y, axis=-1)
        inside = u > 0
        # log of the bump, finite only inside the unit ball
        log_bump = np.where(inside, -1.0 / np.where(inside, u, 1.0), -np.inf)
        return y, u, inside, log_bump

    def value(self, x):
        _, _, _, log_bump = self._scaled(x)
        return np.exp(log_bump) / (self.z_norm * self.eps**self.dim)

    def grad(self, x):
        y, u, inside, log_bump = self._scaled(x)
        # d/dy exp(1/(|y|^2-1)) = -2 y exp(-1/u) / u^2
        safe_u = np.where(inside, u, 1.0)
        factor = np.where(inside, np.exp(log_bump - 2.0 * np.log(safe_u)), 0.0)
        g = -2.0 * y * factor[..., None]
        return g / (self.z_norm * self.eps ** (self.dim + 1))


def mollifier_value(moll, x):
    return moll.value(x)


def mollifier_grad(moll, x):
    return moll.grad(x)


@dataclass(frozen=True)
class PorousParams(CboParams):
    p_exponent: float = 2.0
    mollifier_eps: float = 0.1

    def __post_init__(self):
        super().__post_init__()
        if not self.p_exponent >= 1:
            raise ValueError("p_exponent must be >= 1, got %s" % self.p_exponent)
        if not self.mollifier_eps > 0:
            raise ValueError("mollifier_eps must be positive, got %s" % self.mollifier_eps)


@numba.njit(cache=True)
def _pair_sum(x, a, eps, z_norm):
    # sum_j grad phi_eps(x_i - x_j) (a_i + a_j), pairs visited in index order
    n, d = x.shape
    out = np.zeros((n, d))
    eps2 = eps * eps
    scale = -2.0 / (z_norm * eps ** (d + 2))
    for i in range(n):
        for j in range(i + 1, n):
            r2 = 0.0
            for k in range(d):
                diff = x[i, k] - x[j, k]
                r2 += diff * diff
            if r2 >= eps2:
                continue
            u = 1.0 - r2 / eps2
            c = scale * np.exp(-1.0 / u) / (u * u) * (a[i] + a[j])
            for k in range(d):
                g = c * (x[i, k] - x[j, k])
                out[i, k] += g
                out[j, k] -= g
    return out


def porous_rhs(ensemble, obj, params, moll, stats=None):
    """
    Particle velocities

        v_i = -lam (X_i - m) H + sigma/N sum_j grad phi_eps(X_i - X_j) (|X_j - m|^2p + |X_i - m|^2p)

    where ``H`` is the smoothed Heaviside gate when ``params.heaviside_eps > 0``
    and 1 otherwise.
    """
    if stats is None:
        stats = weighted_stats(ensemble, obj, params.alpha)
    x = ensemble.positions
    n = x.shape[0]
    dev = x - stats.m_f
    drift = -params.lam * dev
    if params.heaviside_eps > 0:
        drift = drift * heaviside(obj(x) - obj(stats.m_f), params.heaviside_eps)[:, None]
    a = np.sum(dev**2, axis=1) ** params.p_exponent
    interaction = _pair_sum(x, a, moll.eps, moll.z_norm) * (params.sigma / n)
    v = drift + interaction
    if not np.all(np.isfinite(v)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(v), axis=1))[0])
        raise SolverError("non-finite velocity at particle %d" % bad, index=bad)
    return v


def porous_step(ensemble, obj, params, moll, stats=None):
    """Explicit Euler step on :func:`porous_rhs`."""
    v = porous_rhs(ensemble, obj, params, moll, stats=stats)
    x_new = ensemble.positions + params.dt * v
    if not np.all(np.isfinite(x_new)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(x_new), axis=1))[0])
        raise SolverError("non-finite state at particle %d" % bad, index=bad)
    return Ensemble(x_new)


def porous_run(initial, obj, params, moll=None, record_every=1):
    if moll is None:
        moll = Mollifier(params.mollifier_eps, initial.dim)

    def advance(state, stats):
        return porous_step(state, obj, params, moll, stats=stats)

    return iterate(initial, obj, params, advance, record_every)
