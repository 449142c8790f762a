"""
Stochastic consensus-based optimization: Euler-Maruyama steps for the
interacting particle system and its Heaviside-gated variant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import SolverError
from .measure import Ensemble, mean, variance, w2_to_dirac, weighted_stats
from .series import SeriesRecorder

__all__ = ["CboParams", "RngSpec", "heaviside", "em_step", "heaviside_em_step", "run"]


@dataclass(frozen=True)
class CboParams:
    """
    Parameters of the particle scheme.

    ``heaviside_eps = 0`` selects the plain scheme; a positive value selects
    the gated scheme with that smoothing width.
    """

    lam: float = 1.0
    sigma: float = 0.8
    alpha: float = 30.0
    dt: float = 2.5e-3
    heaviside_eps: float = 0.0
    max_steps: int = 4000
    stop_tol: float = 1e-8

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive, got %s" % self.lam)
        if not self.sigma >= 0:
            raise ValueError("sigma must be nonnegative, got %s" % self.sigma)
        if not self.alpha > 0:
            raise ValueError("alpha must be positive, got %s" % self.alpha)
        if not self.dt > 0:
            raise ValueError("dt must be positive, got %s" % self.dt)
        if not self.heaviside_eps >= 0:
            raise ValueError("heaviside_eps must be nonnegative, got %s" % self.heaviside_eps)
        if int(self.max_steps) < 0:
            raise ValueError("max_steps must be nonnegative, got %s" % self.max_steps)
        if not self.stop_tol >= 0:
            raise ValueError("stop_tol must be nonnegative, got %s" % self.stop_tol)


@dataclass(frozen=True)
class RngSpec:
    """Seed plus replicate stream; equal specs give equal noise sequences."""

    seed: int = 0
    stream_id: int = 0

    def generator(self):
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))


def heaviside(x, eps):
    """Smoothed step ``(1 + erf(x / eps)) / 2``."""
    return 0.5 * (1.0 + erf(np.asarray(x, dtype=float) / eps))


def _as_generator(rng):
    if isinstance(rng, RngSpec):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("rng must be an RngSpec or numpy Generator")


def _finish_step(x_new):
    if not np.all(np.isfinite(x_new)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(x_new), axis=1))[0])
        raise SolverError("non-finite state at particle %d; dt is likely too large" % bad, index=bad)
    return Ensemble(x_new)


def em_step(ensemble, obj, params, rng, stats=None):
    """
    One explicit step of ``dX = -lam (X - m) dt + sigma |X - m| dW``.

    The noise is isotropic: one scalar amplitude per particle times a
    standard normal ``d``-vector.
    """
    rng = _as_generator(rng)
    if stats is None:
        stats = weighted_stats(ensemble, obj, params.alpha)
    x = ensemble.positions
    dev = x - stats.m_f
    amp = params.sigma * np.sqrt(np.sum(dev**2, axis=1, keepdims=True))
    noise = rng.standard_normal(x.shape)
    x_new = x - params.lam * params.dt * dev + amp * np.sqrt(params.dt) * noise
    return _finish_step(x_new)


def heaviside_em_step(ensemble, obj, params, rng, stats=None):
    """
    Gated step: drift times ``H_eps(f(X) - f(m))``, diffusion ``sqrt(2) sigma |X - m|``.
    """
    if not params.heaviside_eps > 0:
        raise ValueError("heaviside_em_step needs heaviside_eps > 0")
    rng = _as_generator(rng)
    if stats is None:
        stats = weighted_stats(ensemble, obj, params.alpha)
    x = ensemble.positions
    dev = x - stats.m_f
    gate = heaviside(obj(x) - obj(stats.m_f), params.heaviside_eps)[:, None]
    amp = np.sqrt(2.0) * params.sigma * np.sqrt(np.sum(dev**2, axis=1, keepdims=True))
    noise = rng.standard_normal(x.shape)
    x_new = x - params.lam * params.dt * gate * dev + amp * np.sqrt(params.dt) * noise
    return _finish_step(x_new)


def record_snapshot(recorder, step, ensemble, obj, stats):
    w2 = w2_to_dirac(ensemble, obj.x_star) if obj.x_star is not None else np.nan
    recorder.add(step, variance(ensemble), mean(ensemble), stats.m_f, stats.weight_norm, w2)


def iterate(initial, obj, params, advance, record_every=1):
    """
    Drive ``advance(ensemble, stats) -> ensemble`` until the variance drops
    below ``params.stop_tol`` or ``params.max_steps`` is reached.
    """
    if int(record_every) < 1:
        raise ValueError("record_every must be a positive integer")
    if initial.dim != obj.dim:
        raise ValueError("dimension mismatch: objective dim %d, ensemble dim %d" % (obj.dim, initial.dim))
    recorder = SeriesRecorder(dt=params.dt)
    state = initial
    stats = weighted_stats(state, obj, params.alpha)
    record_snapshot(recorder, 0, state, obj, stats)
    reason = "max_steps"
    n = 0
    while n < params.max_steps:
        try:
            state = advance(state, stats)
            # an overflowing state shows up first as a non-finite cost
            with np.errstate(over="ignore", invalid="ignore"):
                stats = weighted_stats(state, obj, params.alpha)
        except FloatingPointError as exc:
            raise SolverError("step %d: %s" % (n + 1, exc), step=n + 1, index=getattr(exc, "index", None)) from exc
        n += 1
        stop = variance(state) < params.stop_tol
        if stop or n % record_every == 0 or n == params.max_steps:
            record_snapshot(recorder, n, state, obj, stats)
        if stop:
            reason = "stop_tol"
            break
    return state, recorder.finish(reason, n)


def run(initial, obj, params, rng, record_every=1):
    """
    Run the particle scheme; the gated variant is used when
    ``params.heaviside_eps > 0``.

    Returns
    -------
    final : Ensemble
    series : DiagnosticsSeries
        ``series.terminated_by`` is ``"stop_tol"`` or ``"max_steps"``.
    """
    gen = _as_generator(rng)
    step = heaviside_em_step if params.heaviside_eps > 0 else em_step

    def advance(state, stats):
        return step(state, obj, params, gen, stats=stats)

    return iterate(initial, obj, params, advance, record_every)
