"""
One-dimensional mean-field solver working on the quantile function
(pseudo-inverse distribution) ``chi(eta)`` on a uniform grid over ``[0, 1]``.

Each time step solves the implicit finite-difference system

    (chi_k' - chi_k) / tau = -h^(p-1) (F_{k+1/2} - F_{k-1/2}) + lam (m - chi_k')

with interface fluxes ``F_{k+1/2} = kappa(chi_{k+1}') / (chi_{k+1}' - chi_k')^p``,
``kappa(x) = sigma^2/2 (x - m)^2`` and ``m`` the weighted mean of the previous
level. The outer fluxes at ``eta = 0`` and ``eta = 1`` are dropped, and a flux
whose gap is below ``gap_floor`` is set to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import SolverError
from .measure import w2_grid_to_dirac
from .series import SeriesRecorder

__all__ = [
    "QuantileGrid",
    "ChiSolverParams",
    "chi_from_uniform",
    "m_f_of_chi",
    "weight_norm_of_chi",
    "grid_mean",
    "grid_variance",
    "l2_norm",
    "implicit_chi_step",
    "chi_run",
    "boundary_velocity",
    "cdf",
]

MONOTONE_TOL = 1e-10


class QuantileGrid:
    """Nondecreasing values of ``chi`` at the nodes ``eta_k = k / (K - 1)``."""

    __slots__ = ("_values",)

    def __init__(self, values):
        v = np.array(values, dtype=float).reshape(-1)
        if v.size < 2:
            raise ValueError("a quantile grid needs at least two nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("quantile grid values must be finite")
        steps = np.diff(v)
        if np.any(steps < -MONOTONE_TOL):
            k = int(np.argmin(steps))
            raise ValueError("quantile grid is decreasing between nodes %d and %d (%.3g)" % (k, k + 1, steps[k]))
        v.setflags(write=False)
        self._values = v

    @property
    def values(self):
        return self._values

    @property
    def size(self):
        return self._values.size

    @property
    def spacing(self):
        return 1.0 / (self._values.size - 1)

    @property
    def nodes(self):
        return np.linspace(0.0, 1.0, self._values.size)

    @property
    def width(self):
        return float(self._values[-1] - self._values[0])

    def __len__(self):
        return self.size

    def __repr__(self):
        return "QuantileGrid(K=%d, support=[%g, %g])" % (self.size, self._values[0], self._values[-1])


@dataclass(frozen=True)
class ChiSolverParams:
    lam: float = 1.0
    sigma: float = 0.8
    alpha: float = 30.0
    p_exponent: float = 1.0
    dt: float = 2.5e-3
    tol: float = 1e-6
    gap_floor: float = 1e-6
    max_newton: int = 100
    newton_tol: float = 1e-13
    max_steps: int = 100000

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive, got %s" % self.lam)
        if not self.sigma >= 0:
            raise ValueError("sigma must be nonnegative, got %s" % self.sigma)
        if not self.alpha > 0:
            raise ValueError("alpha must be positive, got %s" % self.alpha)
        if not self.p_exponent >= 1:
            raise ValueError("p_exponent must be >= 1, got %s" % self.p_exponent)
        if not self.dt > 0:
            raise ValueError("dt must be positive, got %s" % self.dt)
        if not self.tol > 0:
            raise ValueError("tol must be positive, got %s" % self.tol)
        if not self.gap_floor > 0:
            raise ValueError("gap_floor must be positive, got %s" % self.gap_floor)
        if int(self.max_newton) < 1:
            raise ValueError("max_newton must be a positive integer")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if int(self.max_steps) < 0:
            raise ValueError("max_steps must be nonnegative")


def chi_from_uniform(a, b, K=200):
    """Quantile function of Uniform[a, b] sampled on ``K`` nodes."""
    if not a < b:
        raise ValueError("need a < b, got a=%s, b=%s" % (a, b))
    if int(K) < 2:
        raise ValueError("K must be at least 2")
    eta = np.linspace(0.0, 1.0, int(K))
    return QuantileGrid(a + (b - a) * eta)


def _costs(grid, obj):
    if obj.dim != 1:
        raise ValueError("the quantile solver needs a one-dimensional objective")
    c = obj(grid.values[:, None])
    if not np.all(np.isfinite(c)):
        raise FloatingPointError("non-finite objective value at node %d" % int(np.flatnonzero(~np.isfinite(c))[0]))
    return c


def _weighted(grid, obj, alpha):
    c = _costs(grid, obj)
    best = int(np.argmin(c))
    w = np.exp(-alpha * (c - c[best]))
    h = grid.spacing
    total = np.trapezoid(w, dx=h)
    ref = grid.values[best]
    m = ref + np.trapezoid(w * (grid.values - ref), dx=h) / total
    # trapezoid weights are positive, so m stays inside the support
    m = float(np.clip(m, grid.values[0], grid.values[-1]))
    return m, -alpha * c[best] + np.log(total)


def m_f_of_chi(grid, obj, alpha):
    """Weighted mean ``int chi w d eta / int w d eta`` with ``w = exp(-alpha f(chi))``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive, got %s" % alpha)
    return _weighted(grid, obj, alpha)[0]


def weight_norm_of_chi(grid, obj, alpha):
    """``int exp(-alpha f(chi(eta))) d eta``."""
    return float(np.exp(_weighted(grid, obj, alpha)[1]))


def grid_mean(grid):
    return float(np.trapezoid(grid.values, dx=grid.spacing))


def grid_variance(grid):
    """Half the second central moment, by trapezoid quadrature in ``eta``."""
    # offsets from the first node are exactly zero for a constant grid
    y = grid.values - grid.values[0]
    e = float(np.trapezoid(y, dx=grid.spacing))
    return 0.5 * float(np.trapezoid((y - e) ** 2, dx=grid.spacing))


def l2_norm(values, h):
    """Discrete ``L^2(0, 1)`` norm with weight ``h``."""
    return float(np.sqrt(h * np.sum(np.square(values))))


def _residual(x, x_old, m, active, params, h, with_jacobian, dt=None):
    dt = params.dt if dt is None else dt
    p = params.p_exponent
    c = h ** (p - 1.0)
    half_s2 = 0.5 * params.sigma**2
    g = np.where(active, np.diff(x), 1.0)
    right = x[1:] - m
    kappa = half_s2 * right**2
    flux = np.where(active, kappa / g**p, 0.0)

    res = (x - x_old) / dt + params.lam * (x - m)
    res[:-1] += c * flux
    res[1:] -= c * flux
    if not with_jacobian:
        return res, None

    d_right = np.where(active, 2.0 * half_s2 * right / g**p - p * kappa / g ** (p + 1.0), 0.0)
    d_left = np.where(active, p * kappa / g ** (p + 1.0), 0.0)
    ab = np.zeros((3, x.size))
    ab[1] = 1.0 / dt + params.lam
    ab[1, :-1] += c * d_left
    ab[1, 1:] -= c * d_right
    ab[0, 1:] = c * d_right
    ab[2, :-1] = -c * d_left
    return res, ab


def _apply_update(x, dx, active, scale):
    # Newton in (x_0, log gap) coordinates for flux-carrying gaps, plain
    # coordinates for floored ones; positive gaps stay positive
    gaps = np.diff(x)
    dgaps = np.diff(dx)
    new_gaps = gaps + scale * dgaps
    ratio = dgaps[active] / gaps[active]
    new_gaps[active] = gaps[active] * np.exp(scale * ratio)
    out = np.empty_like(x)
    out[0] = x[0] + scale * dx[0]
    out[1:] = out[0] + np.cumsum(new_gaps)
    return out


def _newton_iterate(x, x_old, m, active, params, h, dt):
    """Damped Newton on the implicit system with time step ``dt``; returns ``(x, converged, residual)``."""
    # overflowing trial points are rejected through their non-finite residual
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        return _newton_loop(x, x_old, m, active, params, h, dt)


def _newton_loop(x, x_old, m, active, params, h, dt):
    res, ab = _residual(x, x_old, m, active, params, h, True, dt)
    res_norm = l2_norm(res, h)
    if res_norm == 0.0:
        return x, True, 0.0
    # non-monotone acceptance: near the consensus point the residual path of
    # the barrier-damped iteration is not monotone, so a trial is accepted
    # unless it blows up relative to the recent history
    history = [res_norm]
    for _ in range(int(params.max_newton)):
        try:
            dx = -solve_banded((1, 1), ab, res)
        except np.linalg.LinAlgError:
            return x, False, res_norm
        if not np.all(np.isfinite(dx)):
            return x, False, res_norm
        gaps = np.diff(x)
        rel = np.abs(np.diff(dx)[active] / gaps[active])
        scale = min(1.0, 2.0 / rel.max()) if rel.size and rel.max() > 0 else 1.0
        ceiling = 10.0 * max(history[-5:])
        while True:
            x_try = _apply_update(x, dx, active, scale)
            res_try, _ = _residual(x_try, x_old, m, active, params, h, False, dt)
            norm_try = l2_norm(res_try, h)
            if (np.isfinite(norm_try) and norm_try <= ceiling) or scale < 1e-10:
                break
            scale *= 0.5
        if not np.isfinite(norm_try):
            return x, False, res_norm
        update = l2_norm(x_try - x, h)
        x = x_try
        res, ab = _residual(x, x_old, m, active, params, h, True, dt)
        res_norm = l2_norm(res, h)
        history.append(res_norm)
        if update <= params.newton_tol * max(1.0, l2_norm(x, h)) or res_norm == 0.0:
            return x, True, res_norm
    return x, False, res_norm


# deepest continuation tried before giving up: first stage solves with dt / 2**6
MAX_CONTINUATION_DEPTH = 6
# a step with no monotone root is split in halves at most this many times
MAX_SUBSTEP_DEPTH = 8


def _newton_solve(x_old, m, params, h, dt):
    """Root of the implicit system for one step of size ``dt``, or ``None``."""
    # fluxes are switched off by the gaps of the previous level; inside the
    # solve every active gap keeps its barrier
    active = np.diff(x_old) >= params.gap_floor
    x, ok, _ = _newton_iterate(x_old.copy(), x_old, m, active, params, h, dt)
    if ok:
        return x
    # continuation in the step size: the root for dt * 2**-j warm-starts the
    # next stage, and the last stage solves the full-step system
    for depth in range(1, MAX_CONTINUATION_DEPTH + 1):
        x = x_old.copy()
        for j in range(depth, -1, -1):
            x, ok, _ = _newton_iterate(x, x_old, m, active, params, h, dt * 2.0**-j)
            if not ok:
                break
        if ok:
            return x
    return None


def _restore_order(x, x_old, gap_floor):
    steps = np.diff(x)
    if not np.any(steps < 0):
        return x
    barrier = np.diff(x_old) >= gap_floor
    crossed = (steps < -MONOTONE_TOL) & barrier
    if np.any(crossed):
        k = int(np.flatnonzero(crossed)[0])
        raise SolverError("monotonicity lost between nodes %d and %d (%.3g)" % (k, k + 1, steps[k]), index=k)
    # nodes joined by a floored gap carry no ordering constraint; the
    # sorted values are the quantile function of the same node masses
    return np.sort(x)


def _advance(x_old, m, params, h, dt, depth):
    x = _newton_solve(x_old, m, params, h, dt)
    if x is not None:
        return _restore_order(x, x_old, params.gap_floor)
    if depth >= MAX_SUBSTEP_DEPTH:
        active = np.diff(x_old) >= params.gap_floor
        _, _, res_norm = _newton_iterate(x_old.copy(), x_old, m, active, params, h, dt)
        raise SolverError(
            "implicit solve did not converge in %d iterations (residual %.3g); reduce dt"
            % (params.max_newton, res_norm),
            residual=res_norm,
        )
    half = _advance(x_old, m, params, h, 0.5 * dt, depth + 1)
    return _advance(half, m, params, h, 0.5 * dt, depth + 1)


def implicit_chi_step(grid, obj, params, m=None):
    """
    Advance the quantile grid by one implicit time step.

    The nonlinear system is tridiagonal and is solved by damped Newton
    iteration; the damping keeps every flux-carrying gap positive. Nodes
    that cross over a floored gap are re-sorted. If the system has no
    monotone root for the full step, the step is taken as two implicit
    half steps with the same weighted mean ``m`` (recursively).
    """
    if m is None:
        m = m_f_of_chi(grid, obj, params.alpha)
    x_old = np.array(grid.values, dtype=float)
    return QuantileGrid(_advance(x_old, m, params, grid.spacing, params.dt, 0))


def _record(recorder, step, grid, obj, alpha):
    m, log_norm = _weighted(grid, obj, alpha)
    w2 = np.nan
    if obj.x_star is not None:
        w2 = w2_grid_to_dirac(grid, obj.x_star[0])
    recorder.add(step, grid_variance(grid), grid_mean(grid), m, np.exp(log_norm), w2, grid.width)
    return m


def chi_run(grid, obj, params, record_every=1, keep_snapshots=False):
    """
    Step until ``||chi^{n+1} - chi^n||_{L^2(0,1)} < tol`` or ``max_steps``.

    With ``keep_snapshots`` the recorded grids are attached to the returned
    series as ``series.snapshots``, a list of ``(step, QuantileGrid)``.
    """
    if int(record_every) < 1:
        raise ValueError("record_every must be a positive integer")
    recorder = SeriesRecorder(dt=params.dt)
    snapshots = []
    state = grid
    m = _record(recorder, 0, state, obj, params.alpha)
    if keep_snapshots:
        snapshots.append((0, state))
    reason = "max_steps"
    n = 0
    while n < params.max_steps:
        try:
            new = implicit_chi_step(state, obj, params, m=m)
        except SolverError as exc:
            raise SolverError("step %d: %s" % (n + 1, exc), step=n + 1, index=exc.index, residual=exc.residual) from exc
        n += 1
        change = l2_norm(new.values - state.values, state.spacing)
        state = new
        stop = change < params.tol
        if stop or n % record_every == 0 or n == params.max_steps:
            m = _record(recorder, n, state, obj, params.alpha)
            if keep_snapshots:
                snapshots.append((n, state))
        else:
            m = m_f_of_chi(state, obj, params.alpha)
        if stop:
            reason = "stop_tol"
            break
    series = recorder.finish(reason, n)
    series.snapshots = snapshots if keep_snapshots else None
    return state, series


def boundary_velocity(grid, obj, params):
    """
    Endpoint velocities ``-2 lam (chi - m)`` at ``eta = 0`` and ``eta = 1``,
    valid for ``p > 1`` where the support is compact.
    """
    if not params.p_exponent > 1:
        raise ValueError("the boundary law needs p_exponent > 1, got %s" % params.p_exponent)
    m = m_f_of_chi(grid, obj, params.alpha)
    v = grid.values
    return -2.0 * params.lam * (v[0] - m), -2.0 * params.lam * (v[-1] - m)


def cdf(grid, x):
    """Distribution function recovered from the quantile grid by inversion."""
    v = grid.values
    return np.interp(np.asarray(x, dtype=float), v, grid.nodes, left=0.0, right=1.0)
