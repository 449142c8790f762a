"""
Benchmark cost functions together with the analytic constants the
concentration and moment estimates are stated in terms of.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = ["Objective", "make_ackley", "make_quadratic", "evaluate_batch", "from_config"]


@dataclass(frozen=True)
class Objective:
    """
    Vectorized cost function with optional assumption constants.

    Parameters
    ----------
    func : callable
        Maps an ``(n, dim)`` array to an ``(n,)`` array of costs. The shift is
        *not* applied by ``func``; it is added by :meth:`__call__`.
    dim : int
        Dimension of the search space.
    shift : float
        Additive offset applied to every evaluation.
    x_star, f_min, f_lower, f_upper
        Minimizer, minimum value, infimum and supremum (shift included).
    lipschitz, growth_upper, growth_lower, growth_radius, hessian_bound,
    laplacian_c0, laplacian_c1
        Constants ``L_f, c_u, c_l, M, c_f, c_0, c_1``. ``None`` means unknown;
        verifiers that need a missing constant report a skipped status.
    """

    func: Callable[[np.ndarray], np.ndarray]
    dim: int
    shift: float = 0.0
    name: str = "custom"
    x_star: Optional[np.ndarray] = None
    f_min: Optional[float] = None
    f_lower: Optional[float] = None
    f_upper: float = np.inf
    lipschitz: Optional[float] = None
    growth_upper: Optional[float] = None
    growth_lower: Optional[float] = None
    growth_radius: Optional[float] = None
    hessian_bound: Optional[float] = None
    laplacian_c0: Optional[float] = None
    laplacian_c1: Optional[float] = None
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("dim must be a positive integer, got %s" % self.dim)
        if self.x_star is not None:
            x = np.asarray(self.x_star, dtype=float).reshape(self.dim)
            object.__setattr__(self, "x_star", x)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(self(x[None, :])[0])
        if x.shape[1] != self.dim:
            raise ValueError(
                "dimension mismatch: objective has dim %d, points have dim %d" % (self.dim, x.shape[1])
            )
        if x.shape[0] == 0:
            return np.zeros(0)
        return np.asarray(self.func(x), dtype=float) + self.shift


def _ackley(x, a=20.0, b=0.2, c=2.0 * np.pi):
    rms = np.sqrt(np.mean(x**2, axis=1))
    # grouped so that both terms are exactly 0 at the origin
    return a * (1.0 - np.exp(-b * rms)) + (np.e - np.exp(np.mean(np.cos(c * x), axis=1)))


def make_ackley(dim=1, shift=1.0):
    """
    Ackley benchmark ``-20 exp(-0.2 rms(x)) - exp(mean cos(2 pi x)) + 20 + e``
    plus ``shift``. Global minimum ``shift`` at the origin.

    The function is bounded with ``sup f - inf f <= 20 + e - 1/e``, which
    gives ``c_u``. It has a kink at the origin, so the smoothness constants
    and the quadratic-growth constants are left unknown.
    """
    if int(dim) < 1:
        raise ValueError("dim must be a positive integer, got %s" % dim)
    dim = int(dim)
    oscillation = 20.0 + np.e - np.exp(-1.0)
    return Objective(
        func=_ackley,
        dim=dim,
        shift=float(shift),
        name="ackley",
        x_star=np.zeros(dim),
        f_min=float(shift),
        f_lower=float(shift),
        f_upper=float(shift) + oscillation,
        growth_upper=oscillation,
    )


def _squared_norm(x):
    return np.sum(x**2, axis=1)


def make_quadratic(dim=1, shift=1.0):
    """``|x|^2 + shift``; every constant is known exactly."""
    if int(dim) < 1:
        raise ValueError("dim must be a positive integer, got %s" % dim)
    if not shift > 0:
        raise ValueError("shift must be > 0 so that inf f > 0, got %s" % shift)
    dim = int(dim)
    return Objective(
        func=_squared_norm,
        dim=dim,
        shift=float(shift),
        name="quadratic",
        x_star=np.zeros(dim),
        f_min=float(shift),
        f_lower=float(shift),
        lipschitz=2.0,
        growth_upper=1.0,
        growth_lower=1.0,
        growth_radius=1.0,
        hessian_bound=2.0,
        laplacian_c0=2.0 * dim,
        laplacian_c1=0.0,
    )


_FACTORIES = {"ackley": make_ackley, "quadratic": make_quadratic}


def from_config(name, dim=1, shift=1.0):
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise ValueError("unknown objective %r (choose from %s)" % (name, ", ".join(sorted(_FACTORIES))))
    return factory(dim=dim, shift=shift)


def evaluate_batch(obj, ensemble):
    """Evaluate ``obj`` at every particle of ``ensemble``."""
    positions = getattr(ensemble, "positions", ensemble)
    positions = np.asarray(positions, dtype=float)
    if positions.ndim != 2:
        raise ValueError("expected an (N, d) array of positions")
    if positions.shape[1] != obj.dim:
        raise ValueError(
            "dimension mismatch: objective has dim %d, ensemble has dim %d" % (obj.dim, positions.shape[1])
        )
    return obj(positions)
