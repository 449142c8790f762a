"""
Numerical checks of the concentration estimate, decay-rate fits, Laplace
sweeps and the moment/stability inequalities that the analysis relies on.

Every check returns a :class:`Verdict` instead of raising on failure, so a
caller can log the worst observed ratio. Checks that need an assumption
constant the objective does not carry report ``status == "skipped"``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .measure import Ensemble, laplace_functional, second_moment, variance, weighted_stats
from .pseudo_inverse import QuantileGrid, _costs, _weighted, grid_variance

__all__ = [
    "ConditionReport",
    "DecayFit",
    "Verdict",
    "check_concentration_conditions",
    "fit_decay_rate",
    "laplace_sweep",
    "verify_variance_decay",
    "verify_jensen_bound",
    "verify_moment_bound",
    "stability_ratio",
    "moment_growth_constant",
    "verify_moment_growth",
    "alpha_trend",
    "VALUE_FLOOR",
]

# decay fits stop at the first sample below this level; log of round-off
# noise would dominate the regression
VALUE_FLOOR = 1e-14

# slack for inequalities that can hold with equality up to rounding
_ROUNDING = 1e-12

_LOG_TINY = np.log(np.finfo(float).tiny)


def _key_value_block(obj):
    lines = []
    for f in fields(obj):
        value = getattr(obj, f.name)
        if isinstance(value, tuple):
            value = ",".join("%.17g" % v for v in value)
        elif isinstance(value, float):
            value = "%.17g" % value
        elif value is None:
            value = "unknown"
        else:
            value = str(value).lower() if isinstance(value, bool) else str(value)
        lines.append("%s=%s" % (f.name, value))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Verdict:
    """
    Outcome of an inequality check.

    ``worst`` is the largest observed ratio of left- to right-hand side, so
    values at most 1 (or ``1 + slack``) mean the inequality held. Truthiness
    is ``status == "pass"``.
    """

    status: str
    worst: float = float("nan")
    detail: str = ""

    @property
    def passed(self):
        return self.status == "pass"

    @property
    def skipped(self):
        return self.status == "skipped"

    def __bool__(self):
        return self.passed


@dataclass(frozen=True)
class ConditionReport:
    """
    Quantities entering the exponential variance decay ``V(t) <= V(0) exp(-q t)``.

    ``b1`` and ``cond_b1`` are ``None`` when the objective lacks ``c_0`` or
    ``c_f``. ``b1_underflow`` marks a positive ``b1`` below the smallest
    normal double, reported as 0. ``alpha_ge_c1`` is ``None`` when ``c_1``
    is unknown.
    """

    b0: float
    K: float
    b1: Optional[float]
    q: float
    cond_b1: Optional[bool]
    cond_param: bool
    cond_strong: bool
    metadata_complete: bool
    b1_underflow: bool
    alpha_ge_c1: Optional[bool]
    param_margin: float
    strong_margin: float
    lam: float
    sigma: float
    alpha: float
    dim: int
    f_lower: float

    @property
    def all_conditions(self):
        return bool(self.cond_b1) and self.cond_param and self.alpha_ge_c1 is not False

    def to_text(self):
        return _key_value_block(self)


@dataclass(frozen=True)
class DecayFit:
    rate_hat: float
    intercept: float
    r_squared: float
    window: tuple
    samples: int

    def to_text(self):
        return _key_value_block(self)


def _measure_terms(measure, obj, alpha):
    """``(log b0, V, d, costs)`` for an ensemble or a quantile grid."""
    if isinstance(measure, QuantileGrid):
        _, log_b0 = _weighted(measure, obj, alpha)
        return float(log_b0), grid_variance(measure), 1, _costs(measure, obj)
    if isinstance(measure, Ensemble):
        stats = weighted_stats(measure, obj, alpha)
        return stats.log_weight_norm, variance(measure), measure.dim, obj(measure.positions)
    raise TypeError("expected an Ensemble or QuantileGrid, got %s" % type(measure).__name__)


def check_concentration_conditions(initial, obj, lam, sigma, alpha):
    """
    Evaluate ``b0``, ``K``, ``b1``, ``q`` and the sufficient conditions for
    concentration on the initial measure.

    Parameters
    ----------
    initial : Ensemble or QuantileGrid
    obj : Objective
        Must carry ``f_lower``; ``b1`` also needs ``laplacian_c0`` and
        ``hessian_bound``.
    lam, sigma, alpha : float

    Raises
    ------
    ValueError
        If ``obj.f_lower`` is unknown, since ``q`` is then undefined.
    """
    if obj.f_lower is None:
        raise ValueError("objective %r has no lower bound; the decay rate is undefined" % obj.name)
    if not (lam > 0 and sigma >= 0 and alpha > 0):
        raise ValueError("need lam > 0, sigma >= 0, alpha > 0")
    log_b0, K, d, _ = _measure_terms(initial, obj, alpha)
    b0 = float(np.exp(log_b0))
    f_low = float(obj.f_lower)
    s2 = float(sigma) ** 2
    # e^{-alpha f_lower} / b0 >= 1 can be astronomically large; keep it in logs
    with np.errstate(over="ignore"):
        ratio = float(np.exp(-alpha * f_low - log_b0))
        q = 2.0 * (lam - d * s2 * ratio) if s2 > 0 else 2.0 * lam
        gate = float(np.exp(-alpha * f_low))
        param_margin = 2.0 * lam * b0**2 - K - 2.0 * d * s2 * b0 * gate
        strong_margin = 2.0 * lam * b0**2 - K - 2.0 * d * s2 * b0

    c0, cf, c1 = obj.laplacian_c0, obj.hessian_bound, obj.laplacian_c1
    complete = c0 is not None and cf is not None
    b1 = None
    cond_b1 = None
    underflow = False
    if complete:
        inner = c0 * s2 + 2.0 * lam * cf
        if inner > 0:
            log_b1 = np.log(2.0 * alpha) - 2.0 * alpha * f_low + np.log(inner)
            if log_b1 < _LOG_TINY:
                b1, underflow = 0.0, True
            else:
                b1 = float(np.exp(log_b1))
        else:
            b1 = 0.0
        cond_b1 = b1 < 0.75
    return ConditionReport(
        b0=b0,
        K=float(K),
        b1=b1,
        q=float(q),
        cond_b1=cond_b1,
        cond_param=bool(param_margin >= 0),
        cond_strong=bool(strong_margin >= 0),
        metadata_complete=complete,
        b1_underflow=underflow,
        alpha_ge_c1=None if c1 is None else bool(alpha >= c1),
        param_margin=float(param_margin),
        strong_margin=float(strong_margin),
        lam=float(lam),
        sigma=float(sigma),
        alpha=float(alpha),
        dim=int(d),
        f_lower=f_low,
    )


def fit_decay_rate(series, field="variance", window=None, value_range=None):
    """
    Least-squares line through ``(t, log value)``; ``rate_hat`` is minus the slope.

    Parameters
    ----------
    series : DiagnosticsSeries
    field : {"variance", "w2", "support_width"}
    window : (t_start, t_end), optional
        Inclusive time window. Defaults to the whole series.
    value_range : (low, high), optional
        Keep only samples whose value lies in ``[low, high]``.

    Samples from the first value below ``VALUE_FLOOR`` onward are dropped.

    Raises
    ------
    ValueError
        If a sample in the window is nonpositive or fewer than 3 remain.
    """
    t = np.asarray(series.t, dtype=float)
    y = np.asarray(series.field(field), dtype=float)
    keep = np.isfinite(y)
    if window is not None:
        keep &= (t >= window[0]) & (t <= window[1])
    t, y = t[keep], y[keep]
    if np.any(y <= 0):
        k = int(np.flatnonzero(y <= 0)[0])
        raise ValueError(
            "nonpositive %s at t=%g; consensus is already reached there, shrink the window" % (field, t[k])
        )
    below = np.flatnonzero(y < VALUE_FLOOR)
    if below.size:
        t, y = t[: below[0]], y[: below[0]]
    if value_range is not None:
        sel = (y >= value_range[0]) & (y <= value_range[1])
        t, y = t[sel], y[sel]
    if t.size < 3:
        raise ValueError("need at least 3 positive samples to fit a rate, got %d" % t.size)
    log_y = np.log(y)
    dt = t - t.mean()
    dy = log_y - log_y.mean()
    sxx = float(dt @ dt)
    if sxx == 0:
        raise ValueError("all samples share one time; the rate is undefined")
    slope = float(dt @ dy) / sxx
    intercept = float(log_y.mean() - slope * t.mean())
    ss_tot = float(dy @ dy)
    resid = dy - slope * dt
    # a constant regressand is fit exactly
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(resid @ resid) / ss_tot
    return DecayFit(
        rate_hat=-slope,
        intercept=intercept,
        r_squared=float(np.clip(r2, 0.0, 1.0)),
        window=(float(t[0]), float(t[-1])),
        samples=int(t.size),
    )


def laplace_sweep(measure, obj, alphas):
    """
    Laplace functional ``-(1/alpha) log int exp(-alpha f) d rho`` over a list of ``alpha``.

    Returns
    -------
    list of (alpha, value, gap)
        ``gap = value - min f`` with the minimum taken over the support of
        the measure (particle positions or grid nodes).
    """
    alphas = [float(a) for a in alphas]
    if not alphas or any(a <= 0 for a in alphas):
        raise ValueError("alphas must be a nonempty list of positive numbers")
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be strictly increasing")
    out = []
    for a in alphas:
        if isinstance(measure, QuantileGrid):
            costs = _costs(measure, obj)
            value = float(np.clip(-_weighted(measure, obj, a)[1] / a, costs.min(), costs.max()))
        else:
            costs = obj(measure.positions)
            value = laplace_functional(measure, obj, a)
        out.append((a, value, value - float(costs.min())))
    return out


def verify_variance_decay(series, report, slack=0.0):
    """
    Check ``V(t_k) <= (1 + slack) V(0) exp(-q t_k)`` at every recorded time.

    Raises
    ------
    ValueError
        If the report does not certify the sufficient conditions, since the
        bound is then not claimed.
    """
    if not report.all_conditions:
        raise ValueError("the concentration conditions do not hold for this report; no bound to verify")
    t = np.asarray(series.t, dtype=float)
    v = np.asarray(series.variance, dtype=float)
    bound = v[0] * np.exp(-report.q * t)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(v == 0, 0.0, v / bound)
    worst = float(np.max(ratio))
    k = int(np.argmax(ratio))
    status = "pass" if worst <= 1.0 + slack else "fail"
    return Verdict(status, worst, "worst ratio at t=%.6g" % t[k])


def verify_jensen_bound(ensemble, obj, alpha):
    """
    Check ``exp(-alpha f_lower) / ||w||_1 <= exp(alpha c_u (1 + K))`` with
    ``K`` the empirical second moment. Compared in log form.
    """
    if obj.f_lower is None or obj.growth_upper is None:
        return Verdict("skipped", detail="metadata missing: f_lower and growth_upper are required")
    stats = weighted_stats(ensemble, obj, alpha)
    K = second_moment(ensemble, 1)
    lhs = -alpha * obj.f_lower - stats.log_weight_norm
    rhs = alpha * obj.growth_upper * (1.0 + K)
    worst = lhs / rhs
    ok = lhs <= rhs + _ROUNDING * max(1.0, abs(rhs))
    return Verdict("pass" if ok else "fail", float(worst))


def verify_moment_bound(ensemble, obj, alpha):
    """
    Check ``int |x|^2 d eta_alpha <= b1 + b2 int |x|^2 d rho`` with
    ``b2 = 2 (c_u / c_l)(1 + 1 / (alpha c_l M^2))`` and ``b1 = M^2 + b2``.
    """
    if not alpha >= 1:
        raise ValueError("the moment bound is stated for alpha >= 1, got %s" % alpha)
    c_u, c_l, M = obj.growth_upper, obj.growth_lower, obj.growth_radius
    if c_u is None or c_l is None or M is None:
        return Verdict("skipped", detail="metadata missing: growth_upper, growth_lower and growth_radius are required")
    stats = weighted_stats(ensemble, obj, alpha)
    sq = np.sum(ensemble.positions**2, axis=1)
    lhs = float(stats.normalized_weights @ sq)
    b2 = 2.0 * (c_u / c_l) * (1.0 + 1.0 / (alpha * c_l * M**2))
    rhs = M**2 + b2 + b2 * float(np.mean(sq))
    ok = lhs <= rhs * (1.0 + _ROUNDING)
    return Verdict("pass" if ok else "fail", lhs / rhs)


def _w2_empirical(a, b):
    if a.count != b.count:
        raise ValueError("pairs must share particle counts (%d vs %d)" % (a.count, b.count))
    if a.dim != b.dim:
        raise ValueError("pairs must share dimensions")
    if a.dim == 1:
        xa = np.sort(a.positions[:, 0])
        xb = np.sort(b.positions[:, 0])
        return float(np.sqrt(np.mean((xa - xb) ** 2)))
    # equal weights: an optimal plan is a permutation
    cost = np.sum((a.positions[:, None, :] - b.positions[None, :, :]) ** 2, axis=2)
    rows, cols = linear_sum_assignment(cost)
    return float(np.sqrt(cost[rows, cols].mean()))


def stability_ratio(pairs, obj, alpha):
    """
    Largest ``|m_f[mu] - m_f[nu]| / W2(mu, nu)`` over pairs with ``W2 > 0``.

    Returns NaN when every pair has ``W2 = 0``.
    """
    worst = float("nan")
    for a, b in pairs:
        w2 = _w2_empirical(a, b)
        if w2 == 0:
            continue
        ma = weighted_stats(a, obj, alpha).m_f
        mb = weighted_stats(b, obj, alpha).m_f
        r = float(np.linalg.norm(ma - mb)) / w2
        worst = r if not worst >= r else worst
    return worst


def moment_growth_constant(lam, sigma, dim, n):
    """``b_N = 2 (lam sqrt(N) + 2 d sigma^2 N)``."""
    return 2.0 * (lam * np.sqrt(n) + 2.0 * dim * sigma**2 * n)


def verify_moment_growth(t, moments, lam, sigma, dim, n, slack=0.05):
    """Check ``E|X_t|^2 <= (1 + slack) exp(b_N t) E|X_0|^2`` along a sampled curve."""
    t = np.asarray(t, dtype=float)
    moments = np.asarray(moments, dtype=float)
    b_n = moment_growth_constant(lam, sigma, dim, n)
    with np.errstate(over="ignore"):
        bound = moments[0] * np.exp(b_n * t)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(moments == 0, 0.0, moments / bound)
    worst = float(np.max(ratio))
    return Verdict("pass" if worst <= 1.0 + slack else "fail", worst)


def alpha_trend(alphas, distances, slack=0.1):
    """
    Check that ``distances`` (terminal ``|x~ - x_*|`` per ``alpha``) do not
    increase with ``alpha`` beyond ``slack``: ``d_{k+1} <= (1 + slack) d_k``.
    """
    alphas = np.asarray(alphas, dtype=float)
    d = np.asarray(distances, dtype=float)
    if alphas.shape != d.shape or alphas.size < 2:
        raise ValueError("need matching alpha and distance lists of length >= 2")
    if np.any(np.diff(alphas) <= 0):
        raise ValueError("alphas must be strictly increasing")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(d[:-1] == 0, np.where(d[1:] == 0, 0.0, np.inf), d[1:] / d[:-1])
    worst = float(np.max(ratios))
    return Verdict("pass" if worst <= 1.0 + slack else "fail", worst)
