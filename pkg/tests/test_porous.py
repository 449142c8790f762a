import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import dblquad, quad

from cbo import (
    CboParams,
    Ensemble,
    Mollifier,
    PorousParams,
    em_step,
    make_ackley,
    make_quadratic,
    porous_rhs,
    porous_run,
    porous_step,
    weighted_stats,
)
from cbo.porous import bump_normalization

import frozen


def test_params_validation():
    with pytest.raises(ValueError):
        PorousParams(p_exponent=0.5)
    with pytest.raises(ValueError):
        PorousParams(mollifier_eps=0.0)
    with pytest.raises(ValueError):
        Mollifier(0.0, 1)
    with pytest.raises(ValueError):
        Mollifier(0.1, 0)


@pytest.mark.parametrize("dim", [1, 2])
def test_normalization_constant(dim):
    assert bump_normalization(dim) == pytest.approx(frozen.BUMP_MASS[dim], rel=1e-10)


def test_support_and_symmetry():
    m = Mollifier(0.3, 2)
    assert m.value(np.array([0.3, 0.0])) == 0.0
    assert m.value(np.array([0.0, -0.5])) == 0.0
    assert np.array_equal(m.grad(np.zeros(2)), np.zeros(2))
    assert np.array_equal(m.grad(np.array([0.31, 0.0])), np.zeros(2))
    with pytest.raises(ValueError):
        m.value(np.zeros(3))


@pytest.mark.parametrize("eps", [0.1, 0.5, 1.0])
def test_gradient_matches_central_differences(eps):
    m = Mollifier(eps, 2)
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.uniform(-0.8 * eps, 0.8 * eps, 2) / np.sqrt(2)
        h = 1e-6 * eps
        fd = np.array([(m.value(x + h * e) - m.value(x - h * e)) / (2 * h) for e in np.eye(2)])
        np.testing.assert_allclose(m.grad(x), fd, rtol=1e-6, atol=1e-8 / eps**3)


def _reference_rhs(x, m, params, moll):
    # direct double loop over ordered pairs
    n = len(x)
    a = np.sum((x - m) ** 2, axis=1) ** params.p_exponent
    out = -params.lam * (x - m)
    for i in range(n):
        acc = np.zeros(x.shape[1])
        for j in range(n):
            acc += moll.grad(x[i] - x[j]) * (a[i] + a[j])
        out[i] += params.sigma / n * acc
    return out


@pytest.mark.parametrize("dim,p", [(1, 1.0), (1, 2.0), (2, 2.0)])
def test_pair_sum_matches_direct_double_loop(dim, p):
    rng = np.random.default_rng(dim)
    x = rng.uniform(-0.4, 0.4, (25, dim))
    e = Ensemble(x)
    f = make_ackley(dim)
    params = PorousParams(p_exponent=p, mollifier_eps=0.3)
    moll = Mollifier(0.3, dim)
    m = weighted_stats(e, f, params.alpha).m_f
    np.testing.assert_allclose(porous_rhs(e, f, params, moll), _reference_rhs(x, m, params, moll), rtol=1e-11, atol=1e-13)


def test_coincident_particles_have_zero_velocity():
    e = Ensemble(np.tile([[0.4, -0.2]], (7, 1)))
    v = porous_rhs(e, make_ackley(2), PorousParams(), Mollifier(0.1, 2))
    assert np.array_equal(v, np.zeros_like(v))
    assert np.array_equal(porous_step(e, make_ackley(2), PorousParams(), Mollifier(0.1, 2)).positions, e.positions)


def test_separated_particles_feel_only_the_drift():
    e = Ensemble([-1.0, 0.0, 1.0, 2.5])
    f = make_quadratic(1)
    params = PorousParams(mollifier_eps=0.5, alpha=1.0)
    m = weighted_stats(e, f, 1.0).m_f
    assert np.array_equal(porous_rhs(e, f, params, Mollifier(0.5, 1)), -params.lam * (e.positions - m))


def test_noise_free_limit_matches_the_plain_drift():
    # sigma = 0 removes the interaction; the step is the sigma = 0 particle step
    e = Ensemble(np.linspace(-1, 1, 11))
    f = make_ackley(1)
    a = porous_step(e, f, PorousParams(sigma=0.0), Mollifier(0.1, 1))
    b = em_step(e, f, CboParams(sigma=0.0), np.random.default_rng(0))
    assert np.array_equal(a.positions, b.positions)


def test_symmetric_pair_stays_symmetric():
    e = Ensemble([-0.03, 0.03])
    params = PorousParams(max_steps=300, stop_tol=0.0, mollifier_eps=0.1)
    state = e
    moll = Mollifier(0.1, 1)
    for _ in range(params.max_steps):
        state = porous_step(state, make_quadratic(1), params, moll)
        x = state.positions[:, 0]
        assert abs(x[0] + x[1]) <= 1e-12


@given(half=st.lists(st.floats(0.01, 1.0), min_size=1, max_size=8, unique=True), p=st.sampled_from([1.0, 2.0]))
def test_symmetric_ensembles_stay_symmetric(half, p):
    x = np.concatenate([np.array(half), -np.array(half)])
    state = Ensemble(x)
    params = PorousParams(p_exponent=p, mollifier_eps=0.2, alpha=5.0)
    moll = Mollifier(0.2, 1)
    for _ in range(50):
        state = porous_step(state, make_quadratic(1), params, moll)
        s = np.sort(state.positions[:, 0])
        assert np.max(np.abs(s + s[::-1])) <= 1e-12


def test_runs_are_deterministic():
    e = Ensemble(np.random.default_rng(2).uniform(-3, 3, (60, 1)))
    params = PorousParams(max_steps=100, stop_tol=0.0)
    a, sa = porous_run(e, make_ackley(1), params)
    b, sb = porous_run(e, make_ackley(1), params)
    assert np.array_equal(a.positions, b.positions) and np.array_equal(sa.w2, sb.w2)


def test_spread_around_the_mean_shrinks_on_the_quadratic():
    x0 = np.random.default_rng(0).uniform(-3, 3, (500, 1))
    params = PorousParams(max_steps=2000, stop_tol=0.0)
    moll = Mollifier(params.mollifier_eps, 1)
    f = make_quadratic(1)
    state = Ensemble(x0)
    spread = []
    for _ in range(params.max_steps):
        m = weighted_stats(state, f, params.alpha).m_f
        spread.append(np.max(np.abs(state.positions - m)))
        state = porous_step(state, f, params, moll)
    tail = np.array(spread[params.max_steps // 10 :])
    assert np.all(np.diff(tail) <= 0)


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("eps", [0.1, 0.5, 1.0])
def test_mollifier_has_unit_mass(dim, eps):
    m = Mollifier(eps, dim)
    if dim == 1:
        mass, _ = quad(lambda x: m.value(np.array([x])), -eps, eps, epsabs=1e-13, limit=200)
    else:
        mass, _ = dblquad(
            lambda y, x: m.value(np.array([x, y])),
            -eps,
            eps,
            lambda x: -np.sqrt(max(eps * eps - x * x, 0.0)),
            lambda x: np.sqrt(max(eps * eps - x * x, 0.0)),
            epsabs=1e-12,
        )
    assert abs(mass - 1.0) <= 1e-6
