import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import beta

from cbo import (
    ChiSolverParams,
    Objective,
    QuantileGrid,
    SolverError,
    boundary_velocity,
    chi_from_uniform,
    chi_run,
    implicit_chi_step,
    m_f_of_chi,
    make_ackley,
    make_quadratic,
)
from cbo.pseudo_inverse import _restore_order, cdf, grid_mean, grid_variance

import frozen
import oracles

LINEAR = Objective(func=lambda x: x[:, 0], dim=1, name="linear")


def beta_grid(a, b, K=200, lo=-3.0, hi=3.0):
    # density vanishing at both ends, so the support edges move with finite speed
    return QuantileGrid(lo + (hi - lo) * beta.ppf(np.linspace(0, 1, K), a, b))


def test_grid_validation():
    assert chi_from_uniform(0.0, 1.0, 3).values.tolist() == [0.0, 0.5, 1.0]
    with pytest.raises(ValueError):
        chi_from_uniform(1.0, 1.0)
    with pytest.raises(ValueError):
        chi_from_uniform(0.0, 1.0, K=1)
    with pytest.raises(ValueError, match="decreasing"):
        QuantileGrid([0.0, 1.0, 0.5])
    with pytest.raises(ValueError):
        QuantileGrid([0.0, np.inf])
    g = QuantileGrid([0.0, 1.0 - 1e-12, 1.0 - 2e-12])
    assert g.size == 3 and g.spacing == 0.5


def test_params_validation():
    for bad in ({"p_exponent": 0.9}, {"tol": 0}, {"gap_floor": 0}, {"dt": 0}, {"lam": 0}, {"max_newton": 0}):
        with pytest.raises(ValueError):
            ChiSolverParams(**bad)


def test_weighted_mean_examples():
    assert m_f_of_chi(QuantileGrid(np.full(9, 0.7)), make_ackley(1), 30.0) == 0.7
    sym = chi_from_uniform(-2.0, 2.0, 101)
    assert abs(m_f_of_chi(sym, make_quadratic(1), 3.0)) <= 1e-12
    K = 201
    h = 1.0 / (K - 1)
    err = abs(m_f_of_chi(chi_from_uniform(0.0, 1.0, K), LINEAR, 1.0) - frozen.TILTED_MEAN)
    assert err <= h * h
    with pytest.raises(ValueError):
        m_f_of_chi(sym, make_quadratic(2), 1.0)


def test_grid_moments():
    g = chi_from_uniform(-1.0, 3.0, 401)
    assert grid_mean(g) == pytest.approx(1.0, rel=1e-14)
    # Uniform[-1, 3] has variance 16/12; the trapezoid rule adds O(h^2)
    assert grid_variance(g) == pytest.approx(0.5 * 16 / 12, rel=1e-4)
    assert grid_variance(QuantileGrid(np.full(5, 2.2))) == 0.0


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
def test_constant_grid_is_a_fixed_point(p):
    g = QuantileGrid(np.full(200, -0.37))
    params = ChiSolverParams(p_exponent=p)
    assert np.array_equal(implicit_chi_step(g, make_ackley(1), params).values, g.values)


def test_noise_free_step_is_the_exact_relaxation():
    g = chi_from_uniform(0.0, 1.0, 11)
    f = make_quadratic(1)
    params = ChiSolverParams(lam=1.0, sigma=0.0, dt=0.1)
    m, _ = oracles.quadratic_grid_weighted_mean(g.values, params.alpha)
    want = [float(v) for v in oracles.sigma_zero_implicit_relaxation(g.values, m)]
    np.testing.assert_allclose(implicit_chi_step(g, f, params).values, want, rtol=1e-13, atol=1e-15)


def test_nonconvergence_raises_with_the_residual():
    g = chi_from_uniform(-3.0, 3.0, 50)
    params = ChiSolverParams(p_exponent=2.0, dt=50.0, sigma=5.0, max_newton=1, newton_tol=1e-300)
    with pytest.raises(SolverError, match="reduce dt") as info:
        implicit_chi_step(g, make_ackley(1), params)
    assert info.value.residual is not None and info.value.residual > 0


def test_crossing_over_a_flux_carrying_gap_is_an_error():
    x_old = np.array([0.0, 1.0, 2.0])
    with pytest.raises(SolverError, match="monotonicity"):
        _restore_order(np.array([0.0, 1.5, 1.4]), x_old, 1e-6)
    # across a floored gap the nodes are simply re-sorted
    x_old = np.array([0.0, 1.0, 1.0 + 1e-9])
    assert _restore_order(np.array([0.0, 1.2, 1.1]), x_old, 1e-6).tolist() == [0.0, 1.1, 1.2]


def test_run_on_consensus_stops_after_one_step():
    g = QuantileGrid(np.full(30, 1.5))
    final, series = chi_run(g, make_ackley(1), ChiSolverParams())
    assert series.terminated_by == "stop_tol" and series.steps_taken == 1
    assert np.array_equal(final.values, g.values)


def test_run_records_and_snapshots():
    g = chi_from_uniform(-1.0, 1.0, 40)
    params = ChiSolverParams(max_steps=25)
    final, series = chi_run(g, make_quadratic(1), params, record_every=10, keep_snapshots=True)
    assert series.step.tolist() == [0, 10, 20, 25]
    assert [n for n, _ in series.snapshots] == [0, 10, 20, 25]
    assert series.snapshots[-1][1] is final
    assert np.all(np.isfinite(series.w2)) and np.all(series.support_width > 0)


def test_boundary_velocity_examples():
    params = ChiSolverParams(p_exponent=2.0, lam=1.0)
    assert boundary_velocity(QuantileGrid(np.full(10, 3.0)), make_ackley(1), params) == (0.0, 0.0)
    left, right = boundary_velocity(chi_from_uniform(-1.0, 1.0, 101), make_quadratic(1), params)
    assert left == pytest.approx(2.0, abs=1e-12) and right == pytest.approx(-2.0, abs=1e-12)
    with pytest.raises(ValueError):
        boundary_velocity(chi_from_uniform(-1.0, 1.0), make_quadratic(1), ChiSolverParams(p_exponent=1.0))


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=40), st.floats(0.5, 60))
def test_boundary_velocity_points_inward(xs, alpha):
    xs = sorted(xs)
    if xs[0] == xs[-1]:
        xs[-1] += 1.0
    params = ChiSolverParams(p_exponent=2.0, alpha=alpha)
    left, right = boundary_velocity(QuantileGrid(xs), make_ackley(1), params)
    assert left >= 0 and right <= 0


@given(
    gaps=st.lists(st.floats(1e-3, 1.0), min_size=5, max_size=60),
    start=st.floats(-3, 3),
    p=st.sampled_from([1.0, 2.0]),
    name=st.sampled_from(["ackley", "quadratic"]),
)
def test_steps_keep_the_grid_nondecreasing(gaps, start, p, name):
    g = QuantileGrid(start + np.concatenate([[0.0], np.cumsum(gaps)]))
    f = make_ackley(1) if name == "ackley" else make_quadratic(1)
    params = ChiSolverParams(p_exponent=p)
    for _ in range(5):
        g = implicit_chi_step(g, f, params)
        assert np.all(np.diff(g.values) >= -1e-10)


def test_distribution_and_quantile_invert_each_other():
    for K in (50, 200, 800):
        g = beta_grid(2.0, 3.0, K)
        h = g.spacing
        # F(chi(eta)) = eta at the nodes, and inverting F on a fine grid of x recovers chi
        np.testing.assert_allclose(cdf(g, g.values), g.nodes, atol=1e-12)
        xs = np.linspace(g.values[0], g.values[-1], 20 * K)
        back = np.interp(g.nodes, cdf(g, xs), xs)
        assert np.max(np.abs(back - g.values)) <= 10 * h


@pytest.mark.parametrize("name", ["ackley", "quadratic"])
def test_support_shrinks_for_quadratic_diffusion(name):
    f = make_ackley(1) if name == "ackley" else make_quadratic(1)
    params = ChiSolverParams(p_exponent=2.0, max_steps=3000)
    _, series = chi_run(beta_grid(2.0, 2.0), f, params)
    width = series.support_width
    assert np.all(np.diff(width[1:]) <= 1e-12)
    assert width[-1] < width[1]
