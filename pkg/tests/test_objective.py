import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cbo import Ensemble, evaluate_batch, make_ackley, make_quadratic
from cbo.objective import from_config

import frozen


def test_ackley_minimum_is_the_shift():
    assert make_ackley(1, shift=1.0)(np.zeros(1)) == 1.0
    assert make_ackley(2, shift=1.0)(np.zeros(2)) == 1.0
    assert make_ackley(1, shift=0.0)(np.zeros(1)) == 0.0


def test_ackley_at_one_matches_high_precision_value():
    assert make_ackley(1, shift=0.0)(np.ones(1)) == pytest.approx(frozen.ACKLEY_AT_ONE, rel=1e-15)


def test_ackley_metadata():
    f = make_ackley(3, shift=2.0)
    assert np.array_equal(f.x_star, np.zeros(3))
    assert f.f_min == f.f_lower == 2.0
    # smoothness and quadratic-growth constants are not available for Ackley
    assert f.lipschitz is None and f.hessian_bound is None and f.growth_lower is None


def test_quadratic_values():
    f = make_quadratic(1, shift=1.0)
    assert f(np.zeros(1)) == 1.0
    assert make_quadratic(2, shift=1.0)(np.array([3.0, 4.0])) == 26.0
    assert np.array_equal(evaluate_batch(f, Ensemble([0.0, 1.0])), [1.0, 2.0])


def test_quadratic_laplacian_constant_is_saturated():
    for d in (1, 2, 5):
        f = make_quadratic(d)
        # the Laplacian of |x|^2 is 2d everywhere and the gradient term is unused
        assert f.laplacian_c0 == 2 * d and f.laplacian_c1 == 0.0


def test_empty_batch_gives_empty_vector():
    out = make_ackley(2)(np.zeros((0, 2)))
    assert out.shape == (0,)


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        make_ackley(0)
    with pytest.raises(ValueError):
        make_quadratic(1, shift=0.0)
    with pytest.raises(ValueError, match="dimension mismatch"):
        make_quadratic(2)(np.zeros((3, 1)))
    with pytest.raises(ValueError, match="dimension mismatch"):
        evaluate_batch(make_quadratic(2), Ensemble(np.zeros((3, 1))))
    with pytest.raises(ValueError, match="unknown objective"):
        from_config("rastrigin")


def _ball(rng, n, d, radius):
    x = rng.standard_normal((n, d))
    x *= (radius * rng.uniform(size=(n, 1)) ** (1.0 / d)) / np.linalg.norm(x, axis=1, keepdims=True)
    return x


@pytest.mark.parametrize("make", [make_ackley, make_quadratic])
@pytest.mark.parametrize("dim", [1, 2])
def test_metadata_inequalities_on_random_points(make, dim):
    f = make(dim, shift=1.0)
    x = _ball(np.random.default_rng(7), 10_000, dim, 10.0)
    vals = f(x)
    sq = np.sum(x**2, axis=1)
    assert np.all(vals >= f.f_lower)
    assert np.all(vals >= f.f_min) and f(f.x_star) == f.f_min
    if f.growth_upper is not None:
        assert np.all(vals - f.f_lower <= f.growth_upper * (1.0 + sq))
    if f.growth_lower is not None:
        far = sq >= f.growth_radius**2
        # f - f_lower = |x|^2 holds with equality for the quadratic; allow
        # the rounding of adding and removing the shift
        slack = 4 * np.finfo(float).eps * vals[far]
        assert np.all(vals[far] - f.f_lower >= f.growth_lower * sq[far] - slack)
    assert np.all(vals <= f.f_upper)


@given(
    x=st.lists(st.floats(-50, 50), min_size=1, max_size=8),
    shift=st.floats(-10, 10),
    name=st.sampled_from(["ackley", "quadratic"]),
)
def test_shift_adds_a_constant(x, shift, name):
    pts = np.array(x)[:, None]
    base = from_config(name, 1, shift=1.0)
    other = base.__class__(**{**base.__dict__, "shift": shift})
    assert np.array_equal(other(pts), base.func(pts) + shift)
