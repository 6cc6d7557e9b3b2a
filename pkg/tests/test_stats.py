import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from saddlesim import stats
from saddlesim.errors import GridMismatch, InvalidInput, StatisticMismatch
from saddlesim.optimizers import Trajectory


def _series(times, mean, stderr=None, name="half_sq_norm", n_runs=10):
    mean = np.asarray(mean, dtype=float)
    if stderr is None:
        stderr = np.zeros_like(mean)
    return stats.MomentSeries(np.asarray(times, dtype=float), mean,
                              np.asarray(stderr, dtype=float), name, n_runs)


def test_statistics_shapes():
    Z = np.array([[3.0, 4.0], [0.0, 0.0]])
    np.testing.assert_allclose(stats.half_sq_norm(Z), [12.5, 0.0])
    np.testing.assert_allclose(stats.sq_norm(Z), [25.0, 0.0])
    np.testing.assert_allclose(stats.coordinate(1)(Z), [4.0, 0.0])


def test_estimate_moments_array_mean_and_stderr():
    times = np.array([0.0, 1.0])
    states = np.array([[[1.0, 0.0], [2.0, 0.0]],
                       [[3.0, 0.0], [4.0, 0.0]]])
    div = np.array([-1, -1])
    s = stats.estimate_moments_array(times, states, div, stats.sq_norm, "sq_norm")
    np.testing.assert_allclose(s.mean, [5.0, 10.0])
    # stderr = sample std / sqrt(n): std([1, 9]) and std([4, 16])
    np.testing.assert_allclose(s.stderr, [np.std([1, 9], ddof=1) / np.sqrt(2),
                                          np.std([4, 16], ddof=1) / np.sqrt(2)])
    assert not s.truncated


def test_estimate_moments_truncates_at_divergence():
    times = np.linspace(0, 1, 5)
    states = np.random.default_rng(0).normal(size=(3, 5, 2))
    div = np.array([-1, 3, -1])
    s = stats.estimate_moments_array(times, states, div, stats.sq_norm, "sq_norm")
    assert s.truncated
    assert len(s.times) == 3
    np.testing.assert_array_equal(s.times, times[:3])


def test_estimate_moments_from_trajectories():
    t = np.array([0.0, 0.5])
    trajs = [Trajectory(states=np.array([[1.0, 0.0], [0.5, 0.0]]), step_times=t),
             Trajectory(states=np.array([[0.0, 1.0], [0.0, 0.5]]), step_times=t)]
    s = stats.estimate_moments(trajs, stats.sq_norm, "sq_norm")
    np.testing.assert_allclose(s.mean, [1.0, 0.25])
    bad = [trajs[0], Trajectory(states=np.zeros((3, 2)), step_times=np.arange(3.0))]
    with pytest.raises(GridMismatch):
        stats.estimate_moments(bad, stats.sq_norm, "sq_norm")


def test_weak_error_same_grid():
    t = np.array([0.0, 1.0, 2.0])
    a = _series(t, [1.0, 2.0, 3.0], [0.1, 0.1, 0.1])
    b = _series(t, [1.0, 2.5, 3.1], [0.2, 0.2, 0.2])
    r = stats.weak_error(a, b)
    assert r.error == pytest.approx(0.5)
    assert r.time == pytest.approx(1.0)
    assert r.stderr == pytest.approx(np.hypot(0.1, 0.2))
    assert not r.interpolated


def test_weak_error_interpolates_mismatched_grids():
    a = _series(np.array([0.0, 1.0, 2.0]), [0.0, 1.0, 2.0])
    b = _series(np.array([0.0, 0.5, 1.0, 1.5, 2.0]), [0.0, 0.5, 1.0, 1.5, 2.0])
    r = stats.weak_error(a, b)
    assert r.interpolated
    assert r.error == pytest.approx(0.0)


def test_weak_error_rejects_different_statistics():
    t = np.array([0.0, 1.0])
    a = _series(t, [1.0, 2.0], name="half_sq_norm")
    b = _series(t, [1.0, 2.0], name="sq_norm")
    with pytest.raises(StatisticMismatch):
        stats.weak_error(a, b)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(0.1, 10.0))
def test_order_fit_recovers_power_law(order, scale):
    etas = [0.04, 0.02, 0.01, 0.005]
    errors = [scale * e ** order for e in etas]
    assert stats.order_fit(etas, errors) == pytest.approx(order, rel=1e-9)


def test_order_fit_rejects_nonpositive():
    with pytest.raises(InvalidInput):
        stats.order_fit([0.04, 0.02], [1.0, 0.0])
    with pytest.raises(InvalidInput):
        stats.order_fit([0.04, -0.02], [1.0, 1.0])


def test_linear_variance_fit_recovers_slope():
    t = np.linspace(0.0, 5.0, 60)
    s = _series(t, 0.3 + 0.25 * t, np.full_like(t, 1e-3))
    slope, intercept = stats.linear_variance_fit(s)
    assert slope == pytest.approx(0.25, rel=1e-9)
    assert intercept == pytest.approx(0.3, rel=1e-6)
    with pytest.raises(InvalidInput):
        stats.linear_variance_fit(_series(t[:5], np.ones(5)))


def test_moment_series_needs_two_runs():
    with pytest.raises(InvalidInput):
        _series(np.array([0.0]), [1.0], n_runs=1)
