import numpy as np
import pytest

from saddlesim.core import RngStream, StateVector
from saddlesim.errors import InvalidInput
from saddlesim.landscapes import NoiseSpec, NonBilinear2, Quadratic
from saddlesim.optimizers import (Method, OptimizerConfig, Sampling, Scheduler,
                                  run_optimizer, run_optimizer_batch)


def _bilinear(sigma=1.0):
    return Quadratic([0.0], [1.0], noise=NoiseSpec.additive(sigma, 1))


def test_scheduler_values():
    s = Scheduler.power_law(0.5)
    assert s(0.0) == 1.0
    assert s(3.0) == pytest.approx(0.5)
    assert Scheduler.constant()(17.3) == 1.0
    with pytest.raises(InvalidInput):
        Scheduler.power_law(-1.0)


def test_seg_with_zero_rho_equals_sgda():
    """With rho = 0 the lookahead point is the current point, so the
    extragradient update must reproduce plain descent-ascent bit for bit."""
    l = _bilinear()
    z0 = StateVector.from_z(np.array([1.0, -0.5]))
    a = run_optimizer(l, OptimizerConfig(Method.SEG, 0.1, rho=0.0), z0, 50, RngStream(7))
    b = run_optimizer(l, OptimizerConfig(Method.SGDA, 0.1), z0, 50, RngStream(7))
    np.testing.assert_array_equal(a.states, b.states)


def test_noise_free_sgda_expands_on_bilinear():
    l = Quadratic([0.0], [1.0], noise=NoiseSpec.none(1))
    z0 = StateVector.from_z(np.array([1.0, 1.0]))
    traj = run_optimizer(l, OptimizerConfig(Method.SGDA, 0.1), z0, 100, RngStream(0))
    norms = np.sum(traj.states ** 2, axis=1)
    # per step the squared norm grows by exactly (1 + eta^2 lam^2)
    np.testing.assert_allclose(norms[1:] / norms[:-1], 1.01, rtol=1e-12)


def test_noise_free_shgd_contracts_on_bilinear():
    l = Quadratic([0.0], [2.0], noise=NoiseSpec.none(1))
    z0 = StateVector.from_z(np.array([1.0, 1.0]))
    traj = run_optimizer(l, OptimizerConfig(Method.SHGD, 0.1), z0, 10, RngStream(0))
    norms = np.sum(traj.states ** 2, axis=1)
    np.testing.assert_allclose(norms[1:] / norms[:-1], (1 - 0.1 * 4.0) ** 2, rtol=1e-12)


def test_noise_free_seg_contraction_factor():
    l = Quadratic([0.0], [1.0], noise=NoiseSpec.none(1))
    z0 = StateVector.from_z(np.array([1.0, 0.0]))
    eta, rho = 0.1, 0.5
    traj = run_optimizer(l, OptimizerConfig(Method.SEG, eta, rho=rho), z0, 20, RngStream(0))
    norms = np.sum(traj.states ** 2, axis=1)
    # z_{k+1} = z_k - eta (I - rho J) J z_k has squared contraction
    # (1 - eta rho lam^2)^2 + eta^2 lam^2 per step on the bilinear game
    factor = (1 - eta * rho) ** 2 + eta ** 2
    np.testing.assert_allclose(norms[1:] / norms[:-1], factor, rtol=1e-12)


@pytest.mark.parametrize("method,rho", [(Method.SGDA, 0.0), (Method.SEG, 0.3),
                                        (Method.SHGD, 0.0)])
@pytest.mark.parametrize("sampling", [Sampling.SAME_SAMPLE, Sampling.INDEPENDENT_SAMPLE])
def test_batch_reproduces_serial(method, rho, sampling):
    l = _bilinear()
    z0 = StateVector.from_z(np.array([0.8, -0.4]))
    cfg = OptimizerConfig(method, 0.05, rho=rho, sampling=sampling)
    times, states, div = run_optimizer_batch(l, cfg, z0, 40, base_seed=11, n_runs=3)
    for r in range(3):
        serial = run_optimizer(l, cfg, z0, 40, RngStream(11, r))
        np.testing.assert_array_equal(states[r], serial.states)
        np.testing.assert_array_equal(times, serial.step_times)
    assert np.all(div == -1)


def test_batch_respects_record_every():
    l = _bilinear()
    z0 = StateVector.from_z(np.array([0.8, -0.4]))
    cfg = OptimizerConfig(Method.SGDA, 0.05)
    times, states, _ = run_optimizer_batch(l, cfg, z0, 40, base_seed=11, n_runs=2,
                                           record_every=10)
    full = run_optimizer(l, cfg, z0, 40, RngStream(11, 0))
    np.testing.assert_array_equal(states[0], full.states[::10])
    np.testing.assert_array_equal(times, full.step_times[::10])


def test_batch_runs_on_nonbilinear():
    l = NonBilinear2(noise=NoiseSpec.additive(1.0, 1))
    z0 = StateVector.from_z(np.array([1.0, 1.0]))
    cfg = OptimizerConfig(Method.SEG, 0.01, rho=0.3)
    times, states, div = run_optimizer_batch(l, cfg, z0, 100, base_seed=1, n_runs=4)
    serial = run_optimizer(l, cfg, z0, 100, RngStream(1, 2))
    np.testing.assert_array_equal(states[2], serial.states)


def test_divergence_is_flagged():
    # noise-free SGDA on the bilinear game expands, so a huge stepsize blows up
    l = Quadratic([0.0], [1.0], noise=NoiseSpec.none(1))
    z0 = StateVector.from_z(np.array([1e3, 1e3]))
    traj = run_optimizer(l, OptimizerConfig(Method.SGDA, 1e8), z0, 500, RngStream(0))
    assert traj.diverged_at is not None
    _, _, div = run_optimizer_batch(l, OptimizerConfig(Method.SGDA, 1e8), z0, 500,
                                    base_seed=0, n_runs=2)
    assert np.all(div > 0)


def test_scheduled_stepsize_decays():
    l = Quadratic([0.0], [1.0], noise=NoiseSpec.none(1))
    z0 = StateVector.from_z(np.array([1.0, 1.0]))
    cfg = OptimizerConfig(Method.SGDA, 0.1, eta_sched=Scheduler.power_law(1.0))
    traj = run_optimizer(l, cfg, z0, 3, RngStream(0))
    # eta_k = 0.1 / (k * 0.1 + 1): growth factor 1 + eta_k^2 per step
    norms = np.sum(traj.states ** 2, axis=1)
    etas = [0.1 / (1 + 0.1 * k) for k in range(3)]
    np.testing.assert_allclose(norms[1:] / norms[:-1],
                               [1 + e ** 2 for e in etas], rtol=1e-12)


def test_vector_eta_is_sgda_only():
    with pytest.raises(InvalidInput):
        OptimizerConfig(Method.SEG, np.array([0.1, 0.2]), rho=0.1)
    with pytest.raises(InvalidInput):
        OptimizerConfig(Method.SGDA, -0.1)
