import numpy as np
import pytest
from scipy.linalg import expm

from saddlesim.core import RngStream, StateVector
from saddlesim.errors import InvalidInput
from saddlesim.landscapes import NoiseSpec, NonBilinear2, Quadratic
from saddlesim.optimizers import Sampling, Scheduler
from saddlesim.sde import (build_seg_sde, build_seg_small_rho_sde, build_sgda_sde,
                           build_shgd_sde, euler_maruyama, euler_maruyama_batch,
                           scheduled_sde)


def _bilinear(sigma=1.0, lam=1.0):
    return Quadratic([0.0], [lam], noise=NoiseSpec.additive(sigma, 1))


def test_sgda_sde_drift_and_diffusion():
    l = _bilinear(sigma=0.5)
    m = build_sgda_sde(l, 0.04)
    Z = np.array([[1.0, -2.0]])
    np.testing.assert_allclose(m.drift(Z), -l.field_z(Z))
    np.testing.assert_allclose(m.diffusion(Z), np.sqrt(0.04) * 0.5 * np.eye(2))


def test_seg_sde_drift_includes_lookahead_correction():
    l = _bilinear()
    rho = 0.3
    m = build_seg_sde(l, 0.01, rho, Sampling.SAME_SAMPLE)
    Z = np.array([[0.7, 0.2]])
    J = l.jacobian_z(Z[0])
    expect = -(np.eye(2) - rho * J) @ l.field_z(Z[0])
    np.testing.assert_allclose(m.drift(Z)[0], expect)


def test_seg_small_rho_sde_matches_sgda():
    l = _bilinear()
    a = build_seg_small_rho_sde(l, 0.01)
    b = build_sgda_sde(l, 0.01)
    Z = np.array([[0.3, -0.8]])
    np.testing.assert_array_equal(a.drift(Z), b.drift(Z))
    np.testing.assert_array_equal(a.diffusion(Z), b.diffusion(Z))


def test_shgd_sde_noise_free_matches_matrix_exponential():
    l = Quadratic([1.0], [2.0], noise=NoiseSpec.none(1))
    m = build_shgd_sde(l, 0.01, Sampling.SAME_SAMPLE)
    z0 = StateVector.from_z(np.array([1.0, -1.0]))
    dt, steps = 1e-4, 5000
    traj = euler_maruyama(m, z0, dt, steps, RngStream(0))
    J = l.jacobian_z(z0.z)
    exact = expm(-J.T @ J * dt * steps) @ z0.z
    np.testing.assert_allclose(traj.states[-1], exact, atol=1e-3)


def test_batch_reproduces_serial_euler_maruyama():
    l = _bilinear()
    m = build_seg_sde(l, 0.01, 0.5, Sampling.SAME_SAMPLE)
    z0 = StateVector.from_z(np.array([0.4, 0.9]))
    times, states, div = euler_maruyama_batch(m, z0, 0.002, 60, base_seed=21, n_runs=3)
    for r in range(3):
        serial = euler_maruyama(m, z0, 0.002, 60, RngStream(21, r))
        np.testing.assert_array_equal(states[r], serial.states)
        np.testing.assert_array_equal(times, serial.step_times)
    assert np.all(div == -1)


def test_batch_record_every_subsamples():
    l = _bilinear()
    m = build_sgda_sde(l, 0.01)
    z0 = StateVector.from_z(np.array([0.4, 0.9]))
    _, full, _ = euler_maruyama_batch(m, z0, 0.002, 60, base_seed=3, n_runs=2)
    times, thin, _ = euler_maruyama_batch(m, z0, 0.002, 60, base_seed=3, n_runs=2,
                                          record_every=20)
    np.testing.assert_array_equal(thin, full[:, ::20])
    np.testing.assert_allclose(times, 0.002 * np.arange(0, 61, 20))


def test_scheduled_sde_scales_drift_and_diffusion():
    l = _bilinear()
    base = build_seg_sde(l, 0.01, 0.4, Sampling.SAME_SAMPLE)
    m = scheduled_sde(base, Scheduler.power_law(1.0), Scheduler.power_law(0.5))
    Z = np.array([[0.6, -0.2]])
    t = 3.0
    scale = 1.0 / (t + 1.0)
    rho_t = 0.4 / np.sqrt(t + 1.0)
    ref = build_seg_sde(l, 0.01, rho_t, Sampling.SAME_SAMPLE)
    np.testing.assert_allclose(m.drift(Z, t), scale * ref.drift(Z))
    np.testing.assert_allclose(m.diffusion(Z, t), scale * ref.diffusion(Z))


def test_shgd_independent_sampling_halves_noise_energy():
    l = _bilinear(sigma=0.7, lam=1.5)
    same = build_shgd_sde(l, 0.01, Sampling.SAME_SAMPLE)
    indep = build_shgd_sde(l, 0.01, Sampling.INDEPENDENT_SAMPLE)
    Z = np.array([[0.3, 0.4]])
    d_same = same.diffusion(Z)
    d_indep = indep.diffusion(Z)
    np.testing.assert_allclose(d_same @ np.swapaxes(d_same, -1, -2),
                               2 * d_indep @ np.swapaxes(d_indep, -1, -2))


def test_euler_maruyama_rejects_bad_arguments():
    l = _bilinear()
    m = build_sgda_sde(l, 0.01)
    z0 = StateVector.from_z(np.array([1.0, 1.0]))
    with pytest.raises(InvalidInput):
        euler_maruyama(m, z0, -0.01, 10, RngStream(0))
    with pytest.raises(InvalidInput):
        euler_maruyama_batch(m, z0, 0.01, 0, base_seed=0, n_runs=2)


def test_nonbilinear_matrix_noise_unsupported_for_sde():
    l = NonBilinear2(noise=NoiseSpec.additive(1.0, 1))
    m = build_sgda_sde(l, 0.01)  # additive noise is fine on any landscape
    assert m.d == 1
