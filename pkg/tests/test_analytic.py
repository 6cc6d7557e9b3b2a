import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from saddlesim import analytic
from saddlesim.analytic import (BoundParams, BoundRegime, QuadraticGameParams,
                                RhoObjective)
from saddlesim.core import StateVector
from saddlesim.errors import (Degenerate, DivergentRegime, InvalidInput,
                              SgdaBilinearDivergence)
from saddlesim.landscapes import NoiseSpec, Quadratic
from saddlesim.optimizers import Method, Scheduler


def _j(a, lam):
    return np.array([[a, lam], [-lam, a]])


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(0.1, 3), st.floats(-0.5, 0.5),
       st.floats(0.1, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_seg_mean_matches_matrix_exponential(a, lam, rho, t, x0, y0):
    """The mean ODE is dz/dt = -(I - rho J) J z; the closed form must agree
    with the matrix exponential of that generator."""
    p = QuadraticGameParams.of(a, lam, 1.0, 0.01, rho, d=1)
    z0 = StateVector(np.array([x0]), np.array([y0]))
    got = analytic.seg_quadratic_mean(p, z0, t)
    J = _j(a, lam)
    expect = expm(-t * (np.eye(2) - rho * J) @ J) @ z0.z
    np.testing.assert_allclose(got, expect, atol=1e-9)


def test_shgd_mean_matches_matrix_exponential():
    p = QuadraticGameParams.of(1.5, 0.7, 1.0, 0.01, 0.0, d=1)
    z0 = StateVector(np.array([0.4]), np.array([-1.1]))
    J = _j(1.5, 0.7)
    for t in (0.1, 0.5, 2.0):
        expect = expm(-t * J.T @ J) @ z0.z
        np.testing.assert_allclose(analytic.shgd_quadratic_mean(p, z0, t), expect,
                                   atol=1e-12)


@pytest.mark.parametrize("a,lam,rho", [(2.0, 1.0, 0.3), (0.5, 1.0, 0.2),
                                       (0.0, 1.0, 0.4), (1.0, 2.0, -0.1)])
def test_seg_covariance_solves_lyapunov_ode(a, lam, rho):
    """Var(Z_t) solves dV/dt = -MV - VM' + Q for the mean generator M and the
    constant diffusion covariance Q = eta sigma^2 (I - rho J)(I - rho J)'."""
    eta, sig = 0.01, 1.3
    p = QuadraticGameParams.of(a, lam, sig, eta, rho, d=1)
    J = _j(a, lam)
    M = (np.eye(2) - rho * J) @ J
    Q = eta * sig ** 2 * (np.eye(2) - rho * J) @ (np.eye(2) - rho * J).T

    def rhs(_, v):
        V = v.reshape(2, 2)
        return (-M @ V - V @ M.T + Q).ravel()

    t_end = 0.8
    sol = solve_ivp(rhs, (0.0, t_end), np.zeros(4), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(analytic.seg_quadratic_cov(p, t_end),
                               sol.y[:, -1].reshape(2, 2), atol=1e-9)


def test_variance_factor_frozen_values():
    """Spot values of B(rho) at a = 2, lam = 1."""
    cases = {-1 / 6: 65 / 180, 0.0: 1 / 4, 1 / 6: 17 / 108, 1 / 3: 1 / 9,
             2 / 5: 1 / 8, 1 / 2: 1 / 4}
    for rho, expect in cases.items():
        p = QuadraticGameParams.of(2.0, 1.0, 1.0, 0.01, rho, d=1)
        got = analytic.seg_asymptotic_variance_factor(p)
        np.testing.assert_allclose(got, [expect], rtol=1e-12)


def test_variance_factor_divergent_regimes():
    with pytest.raises(SgdaBilinearDivergence):
        analytic.seg_asymptotic_variance_factor(
            QuadraticGameParams.of(0.0, 1.0, 1.0, 0.01, 0.0, d=1))
    with pytest.raises(DivergentRegime):
        analytic.seg_asymptotic_variance_factor(
            QuadraticGameParams.of(2.0, 1.0, 1.0, 0.01, 1.0, d=1))


def test_bilinear_linear_variance_growth():
    p = QuadraticGameParams.of(0.0, 1.0, 2.0, 0.05, 0.0, d=1)
    cov = analytic.seg_quadratic_cov(p, 3.0, allow_linear=True)
    np.testing.assert_allclose(cov, 0.05 * 4.0 * 3.0 * np.eye(2))


def test_stochastic_bilinear_exponents():
    got = analytic.shgd_stochastic_bilinear_exponent(2.0, 1.0, 0.01)
    np.testing.assert_allclose(got, [7.91], rtol=1e-14)
    got = analytic.seg_stochastic_bilinear_exponent(2.0, 1.0, 0.01, 1.0)
    np.testing.assert_allclose(got, [7.9], rtol=1e-14)
    assert analytic.shgd_stochastic_bilinear_converges(2.0, 1.0, 0.01)
    assert not analytic.seg_stochastic_bilinear_converges(2.0, 1.0, 0.01, -1.0)


def test_fixed_bilinear_norm_endpoints():
    z0 = StateVector.from_z(np.array([0.3, -0.4]))
    half = 0.5 * (0.3 ** 2 + 0.4 ** 2)
    eta, sig = 0.01, 1.0
    assert analytic.shgd_norm_fixed_bilinear([2.0], [sig], eta, z0, 0.0) \
        == pytest.approx(half)
    assert analytic.shgd_norm_fixed_bilinear([2.0], [sig], eta, z0, 50.0) \
        == pytest.approx(0.5 * eta * sig ** 2)
    assert analytic.seg_norm_fixed_bilinear([1.0], [sig], eta, 0.5, z0, 0.0) \
        == pytest.approx(half)
    # stationary level eta sigma^2 (1 + rho^2 lam^2) / (2 rho lam^2)
    assert analytic.seg_norm_fixed_bilinear([1.0], [sig], eta, 0.5, z0, 1e4) \
        == pytest.approx(eta * sig ** 2 * 1.25 / (2 * 0.5))
    with pytest.raises(DivergentRegime):
        analytic.seg_norm_fixed_bilinear([1.0], [sig], eta, -0.1, z0, 1.0)


def test_optimal_rho_per_coordinate_variance():
    p = QuadraticGameParams.of([2.0, 0.0], [1.0, 3.0], 1.0, 0.01, 0.0, d=2)
    np.testing.assert_allclose(
        analytic.optimal_rho(p, RhoObjective.PER_COORDINATE_VARIANCE),
        [1 / 3, 1 / 3])
    degenerate = QuadraticGameParams.of(-1.0, 1.0, 1.0, 0.01, 0.0, d=1)
    with pytest.raises(Degenerate):
        analytic.optimal_rho(degenerate, RhoObjective.PER_COORDINATE_VARIANCE)


def test_optimal_rho_match_shgd_decay():
    p = QuadraticGameParams.of(2.0, 1.0, 1.0, 0.01, 0.0, d=1)
    np.testing.assert_allclose(
        analytic.optimal_rho(p, RhoObjective.MATCH_SHGD_DECAY), [-1.0])


def test_optimal_rho_trace_bilinear_closed_form():
    p = QuadraticGameParams.of(0.0, [1.0, 2.0], 1.0, 0.01, 0.0, d=2)
    got = analytic.optimal_rho(p, RhoObjective.TRACE_VARIANCE)
    assert got == pytest.approx(np.sqrt((1.0 + 0.25) / 2))


def test_optimal_rho_trace_beats_grid():
    p = QuadraticGameParams.of([2.0, 0.5], [1.0, 1.5], 1.0, 0.01, 0.0, d=2)
    best = analytic.optimal_rho(p, RhoObjective.TRACE_VARIANCE)

    def trace_b(rho):
        q = QuadraticGameParams.of([2.0, 0.5], [1.0, 1.5], 1.0, 0.01, rho, d=2)
        return float(np.sum(analytic.seg_asymptotic_variance_factor(q)))

    # the convergent interval here is (-1/4, 2/3)
    grid = np.linspace(-0.24, 0.65, 400)
    assert trace_b(best) <= min(trace_b(r) for r in grid) + 1e-9


def test_seg_convergence_predicate():
    p = QuadraticGameParams.of(2.0, 1.0, 1.0, 0.01, 0.5, d=1)
    conv, faster = analytic.seg_convergence_predicate_quadratic(p)
    assert conv.tolist() == [True] and faster.tolist() == [False]
    p = QuadraticGameParams.of(2.0, 1.0, 1.0, 0.01, -0.1, d=1)
    conv, faster = analytic.seg_convergence_predicate_quadratic(p)
    assert conv.tolist() == [True] and faster.tolist() == [True]
    p = QuadraticGameParams.of(-1.0, 2.0, 1.0, 0.01, -1.0, d=1)
    conv, _ = analytic.seg_convergence_predicate_quadratic(p)
    assert conv.tolist() == [False]


def test_hamiltonian_bound_regimes():
    b = BoundParams(mu=1.0, L_T=2.0, L_V=3.0, H0=5.0, alpha=0.5)
    t = np.array([0.0, 0.7])
    scaling = analytic.hamiltonian_bound(b, BoundRegime.SCALING, 0.1, t)
    np.testing.assert_allclose(scaling, 5.0 * np.exp((-2.0 + 0.6) * t))
    bounded = analytic.hamiltonian_bound(b, BoundRegime.BOUNDED, 0.1, t)
    np.testing.assert_allclose(bounded,
                               5.0 * np.exp(-2 * t) + (1 - np.exp(-2 * t)) * 0.3)
    # the general-alpha curve starts at H0 and stays positive
    gen = analytic.hamiltonian_bound(b, BoundRegime.GENERAL_ALPHA, 0.1, t)
    assert gen[0] == pytest.approx(5.0)
    assert np.all(gen > 0)
    b1 = BoundParams(mu=1.0, L_T=2.0, L_V=3.0, H0=5.0, alpha=1.0)
    with pytest.warns(UserWarning):
        got = analytic.hamiltonian_bound(b1, BoundRegime.GENERAL_ALPHA, 0.1, t)
    np.testing.assert_allclose(got, scaling)


def test_seg_mu_rho_quadratic():
    l = Quadratic([2.0], [1.0], noise=NoiseSpec.none(1))
    z = StateVector.from_z(np.zeros(2))
    # m11 = m22 = a + rho (lam^2 - a^2) = 2 - 0.3
    assert analytic.seg_mu_rho(l, 0.1, z) == pytest.approx(1.7)


def test_hamiltonian_ode_rhs_matches_law_derivative():
    lam, eta, sig = 1.5, 0.01, 1.0
    l = Quadratic([0.0], [lam], noise=NoiseSpec.additive(sig, 1))
    z0 = StateVector.from_z(np.array([0.5, -0.2]))
    half = 0.5 * np.sum(z0.z ** 2)
    # on the bilinear game H = lam^2 ||z||^2 / 2, so the law derivative at 0 is
    # lam^2 (-2 lam^2 half + eta sig^2 lam^2)
    expect = lam ** 2 * (-2 * lam ** 2 * half + eta * sig ** 2 * lam ** 2)
    got = analytic.hamiltonian_ode_rhs(Method.SHGD, l, eta, 0.0, [z0])
    assert got == pytest.approx(expect, rel=1e-9)


def test_log_form_requires_unit_rate():
    z0 = StateVector.from_z(np.array([1.0, 1.0]))
    with pytest.raises(InvalidInput):
        analytic.scheduled_norm_power_law_log_form([1.0], [1.0], 0.01, z0, 1.0)


def test_scheduler_convergence_predicates():
    assert analytic.scheduler_converges(Method.SHGD, Scheduler.power_law(1.0))
    assert not analytic.scheduler_converges(Method.SHGD, Scheduler.power_law(1.5))
    assert analytic.scheduler_converges(Method.SEG, Scheduler.power_law(0.6),
                                        Scheduler.power_law(0.4))
    assert not analytic.scheduler_converges(Method.SEG, Scheduler.power_law(0.4),
                                            Scheduler.power_law(0.6))
