"""Closed-form evaluators for the linear-game models: exact means and
covariances on quadratic games, expected-squared-norm laws on bilinear games
under both noise models, scheduler formulas (by quadrature), convergence
predicates, optimal extrapolation stepsizes, and Hamiltonian bound curves.

Conventions: games are diagonal, f = x'Ax/2 + x'Lambda y - y'Ay/2, so every
formula decomposes per coordinate pair (x_i, y_i). The stationary-variance
factor B folds the 1/2 in: B_i = ((1-rho a_i)^2 + rho^2 lam_i^2)
/ (2 (a_i + rho (lam_i^2 - a_i^2))), and Var_infty = eta sigma^2 B per
coordinate.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .core import DiagMatrix, StateVector
from .errors import (Degenerate, DivergentRegime, InvalidInput, QuadratureError,
                     SgdaBilinearDivergence)
from .landscapes import Landscape, NoiseKind
from .optimizers import Method, Scheduler
from .sde import Sampling, build_seg_sde, build_shgd_sde


@dataclass(frozen=True)
class QuadraticGameParams:
    a: DiagMatrix
    lam: DiagMatrix
    sigma: DiagMatrix
    eta: float
    rho: float = 0.0

    def __post_init__(self):
        if not (self.a.d == self.lam.d == self.sigma.d):
            raise InvalidInput("a, lam, sigma must share the dimension")
        if self.eta <= 0:
            raise InvalidInput("eta must be positive")

    @classmethod
    def of(cls, a, lam, sigma, eta, rho=0.0, d: int | None = None) -> "QuadraticGameParams":
        if d is None:
            d = max(np.atleast_1d(np.asarray(v)).size for v in (a, lam, sigma))
        return cls(DiagMatrix.of(a, d), DiagMatrix.of(lam, d),
                   DiagMatrix.of(sigma, d, psd=True), float(eta), float(rho))

    @property
    def d(self) -> int:
        return self.a.d


@dataclass(frozen=True)
class BoundParams:
    mu: float
    L_T: float
    L_V: float
    H0: float
    alpha: float = 1.0

    def __post_init__(self):
        if self.mu == 0 or self.L_T <= 0 or self.L_V < 0 or self.H0 < 0:
            raise InvalidInput("require mu != 0, L_T > 0, L_V >= 0, H0 >= 0")


class BoundRegime(enum.Enum):
    SCALING = "scaling"
    BOUNDED = "bounded"
    GENERAL_ALPHA = "general_alpha"


class RhoObjective(enum.Enum):
    PER_COORDINATE_VARIANCE = "per_coordinate_variance"
    TRACE_VARIANCE = "trace_variance"
    MATCH_SHGD_DECAY = "match_shgd_decay"


# ---------------------------------------------------------------------------
# exact quadratic dynamics


def seg_quadratic_mean(p: QuadraticGameParams, z0: StateVector, t) -> np.ndarray:
    """E[Z_t]: per-coordinate decay exp((rho(a^2-lam^2)-a) t) times rotation
    by angle lam_hat t with lam_hat = lam (1 - 2 rho a).

    Vectorized over t; a scalar t yields shape (2d,)."""
    a, lam, rho = p.a.entries, p.lam.entries, p.rho
    t = np.asarray(t, dtype=float)[..., None]
    decay = np.exp((rho * (a ** 2 - lam ** 2) - a) * t)
    ang = lam * (1 - 2 * rho * a) * t
    c, s = np.cos(ang), np.sin(ang)
    x = decay * (c * z0.x - s * z0.y)
    y = decay * (s * z0.x + c * z0.y)
    return np.concatenate([x, y], axis=-1)


def seg_asymptotic_variance_factor(p: QuadraticGameParams) -> np.ndarray:
    """B_i(rho); raises on non-convergent coordinates."""
    a, lam, rho = p.a.entries, p.lam.entries, p.rho
    denom = a + rho * (lam ** 2 - a ** 2)
    for i, dv in enumerate(denom):
        if dv <= 0:
            if rho == 0 and a[i] == 0:
                raise SgdaBilinearDivergence(
                    "rho = 0 on the bilinear game: variance grows linearly", coordinate=i)
            raise DivergentRegime(f"coordinate {i} is outside the convergent regime", coordinate=i)
    return ((1 - rho * a) ** 2 + rho ** 2 * lam ** 2) / (2 * denom)


def seg_quadratic_cov(p: QuadraticGameParams, t, allow_linear: bool = False) -> np.ndarray:
    """Var(Z_t) = eta sigma^2 (1 - e^{-2 kappa t}) diag(B, B) per coordinate.

    With rho = 0 on the pure bilinear game there is no stationary variance;
    allow_linear=True returns the linear-in-t covariance eta sigma^2 t I."""
    a, lam, sig, eta, rho = p.a.entries, p.lam.entries, p.sigma.entries, p.eta, p.rho
    t = np.asarray(t, dtype=float)
    if allow_linear and rho == 0 and np.all(a == 0):
        per = eta * sig ** 2 * t[..., None]
        return _diag_embed(np.concatenate([per, per], axis=-1))
    B = seg_asymptotic_variance_factor(p)
    kappa = a + rho * (lam ** 2 - a ** 2)
    per = eta * sig ** 2 * B * (1 - np.exp(-2 * kappa * t[..., None]))
    return _diag_embed(np.concatenate([per, per], axis=-1))


def shgd_quadratic_mean(p: QuadraticGameParams, z0: StateVector, t) -> np.ndarray:
    a, lam = p.a.entries, p.lam.entries
    t = np.asarray(t, dtype=float)[..., None]
    decay = np.exp(-(lam ** 2 + a ** 2) * t)
    return np.concatenate([decay * z0.x, decay * z0.y], axis=-1)


def shgd_quadratic_cov(p: QuadraticGameParams, t) -> np.ndarray:
    """(eta sigma^2 / 2)(1 - e^{-2 (lam^2 + a^2) t}) per diagonal entry."""
    a, lam, sig, eta = p.a.entries, p.lam.entries, p.sigma.entries, p.eta
    t = np.asarray(t, dtype=float)[..., None]
    per = 0.5 * eta * sig ** 2 * (1 - np.exp(-2 * (lam ** 2 + a ** 2) * t))
    return _diag_embed(np.concatenate([per, per], axis=-1))


def shgd_quadratic_stuck(p: QuadraticGameParams) -> np.ndarray:
    """Coordinates with lam = a = 0 never move (zero drift, zero diffusion)."""
    return (p.lam.entries == 0) & (p.a.entries == 0)


def _diag_embed(vals: np.ndarray) -> np.ndarray:
    m = vals.shape[-1]
    out = np.zeros(vals.shape + (m,))
    idx = np.arange(m)
    out[..., idx, idx] = vals
    return out


# ---------------------------------------------------------------------------
# bilinear expected-squared-norm laws


def _bilinear_args(lam, sigma, z0: StateVector):
    d = z0.d
    lam = DiagMatrix.of(lam, d, psd=True).entries
    sig = DiagMatrix.of(sigma, d, psd=True).entries
    half = 0.5 * (z0.x ** 2 + z0.y ** 2)
    return lam, sig, half


def shgd_stochastic_bilinear_exponent(lam, sigma, eta, d: int | None = None) -> np.ndarray:
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    sig = np.atleast_1d(np.asarray(sigma, dtype=float))
    lam, sig = np.broadcast_arrays(lam, sig)
    return 2 * lam ** 2 - eta * sig ** 2 * (2 * lam ** 2 + sig ** 2)


def shgd_norm_stochastic_bilinear(lam, sigma, eta: float, z0: StateVector, t) -> np.ndarray:
    """Matrix-entry noise: E||Z_t||^2/2 decays (or grows) exponentially per
    coordinate with rate 2 lam^2 - eta sigma^2 (2 lam^2 + sigma^2)."""
    lam, sig, half = _bilinear_args(lam, sigma, z0)
    rate = 2 * lam ** 2 - eta * sig ** 2 * (2 * lam ** 2 + sig ** 2)
    t = np.asarray(t, dtype=float)[..., None]
    return np.sum(half * np.exp(-rate * t), axis=-1)


def shgd_stochastic_bilinear_converges(lam, sigma, eta: float) -> bool:
    return bool(np.all(shgd_stochastic_bilinear_exponent(lam, sigma, eta) > 0))


def seg_stochastic_bilinear_exponent(lam, sigma, eta, rho) -> np.ndarray:
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    sig = np.atleast_1d(np.asarray(sigma, dtype=float))
    lam, sig = np.broadcast_arrays(lam, sig)
    return 2 * rho * lam ** 2 - eta * sig ** 2 * (1 + rho ** 2 * (2 * lam ** 2 + sig ** 2))


def seg_norm_stochastic_bilinear(lam, sigma, eta: float, rho: float, z0: StateVector, t) -> np.ndarray:
    lam, sig, half = _bilinear_args(lam, sigma, z0)
    rate = 2 * rho * lam ** 2 - eta * sig ** 2 * (1 + rho ** 2 * (2 * lam ** 2 + sig ** 2))
    t = np.asarray(t, dtype=float)[..., None]
    return np.sum(half * np.exp(-rate * t), axis=-1)


def seg_stochastic_bilinear_converges(lam, sigma, eta: float, rho: float) -> bool:
    return bool(np.all(seg_stochastic_bilinear_exponent(lam, sigma, eta, rho) > 0))


def shgd_norm_fixed_bilinear(lam, sigma, eta: float, z0: StateVector, t) -> np.ndarray:
    """Additive noise: transient decay at rate 2 lam^2 towards (eta/2) sum sigma^2."""
    lam, sig, half = _bilinear_args(lam, sigma, z0)
    t = np.asarray(t, dtype=float)[..., None]
    e = np.exp(-2 * lam ** 2 * t)
    return np.sum(half * e + 0.5 * eta * sig ** 2 * (1 - e), axis=-1)


def seg_norm_fixed_bilinear(lam, sigma, eta: float, rho: float, z0: StateVector, t) -> np.ndarray:
    lam, sig, half = _bilinear_args(lam, sigma, z0)
    if rho <= 0:
        raise DivergentRegime("SEG on the fixed bilinear game needs rho > 0")
    if np.any(lam == 0):
        raise DivergentRegime("a zero coupling coordinate has no restoring force",
                              coordinate=int(np.argmin(lam)))
    t = np.asarray(t, dtype=float)[..., None]
    e = np.exp(-2 * rho * lam ** 2 * t)
    asym = 0.5 * eta * sig ** 2 * (1 + rho ** 2 * lam ** 2) / (rho * lam ** 2)
    return np.sum(half * e + asym * (1 - e), axis=-1)


# ---------------------------------------------------------------------------
# schedulers


def scheduled_norm(method: Method, lam, sigma, eta: float, rho: float,
                   eta_sched: Scheduler, rho_sched: Scheduler,
                   z0: StateVector, t: float) -> float:
    """E||Z_t||^2/2 on the fixed bilinear game under stepsize schedulers.

    Evaluates, per coordinate,
      e^{-A(t)} ||Z0^i||^2/2 + int_0^t e^{-(A(t)-A(s))} w_i(s) ds
    with A(t) = 2 lam^2 int eta_s ds (SHGD) or 2 lam^2 rho int eta_s rho_s ds
    (SEG), and w the matching noise-injection weight. The integral uses
    composite trapezoid starting at step min(0.01, t/1000), refined by
    Richardson halvings until the relative error estimate drops below 1e-9
    (QuadratureError if it never does)."""
    if t < 0:
        raise InvalidInput("t must be >= 0")
    lam_v, sig_v, half = _bilinear_args(lam, sigma, z0)
    if method is Method.SEG and rho <= 0:
        raise DivergentRegime("SEG scheduler formula needs rho > 0")
    if t == 0:
        return float(np.sum(half))

    def evaluate(n: int) -> float:
        s = np.linspace(0.0, t, n + 1)
        h = t / n
        es = np.asarray(eta_sched(s), dtype=float) * np.ones_like(s)
        rs = np.asarray(rho_sched(s), dtype=float) * np.ones_like(s)
        if method is Method.SHGD:
            a_rate = es[None, :]                       # times 2 lam^2
            w = eta * sig_v[:, None] ** 2 * lam_v[:, None] ** 2 * es[None, :] ** 2
        else:
            a_rate = rho * (es * rs)[None, :]
            w = eta * sig_v[:, None] ** 2 * es[None, :] ** 2 \
                * (1 + lam_v[:, None] ** 2 * rho ** 2 * rs[None, :] ** 2)
        incr = 0.5 * h * (a_rate[:, 1:] + a_rate[:, :-1]) * (2 * lam_v[:, None] ** 2)
        A = np.concatenate([np.zeros((lam_v.size, 1)), np.cumsum(incr, axis=1)], axis=1)
        decay_weight = np.exp(A - A[:, -1:])            # e^{-(A(t)-A(s))}, <= 1
        f = decay_weight * w
        integral = h * (np.sum(f[:, 1:-1], axis=1) + 0.5 * (f[:, 0] + f[:, -1]))
        total = half * np.exp(-A[:, -1]) + integral
        return float(np.sum(total))

    n0 = max(2, int(np.ceil(t / min(0.01, t / 1000))))
    prev_t = evaluate(n0)
    prev_r = None
    n = n0
    for _ in range(22):
        n *= 2
        cur_t = evaluate(n)
        cur_r = (4 * cur_t - prev_t) / 3
        if prev_r is not None:
            scale = max(abs(cur_r), 1e-300)
            if abs(cur_r - prev_r) / scale < 1e-9:
                return cur_r
        prev_t, prev_r = cur_t, cur_r
    raise QuadratureError("scheduler quadrature did not reach the error target")


def scheduled_norm_power_law_log_form(lam, sigma, eta: float, z0: StateVector, t) -> np.ndarray:
    """Explicit SHGD law for eta_t = 1/(t+1) on a coordinate with 2 lam^2 = 1:
    (||Z0||^2/2 + eta sigma^2 lam^2 log(t+1)) / (t+1)."""
    lam_v, sig_v, half = _bilinear_args(lam, sigma, z0)
    if not np.allclose(2 * lam_v ** 2, 1.0):
        raise InvalidInput("log form requires 2 lam^2 = 1")
    t = np.asarray(t, dtype=float)[..., None]
    return np.sum((half + eta * sig_v ** 2 * lam_v ** 2 * np.log(t + 1)) / (t + 1), axis=-1)


def scheduler_converges(method: Method, eta_sched: Scheduler,
                        rho_sched: Scheduler | None = None) -> bool:
    """Exact power-law predicate, evaluated on the exponents.

    SHGD needs int eta = inf and eta_t -> 0:           0 < gamma <= 1.
    SEG needs int eta rho = inf, eta rho -> 0, and
    eta/rho -> 0:        0 < gamma + gamma_rho <= 1 and gamma > gamma_rho."""
    g = eta_sched.exponent
    if method is Method.SHGD or method is Method.SGDA:
        return 0 < g <= 1
    gr = (rho_sched or Scheduler.constant()).exponent
    return 0 < g + gr <= 1 and g > gr


# ---------------------------------------------------------------------------
# predicates, optimal rho, bounds


def seg_convergence_predicate_quadratic(p: QuadraticGameParams):
    """(converges_i, faster_than_sgda_i): E[Z_t] -> 0 iff
    rho (a_i^2 - lam_i^2) - a_i < 0; the rho term alone says whether SEG's
    decay beats SGDA's."""
    a, lam, rho = p.a.entries, p.lam.entries, p.rho
    shift = rho * (a ** 2 - lam ** 2)
    return shift - a < 0, shift < 0


def _golden_section(f, lo: float, hi: float, tol: float = 1e-10) -> float:
    invphi = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def optimal_rho(p: QuadraticGameParams, objective: RhoObjective):
    a, lam = p.a.entries, p.lam.entries

    if objective is RhoObjective.PER_COORDINATE_VARIANCE:
        denom = a + lam
        for i, dv in enumerate(denom):
            if dv == 0:
                raise Degenerate(f"a_i + lam_i = 0 at coordinate {i}", coordinate=i)
        return 1.0 / denom

    if objective is RhoObjective.MATCH_SHGD_DECAY:
        denom = lam ** 2 - a ** 2
        for i, dv in enumerate(denom):
            if dv == 0:
                raise Degenerate(f"lam_i^2 = a_i^2 at coordinate {i}", coordinate=i)
        return (a ** 2 + lam ** 2 - a) / denom

    # trace of B over the convergent rho-interval
    if np.all(a == 0):
        if np.any(lam == 0):
            raise Degenerate("zero coupling coordinate", coordinate=int(np.argmin(lam)))
        return float(np.sqrt(np.mean(1.0 / lam ** 2)))
    lo, hi = -np.inf, np.inf
    for ai, li in zip(a, lam):
        c = li ** 2 - ai ** 2
        if c > 0:
            lo = max(lo, -ai / c)
        elif c < 0:
            hi = min(hi, -ai / c)
        elif ai <= 0:
            raise Degenerate("no convergent rho interval")
    if lo >= hi:
        raise Degenerate("empty convergent rho interval")

    def trace_b(rho):
        q = QuadraticGameParams(p.a, p.lam, p.sigma, p.eta, float(rho))
        return float(np.sum(seg_asymptotic_variance_factor(q)))

    # bracket a finite interval: B blows up at finite boundaries and grows
    # linearly towards infinite ones
    width = 1.0
    flo = lo if np.isfinite(lo) else None
    fhi = hi if np.isfinite(hi) else None
    mid = 0.0
    if flo is not None and fhi is not None:
        return _golden_section(trace_b, lo + 1e-12 * max(1, abs(lo)), hi - 1e-12 * max(1, abs(hi)))
    if flo is not None:
        mid = lo + width
    elif fhi is not None:
        mid = hi - width
    while True:
        cand_lo = lo + 1e-12 * max(1, abs(lo)) if flo is not None else mid - width
        cand_hi = hi - 1e-12 * max(1, abs(hi)) if fhi is not None else mid + width
        if trace_b(cand_lo) > trace_b(mid) < trace_b(cand_hi):
            return _golden_section(trace_b, cand_lo, cand_hi)
        width *= 2
        if width > 1e12:
            raise Degenerate("could not bracket the trace minimizer")


def hamiltonian_bound(b: BoundParams, regime: BoundRegime, eta: float, t) -> np.ndarray:
    """Upper bound on E[H_t] from the Hamiltonian-descent analysis."""
    t = np.asarray(t, dtype=float)
    mu2 = 2 * b.mu ** 2
    lvlt = eta * b.L_V * b.L_T
    if regime is BoundRegime.SCALING:
        return b.H0 * np.exp((-mu2 + lvlt) * t)
    if regime is BoundRegime.BOUNDED:
        e = np.exp(-mu2 * t)
        return b.H0 * e + (1 - e) * lvlt / mu2
    if b.alpha == 1.0:
        warnings.warn("alpha = 1 has no general-alpha form; using the scaling regime")
        return b.H0 * np.exp((-mu2 + lvlt) * t)
    alpha = b.alpha
    e = np.exp((alpha - 1) * mu2 * t)
    r0 = b.H0
    inner = (r0 ** (-alpha) * e * (mu2 * r0 - lvlt * r0 ** alpha) + lvlt) / mu2
    return inner ** (1.0 / (1.0 - alpha))


def seg_mu_rho(l: Landscape, rho: float, z: StateVector) -> float:
    """Smallest absolute eigenvalue of the block-diagonal curvature matrix M."""
    l._check_state(z)
    H = np.asarray(l.hessian_z(z.z))
    d = l.d
    hxx, hxy, hyy = H[:d, :d], H[:d, d:], H[d:, d:]
    m11 = hxx + rho * (hxy @ hxy.T - hxx @ hxx)
    m22 = -hyy + rho * (hxy @ hxy.T - hyy @ hyy)
    eigs = np.concatenate([np.linalg.eigvals(m11), np.linalg.eigvals(m22)])
    return float(np.min(np.abs(eigs)))


def _hessian_of_hamiltonian(l: Landscape, Z: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """grad^2 H by central differences of grad H (exact for quadratic games)."""
    from .landscapes import Quadratic
    if isinstance(l, Quadratic):
        J = l.jacobian_z(Z[..., 0, :] if Z.ndim > 1 else Z)
        J = np.asarray(J)
        if J.ndim > 2:
            J = J[0]
        return np.broadcast_to(J.T @ J, Z.shape[:-1] + J.shape)
    dim = Z.shape[-1]
    out = np.empty(Z.shape[:-1] + (dim, dim))
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = step
        out[..., :, j] = (l.grad_hamiltonian_z(Z + e) - l.grad_hamiltonian_z(Z - e)) / (2 * step)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def hamiltonian_ode_rhs(method: Method, l: Landscape, eta: float, rho: float,
                        z_samples) -> float:
    """Monte Carlo estimate of d/dt E[H_t] at the empirical state
    distribution: -E[||grad H||^2] (+ SEG drift correction) plus the noise
    injection term Tr(Sigma grad^2 H) eta / 2."""
    Z = np.stack([s.z if isinstance(s, StateVector) else np.asarray(s, dtype=float)
                  for s in z_samples])
    if Z.shape[0] == 0:
        raise InvalidInput("z_samples must be non-empty")
    grad_h = l.grad_hamiltonian_z(Z)
    if method is Method.SHGD:
        drift_term = -np.mean(np.sum(grad_h * grad_h, axis=-1))
        model = build_shgd_sde(l, eta, Sampling.SAME_SAMPLE)
    else:
        F = l.field_z(Z)
        J = l.jacobian_z(Z)
        f_seg = F - rho * np.einsum("...ij,...j->...i", J, F)
        drift_term = -np.mean(np.sum(grad_h * f_seg, axis=-1))
        model = build_seg_sde(l, eta, rho, Sampling.SAME_SAMPLE)
    if l.noise.kind is NoiseKind.NONE:
        return float(drift_term)
    D = np.asarray(model.diffusion(Z))
    D = np.broadcast_to(D, Z.shape + (Z.shape[-1],))
    hess_h = _hessian_of_hamiltonian(l, Z)
    # (eta/2) Tr(Sigma hess H) with eta Sigma = D D'
    noise_term = 0.5 * np.mean(np.einsum("...ij,...kj,...ik->...", D, D, hess_h))
    return float(drift_term + noise_term)
