"""Drift/diffusion builders for the continuous-time models of each method,
plus Euler-Maruyama integration.

Per-method models (additive gradient noise, covariance Sigma = diag(sigma^2)
on each block):

  SGDA:  dZ = -F dt + sqrt(eta Sigma) dW
  SEG:   dZ = -(F - rho gradF F) dt + (I - rho gradF) sqrt(eta Sigma) dW
         (same-sample; independent samples drop the (I - rho gradF) factor)
  SHGD:  dZ = -grad H dt + c hess(f) sqrt(Sigma) dW,
         c = sqrt(eta) same-sample, sqrt(eta/2) independent
  SEG with rho = O(eta): identical to the SGDA model.

Matrix-entry noise on the bilinear game uses the exactly computed
state-dependent covariances instead.

Drift and diffusion are array-first: they take stacked states (n, 2d) and an
optional time argument (only scheduled models depend on it).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import DIVERGENCE_THRESHOLD, RngStream, StateVector, psd_sqrt, psd_sqrt_stacked
from .errors import InvalidInput, UnsupportedNoise
from .landscapes import Landscape, NoiseKind, Quadratic
from .optimizers import Sampling, Scheduler, Trajectory


class SdeLabel(enum.Enum):
    SGDA_SDE = "sgda_sde"
    SEG_SDE = "seg_sde"
    SEG_SMALL_RHO_SDE = "seg_small_rho_sde"
    SHGD_SDE = "shgd_sde"


@dataclass(frozen=True)
class SdeModel:
    label: SdeLabel
    d: int
    eta: float
    rho: float
    sampling: Sampling
    # rho-parameterized kernels; schedulers rescale rho through these
    drift_rho: Callable[[np.ndarray, float], np.ndarray]
    diffusion_rho: Callable[[np.ndarray, float], np.ndarray]
    eta_sched: Scheduler | None = None
    rho_sched: Scheduler | None = None

    @property
    def time_dependent(self) -> bool:
        return self.eta_sched is not None

    def drift(self, Z, t: float = 0.0) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        if self.eta_sched is None:
            return self.drift_rho(Z, self.rho)
        return self.eta_sched(t) * self.drift_rho(Z, self.rho * self.rho_sched(t))

    def diffusion(self, Z, t: float = 0.0) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        if self.eta_sched is None:
            return self.diffusion_rho(Z, self.rho)
        return self.eta_sched(t) * self.diffusion_rho(Z, self.rho * self.rho_sched(t))

    def drift_state(self, z: StateVector, t: float = 0.0) -> StateVector:
        return StateVector.from_z(self.drift(z.z, t))


def _sigma_full(l: Landscape) -> np.ndarray:
    sig = l.noise.sigma.entries
    return np.concatenate([sig, sig])


def _split_eta(eta) -> tuple[float, np.ndarray | float]:
    """Vector stepsizes eta_vec are factored as eta_bar * unit_schedule."""
    eta = np.asarray(eta, dtype=float)
    if np.any(eta <= 0):
        raise InvalidInput("eta must be positive")
    if eta.ndim == 0:
        return float(eta), 1.0
    eta_bar = float(np.mean(eta))
    return eta_bar, eta / eta_bar


def _diag_stacked(vals: np.ndarray) -> np.ndarray:
    """diag over the last axis: (..., m) -> (..., m, m)."""
    m = vals.shape[-1]
    out = np.zeros(vals.shape + (m,))
    idx = np.arange(m)
    out[..., idx, idx] = vals
    return out


def _require_supported(l: Landscape):
    if l.noise.kind is NoiseKind.MATRIX_ENTRY:
        if not (isinstance(l, Quadratic) and l.is_bilinear):
            raise UnsupportedNoise("matrix-entry noise SDE requires the bilinear game")


def build_sgda_sde(l: Landscape, eta) -> SdeModel:
    _require_supported(l)
    eta_bar, unit = _split_eta(eta)
    kind = l.noise.kind
    d = l.d

    def drift(Z, rho):
        return -unit * l.field_z(Z)

    if kind is NoiseKind.NONE:
        zero = np.zeros((2 * d, 2 * d))

        def diffusion(Z, rho):
            return zero
    elif kind is NoiseKind.ADDITIVE_GRADIENT:
        const = np.asarray(unit)[..., None] * psd_sqrt(eta_bar * np.diag(_sigma_full(l) ** 2))

        def diffusion(Z, rho):
            return const
    else:
        sig = l.noise.sigma.entries

        def diffusion(Z, rho):
            # Sigma(z) = diag(sigma^2 y^2, sigma^2 x^2)
            x, y = Z[..., :d], Z[..., d:]
            vals = np.sqrt(eta_bar) * np.concatenate([sig * np.abs(y), sig * np.abs(x)], axis=-1)
            return _diag_stacked(vals)

    return SdeModel(SdeLabel.SGDA_SDE, d, eta_bar, 0.0, Sampling.SAME_SAMPLE, drift, diffusion)


def build_seg_small_rho_sde(l: Landscape, eta) -> SdeModel:
    """In the rho = O(eta) regime the SEG model coincides with SGDA's."""
    base = build_sgda_sde(l, eta)
    return SdeModel(SdeLabel.SEG_SMALL_RHO_SDE, base.d, base.eta, 0.0,
                    Sampling.SAME_SAMPLE, base.drift_rho, base.diffusion_rho)


def _seg_matrix_cov(l: Quadratic, Z: np.ndarray, rho: float) -> np.ndarray:
    """Exact covariance of the SEG field-estimate error under matrix-entry
    noise with independent lookahead/update samples, as d-fold 2x2 blocks."""
    d = l.d
    lam, sig = l.lam.entries, l.noise.sigma.entries
    x, y = Z[..., :d], Z[..., d:]
    s2 = sig ** 2
    w = rho ** 2 * s2 * (2 * lam ** 2 + s2)
    s11 = s2 * (y * y) + 2 * rho * lam * s2 * x * y + w * x * x
    s22 = s2 * (x * x) - 2 * rho * lam * s2 * x * y + w * y * y
    s12 = -s2 * x * y + rho * lam * s2 * (y * y - x * x) + w * x * y
    out = np.zeros(Z.shape[:-1] + (2 * d, 2 * d))
    idx = np.arange(d)
    out[..., idx, idx] = s11
    out[..., d + idx, d + idx] = s22
    out[..., idx, d + idx] = s12
    out[..., d + idx, idx] = s12
    return out


def build_seg_sde(l: Landscape, eta, rho: float, sampling: Sampling) -> SdeModel:
    _require_supported(l)
    eta_bar, unit = _split_eta(eta)
    if np.ndim(unit):
        raise InvalidInput("coordinate-wise stepsizes are only supported for SGDA")
    kind = l.noise.kind
    d = l.d

    def drift(Z, rho_t):
        # F_seg = F - rho gradF F (exact mean of the lookahead field here)
        F = l.field_z(Z)
        J = l.jacobian_z(Z)
        return -(F - rho_t * np.einsum("...ij,...j->...i", J, F))

    if kind is NoiseKind.NONE:
        zero = np.zeros((2 * d, 2 * d))

        def diffusion(Z, rho_t):
            return zero
    elif kind is NoiseKind.ADDITIVE_GRADIENT:
        base = psd_sqrt(eta_bar * np.diag(_sigma_full(l) ** 2))
        if sampling is Sampling.SAME_SAMPLE:
            eye = np.eye(2 * d)

            def diffusion(Z, rho_t):
                J = l.jacobian_z(Z)
                return (eye - rho_t * J) @ base
        else:

            def diffusion(Z, rho_t):
                return base
    else:

        def diffusion(Z, rho_t):
            return psd_sqrt_stacked(eta_bar * _seg_matrix_cov(l, Z, rho_t))

    return SdeModel(SdeLabel.SEG_SDE, d, eta_bar, float(rho), sampling, drift, diffusion)


def build_shgd_sde(l: Landscape, eta, sampling: Sampling) -> SdeModel:
    _require_supported(l)
    eta_bar, unit = _split_eta(eta)
    if np.ndim(unit):
        raise InvalidInput("coordinate-wise stepsizes are only supported for SGDA")
    kind = l.noise.kind
    d = l.d

    def drift(Z, rho):
        return -l.grad_hamiltonian_z(Z)

    if kind is NoiseKind.NONE:
        zero = np.zeros((2 * d, 2 * d))

        def diffusion(Z, rho):
            return zero
    elif kind is NoiseKind.ADDITIVE_GRADIENT:
        c = np.sqrt(eta_bar if sampling is Sampling.SAME_SAMPLE else eta_bar / 2)
        sig_full = _sigma_full(l)

        def diffusion(Z, rho):
            H = l.hessian_z(Z)
            return c * H * sig_full  # H @ diag(sigma)
    else:
        lam, sig = l.lam.entries, l.noise.sigma.entries
        coef = sig ** 2 * (2 * lam ** 2 + sig ** 2)

        def diffusion(Z, rho):
            # cov of grad H error: coef_i * [[x^2, xy], [xy, y^2]] per coordinate
            x, y = Z[..., :d], Z[..., d:]
            out = np.zeros(Z.shape[:-1] + (2 * d, 2 * d))
            idx = np.arange(d)
            out[..., idx, idx] = coef * x * x
            out[..., d + idx, d + idx] = coef * y * y
            out[..., idx, d + idx] = coef * x * y
            out[..., d + idx, idx] = coef * x * y
            return psd_sqrt_stacked(eta_bar * out)

    return SdeModel(SdeLabel.SHGD_SDE, d, eta_bar, 0.0, sampling, drift, diffusion)


def scheduled_sde(m: SdeModel, eta_sched: Scheduler, rho_sched: Scheduler | None = None) -> SdeModel:
    """Time-dependent variant: drift and diffusion are both scaled by
    eta_sched(t), and the extrapolation stepsize by rho_sched(t)."""
    return SdeModel(m.label, m.d, m.eta, m.rho, m.sampling, m.drift_rho, m.diffusion_rho,
                    eta_sched=eta_sched, rho_sched=rho_sched or Scheduler.constant())


def _apply_diffusion(diff: np.ndarray, g: np.ndarray) -> np.ndarray:
    # diff broadcastable to (n, 2d, 2d), g of shape (n, 2d)
    return np.matmul(diff, g[..., None])[..., 0]


def euler_maruyama(m: SdeModel, z0: StateVector, dt: float, steps: int,
                   rng: RngStream) -> Trajectory:
    """z_{k+1} = z_k + dt b(z_k, k dt) + sqrt(dt) sigma(z_k, k dt) g_k."""
    if dt <= 0 or steps < 1:
        raise InvalidInput("dt must be positive and steps >= 1")
    dim = 2 * m.d
    states = np.empty((steps + 1, dim))
    states[0] = z0.z
    Z = z0.z[None, :]
    sqdt = np.sqrt(dt)
    diverged_at = None
    for k in range(steps):
        t = k * dt
        g = rng.standard_normal(dim)[None, :]
        Z = Z + dt * m.drift(Z, t) + sqdt * _apply_diffusion(m.diffusion(Z, t), g)
        states[k + 1] = Z[0]
        if not (np.all(np.isfinite(Z)) and np.all(np.abs(Z) < DIVERGENCE_THRESHOLD)):
            diverged_at = k + 1
            states = states[:k + 2]
            break
    times = dt * np.arange(states.shape[0])
    return Trajectory(states=states, step_times=times, diverged_at=diverged_at)


def euler_maruyama_batch(m: SdeModel, z0: StateVector, dt: float, steps: int,
                         base_seed: int, n_runs: int, record_every: int = 1,
                         run_offset: int = 0):
    """Vectorized Euler-Maruyama over runs; per-run noise replays exactly the
    sequence euler_maruyama consumes from RngStream(base_seed, run_index)."""
    if dt <= 0 or steps < 1:
        raise InvalidInput("dt must be positive and steps >= 1")
    dim = 2 * m.d
    streams = [RngStream(base_seed, run_offset + r) for r in range(n_runs)]
    n_rec = steps // record_every + 1
    out = np.empty((n_runs, n_rec, dim))
    out[:, 0] = z0.z
    Z = np.broadcast_to(z0.z, (n_runs, dim)).copy()
    sqdt = np.sqrt(dt)
    chunk = max(1, min(steps, int(4e6 // max(1, n_runs * dim))))
    rec = 1
    with np.errstate(over="ignore", invalid="ignore"):
        for start in range(0, steps, chunk):
            stop = min(steps, start + chunk)
            flat = np.stack([s.standard_normal((stop - start) * dim) for s in streams])
            g_all = flat.reshape(n_runs, stop - start, dim)
            for k in range(start, stop):
                t = k * dt
                Z = Z + dt * m.drift(Z, t) + sqdt * _apply_diffusion(m.diffusion(Z, t), g_all[:, k - start])
                if (k + 1) % record_every == 0:
                    out[:, rec] = Z
                    rec += 1
    times = dt * record_every * np.arange(n_rec)
    bad = ~np.all(np.isfinite(out) & (np.abs(out) < DIVERGENCE_THRESHOLD), axis=2)
    diverged_at = np.where(bad.any(axis=1), bad.argmax(axis=1), -1)
    return times, out, diverged_at
