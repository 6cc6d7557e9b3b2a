"""Discrete-time updates: gradient descent-ascent (SGDA), stochastic
extragradient (SEG) with same-sample or independent-sample lookahead, and
stochastic Hamiltonian gradient descent (SHGD), plus stepsize schedulers.

run_optimizer integrates a single trajectory from one RngStream;
run_optimizer_batch replays exactly the same per-run noise sequences but
vectorizes the state update across runs, so Monte Carlo sweeps stay fast
without changing a single drawn number.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .core import DIVERGENCE_THRESHOLD, RngStream, StateVector
from .errors import InvalidInput
from .landscapes import Landscape, NoiseKind


class SchedulerKind(enum.Enum):
    CONSTANT = "constant"
    POWER_LAW = "power_law"


@dataclass(frozen=True)
class Scheduler:
    """Multiplicative stepsize schedule: 1 for Constant, (t+1)^-gamma for PowerLaw."""

    kind: SchedulerKind = SchedulerKind.CONSTANT
    gamma: float = 0.0

    def __post_init__(self):
        if self.gamma < 0:
            raise InvalidInput("scheduler exponent gamma must be >= 0")

    @property
    def exponent(self) -> float:
        return self.gamma if self.kind is SchedulerKind.POWER_LAW else 0.0

    def __call__(self, t):
        g = self.exponent
        if g == 0.0:
            return np.ones_like(np.asarray(t, dtype=float)) if np.ndim(t) else 1.0
        return (np.asarray(t, dtype=float) + 1.0) ** (-g)

    @classmethod
    def constant(cls) -> "Scheduler":
        return cls(SchedulerKind.CONSTANT, 0.0)

    @classmethod
    def power_law(cls, gamma: float) -> "Scheduler":
        return cls(SchedulerKind.POWER_LAW, gamma)


class Method(enum.Enum):
    SGDA = "sgda"
    SEG = "seg"
    SHGD = "shgd"


class Sampling(enum.Enum):
    SAME_SAMPLE = "same_sample"
    INDEPENDENT_SAMPLE = "independent_sample"


@dataclass(frozen=True)
class OptimizerConfig:
    method: Method
    eta: float | np.ndarray
    rho: float = 0.0
    eta_sched: Scheduler = dc_field(default_factory=Scheduler.constant)
    rho_sched: Scheduler = dc_field(default_factory=Scheduler.constant)
    sampling: Sampling = Sampling.SAME_SAMPLE

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        if np.any(eta <= 0):
            raise InvalidInput("eta must be positive")
        if eta.ndim > 0 and self.method is not Method.SGDA:
            raise InvalidInput("coordinate-wise stepsizes are only supported for SGDA")

    @property
    def eta_scalar(self) -> float:
        """Scalar stepsize used as the scheduler time unit (mean for vector eta)."""
        return float(np.mean(self.eta))


@dataclass
class Trajectory:
    """States of one run: states[k] is z_k flattened to length 2d."""

    states: np.ndarray       # (n_recorded, 2d)
    step_times: np.ndarray   # (n_recorded,)
    diverged_at: int | None = None

    @property
    def d(self) -> int:
        return self.states.shape[-1] // 2

    def state(self, k: int) -> StateVector:
        return StateVector.from_z(self.states[k])


def _finite(z: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(z)) and np.all(np.abs(z) < DIVERGENCE_THRESHOLD))


# ---------------------------------------------------------------------------
# single steps (StateVector-in, StateVector-out)


def sgda_step(l: Landscape, z: StateVector, eta_k, rng: RngStream) -> StateVector:
    tag = l.draw_tag(rng)
    return StateVector.from_z(z.z - np.asarray(eta_k) * l.sample_field_z(z.z, tag))


def seg_step(l: Landscape, z: StateVector, eta_k: float, rho_k: float,
             sampling: Sampling, rng: RngStream) -> StateVector:
    # lookahead sample gamma^2 is drawn (and used) first, then gamma^1
    tag2 = l.draw_tag(rng)
    tag1 = tag2 if sampling is Sampling.SAME_SAMPLE else l.draw_tag(rng)
    z_tilde = z.z - rho_k * l.sample_field_z(z.z, tag2)
    return StateVector.from_z(z.z - eta_k * l.sample_field_z(z_tilde, tag1))


def shgd_step(l: Landscape, z: StateVector, eta_k: float,
              sampling: Sampling, rng: RngStream) -> StateVector:
    tag1 = l.draw_tag(rng)
    tag2 = tag1 if sampling is Sampling.SAME_SAMPLE else l.draw_tag(rng)
    f1 = l.sample_field_z(z.z, tag1)
    f2 = l.sample_field_z(z.z, tag2)
    j1 = l.sample_jacobian_z(z.z, tag1)
    j2 = l.sample_jacobian_z(z.z, tag2)
    grad_h = 0.5 * (np.einsum("ji,j->i", j1, f2) + np.einsum("ji,j->i", j2, f1))
    return StateVector.from_z(z.z - eta_k * grad_h)


def run_optimizer(l: Landscape, cfg: OptimizerConfig, z0: StateVector,
                  steps: int, rng: RngStream) -> Trajectory:
    """Iterate the configured method for `steps` updates.

    Schedulers are evaluated in the continuous time unit t = k * eta so the
    discrete schedule matches what the analytic scheduler formulas integrate.
    """
    if steps < 1:
        raise InvalidInput("steps must be >= 1")
    l._check_state(z0)
    eta0 = cfg.eta_scalar
    states = np.empty((steps + 1, 2 * l.d))
    states[0] = z0.z
    z = z0
    diverged_at = None
    for k in range(steps):
        t = k * eta0
        eta_k = np.asarray(cfg.eta) * cfg.eta_sched(t)
        if cfg.method is Method.SGDA:
            z = sgda_step(l, z, eta_k, rng)
        elif cfg.method is Method.SEG:
            rho_k = cfg.rho * cfg.rho_sched(t)
            z = seg_step(l, z, float(eta_k), rho_k, cfg.sampling, rng)
        else:
            z = shgd_step(l, z, float(eta_k), cfg.sampling, rng)
        states[k + 1] = z.z
        if not _finite(z.z):
            diverged_at = k + 1
            states = states[:k + 2]
            break
    times = eta0 * np.arange(states.shape[0])
    return Trajectory(states=states, step_times=times, diverged_at=diverged_at)


# ---------------------------------------------------------------------------
# vectorized multi-run execution


def _tags_per_step(cfg: OptimizerConfig) -> int:
    if cfg.method is Method.SGDA:
        return 1
    return 1 if cfg.sampling is Sampling.SAME_SAMPLE else 2


def _batch_step(l: Landscape, cfg: OptimizerConfig, Z: np.ndarray,
                g: np.ndarray, eta_k, rho_k: float) -> np.ndarray:
    """One update applied to all runs; g has shape (n_runs, tags, n_normals)."""
    d = l.d
    kind = l.noise.kind
    sig = l.noise.sigma.entries

    def field_sample(at, gcol):
        F = l.field_z(at)
        if kind is NoiseKind.NONE:
            return F
        if kind is NoiseKind.ADDITIVE_GRADIENT:
            u = np.concatenate([sig, sig]) * gcol
            return F + np.concatenate([u[:, :d], -u[:, d:]], axis=1)
        xi = sig * gcol
        return F + np.concatenate([xi * at[:, d:], -xi * at[:, :d]], axis=1)

    if cfg.method is Method.SGDA:
        return Z - eta_k * field_sample(Z, g[:, 0])

    if cfg.method is Method.SEG:
        g2 = g[:, 0]
        g1 = g2 if cfg.sampling is Sampling.SAME_SAMPLE else g[:, 1]
        z_tilde = Z - rho_k * field_sample(Z, g2)
        return Z - eta_k * field_sample(z_tilde, g1)

    # SHGD
    g1 = g[:, 0]
    g2 = g1 if cfg.sampling is Sampling.SAME_SAMPLE else g[:, 1]
    f1 = field_sample(Z, g1)
    f2 = field_sample(Z, g2)
    if kind is NoiseKind.MATRIX_ENTRY:
        J = l.jacobian_z(Z)
        xi1, xi2 = sig * g1, sig * g2
        j1 = np.array(np.broadcast_to(J, (Z.shape[0],) + J.shape[-2:]), copy=True)
        j2 = np.array(j1, copy=True)
        idx = np.arange(d)
        j1[:, idx, d + idx] += xi1
        j1[:, d + idx, idx] -= xi1
        j2[:, idx, d + idx] += xi2
        j2[:, d + idx, idx] -= xi2
        grad_h = 0.5 * (np.einsum("nji,nj->ni", j1, f2) + np.einsum("nji,nj->ni", j2, f1))
    else:
        J = np.asarray(l.jacobian_z(Z))
        subs = "ji,nj->ni" if J.ndim == 2 else "nji,nj->ni"
        grad_h = np.einsum(subs, J, 0.5 * (f1 + f2))
    return Z - eta_k * grad_h


def run_optimizer_batch(l: Landscape, cfg: OptimizerConfig, z0: StateVector,
                        steps: int, base_seed: int, n_runs: int,
                        record_every: int = 1, run_offset: int = 0):
    """Run n_runs independent trajectories at once.

    Each run r consumes the noise stream RngStream(base_seed, run_offset + r)
    in exactly the order run_optimizer would, so row r reproduces the serial
    trajectory bit for bit. Returns (times, states, diverged_at) where states
    has shape (n_runs, n_recorded, 2d) and diverged_at[r] is the first
    recorded index with a non-finite state (-1 if none). Divergence is only
    checked at recorded indices here.
    """
    if steps < 1:
        raise InvalidInput("steps must be >= 1")
    l._check_state(z0)
    d = l.d
    eta0 = cfg.eta_scalar
    tags = _tags_per_step(cfg)
    npn = l.normals_per_tag()
    streams = [RngStream(base_seed, run_offset + r) for r in range(n_runs)]

    n_rec = steps // record_every + 1
    out = np.empty((n_runs, n_rec, 2 * d))
    out[:, 0] = z0.z
    Z = np.broadcast_to(z0.z, (n_runs, 2 * d)).copy()

    # chunk the noise pre-generation to bound memory (~4e6 floats per chunk)
    per_step = max(1, tags * npn)
    chunk = max(1, min(steps, int(4e6 // max(1, n_runs * per_step)) or 1))
    rec = 1
    with np.errstate(over="ignore", invalid="ignore"):
        for start in range(0, steps, chunk):
            stop = min(steps, start + chunk)
            n_steps = stop - start
            if npn > 0:
                flat = np.stack([s.standard_normal(n_steps * tags * npn) for s in streams])
                g_all = flat.reshape(n_runs, n_steps, tags, npn)
            else:
                g_all = np.zeros((n_runs, n_steps, tags, 0))
            for k in range(start, stop):
                t = k * eta0
                eta_k = np.asarray(cfg.eta) * cfg.eta_sched(t)
                rho_k = cfg.rho * cfg.rho_sched(t)
                Z = _batch_step(l, cfg, Z, g_all[:, k - start], eta_k, rho_k)
                if (k + 1) % record_every == 0:
                    out[:, rec] = Z
                    rec += 1
    times = eta0 * record_every * np.arange(n_rec)
    bad = ~np.all(np.isfinite(out) & (np.abs(out) < DIVERGENCE_THRESHOLD), axis=2)
    diverged_at = np.where(bad.any(axis=1), bad.argmax(axis=1), -1)
    return times, out, diverged_at
