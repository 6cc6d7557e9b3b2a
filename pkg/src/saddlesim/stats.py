"""Monte Carlo moment estimation and diagnostics: per-checkpoint means with
standard errors, weak-error comparison between a discrete method and an SDE
model, log-log order fitting, and linear variance-growth fitting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import GridMismatch, InvalidInput, StatisticMismatch
from .optimizers import Trajectory


Statistic = Callable[[np.ndarray], np.ndarray]


def half_sq_norm(Z: np.ndarray) -> np.ndarray:
    return 0.5 * np.sum(Z ** 2, axis=-1)


def sq_norm(Z: np.ndarray) -> np.ndarray:
    return np.sum(Z ** 2, axis=-1)


def coordinate(index: int) -> Statistic:
    def stat(Z: np.ndarray) -> np.ndarray:
        return Z[..., index]
    stat.__name__ = f"coordinate_{index}"
    return stat


def make_hamiltonian_statistic(landscape) -> Statistic:
    def stat(Z: np.ndarray) -> np.ndarray:
        return landscape.hamiltonian_z(Z)
    stat.__name__ = "hamiltonian"
    return stat


STATISTICS: dict[str, Statistic] = {
    "half_sq_norm": half_sq_norm,
    "sq_norm": sq_norm,
    "x0": coordinate(0),
}


@dataclass(frozen=True)
class MomentSeries:
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    statistic: str
    n_runs: int
    truncated: bool = False

    def __post_init__(self):
        if self.n_runs < 2:
            raise InvalidInput("need at least 2 runs for a standard error")
        if not (len(self.times) == len(self.mean) == len(self.stderr)):
            raise InvalidInput("times, mean, stderr must align")


def estimate_moments_array(times: np.ndarray, states: np.ndarray,
                           diverged_at: np.ndarray | None,
                           g: Statistic, name: str | None = None) -> MomentSeries:
    """Moments from a batch array of shape (n_runs, n_rec, 2d).

    Runs that diverged contribute only up to their last finite record; the
    series is truncated to the shortest valid prefix and flagged."""
    n_runs, n_rec = states.shape[0], states.shape[1]
    if n_runs < 2:
        raise InvalidInput("need at least 2 runs")
    valid = n_rec
    truncated = False
    if diverged_at is not None:
        div = np.asarray(diverged_at)
        hit = div >= 0
        if np.any(hit):
            truncated = True
            valid = int(min(valid, np.min(div[hit])))
            if valid < 1:
                raise InvalidInput("every checkpoint has a diverged run")
    vals = g(states[:, :valid])
    mean = np.mean(vals, axis=0)
    stderr = np.std(vals, axis=0, ddof=1) / np.sqrt(n_runs)
    return MomentSeries(np.asarray(times[:valid]), mean, stderr,
                        name or getattr(g, "__name__", "statistic"), n_runs, truncated)


def estimate_moments(trajectories: Sequence[Trajectory], g: Statistic,
                     name: str | None = None) -> MomentSeries:
    if len(trajectories) < 2:
        raise InvalidInput("need at least 2 trajectories")
    ref = trajectories[0].step_times
    for tr in trajectories[1:]:
        if len(tr.step_times) != len(ref) or not np.array_equal(tr.step_times, ref):
            raise GridMismatch("trajectories do not share a time grid")
    states = np.stack([tr.states for tr in trajectories])
    div = np.array([tr.diverged_at if tr.diverged_at is not None else -1
                    for tr in trajectories])
    return estimate_moments_array(ref, states, div, g, name)


@dataclass(frozen=True)
class WeakErrorResult:
    error: float
    stderr: float
    time: float
    statistic: str
    interpolated: bool = False


def weak_error(algo: MomentSeries, sde: MomentSeries) -> WeakErrorResult:
    """max_t |E g(algo) - E g(sde)| over the discrete checkpoints, with the
    combined standard error at the maximizing time. SDE means are linearly
    interpolated when the grids differ (flagged)."""
    if algo.statistic != sde.statistic:
        raise StatisticMismatch(f"{algo.statistic!r} vs {sde.statistic!r}")
    interpolated = False
    if len(algo.times) == len(sde.times) and np.array_equal(algo.times, sde.times):
        sde_mean, sde_err = sde.mean, sde.stderr
        times = algo.times
        algo_mean, algo_err = algo.mean, algo.stderr
    else:
        lo, hi = sde.times[0], sde.times[-1]
        keep = (algo.times >= lo - 1e-12) & (algo.times <= hi + 1e-12)
        if not np.any(keep):
            raise GridMismatch("no overlapping time range")
        times = algo.times[keep]
        algo_mean, algo_err = algo.mean[keep], algo.stderr[keep]
        sde_mean = np.interp(times, sde.times, sde.mean)
        sde_err = np.interp(times, sde.times, sde.stderr)
        interpolated = True
    diff = np.abs(algo_mean - sde_mean)
    k = int(np.argmax(diff))
    combined = float(np.hypot(algo_err[k], sde_err[k]))
    return WeakErrorResult(float(diff[k]), combined, float(times[k]),
                           algo.statistic, interpolated)


def order_fit(etas: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(eta)."""
    etas = np.asarray(etas, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if etas.size != errors.size or etas.size < 2:
        raise InvalidInput("need matching lists of at least 2 points")
    if np.any(etas <= 0) or np.any(errors <= 0):
        raise InvalidInput("stepsizes and errors must be positive")
    slope, _ = np.polyfit(np.log(etas), np.log(errors), 1)
    return float(slope)


def linear_variance_fit(series: MomentSeries, burn_in: float = 0.0) -> tuple[float, float]:
    """(slope, intercept) of a straight-line fit to the mean after burn_in."""
    keep = series.times >= burn_in
    if int(np.sum(keep)) < 10:
        raise InvalidInput("need at least 10 checkpoints after burn-in")
    slope, intercept = np.polyfit(series.times[keep], series.mean[keep], 1)
    return float(slope), float(intercept)
