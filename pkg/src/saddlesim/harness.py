"""Experiment orchestration: text configs, Monte Carlo execution over seeded
runs, delimited result tables with a round-tripping config echo, comparison
and rho-sweep drivers, and the validation suites behind the CLI."""

from __future__ import annotations

import datetime
import importlib.resources
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import analytic, stats
from .core import StateVector
from .errors import ConfigError, GridMismatch, InvalidInput
from .landscapes import (Landscape, NoiseSpec, NonBilinear1, NonBilinear2,
                         NonBilinear3, Quadratic)
from .optimizers import (Method, OptimizerConfig, Sampling, Scheduler,
                         SchedulerKind, run_optimizer_batch)
from .sde import (SdeLabel, build_seg_sde, build_seg_small_rho_sde,
                  build_sgda_sde, build_shgd_sde, euler_maruyama_batch,
                  scheduled_sde)

_LANDSCAPE_KINDS = ("quadratic", "bilinear", "nonbilinear1", "nonbilinear2", "nonbilinear3")
_METHOD_KINDS = ("sgda", "seg", "shgd", "sgda_sde", "seg_sde", "seg_small_rho_sde", "shgd_sde")
_NOISE_KINDS = ("none", "additive", "matrix")
_SAMPLINGS = ("same", "independent")
_SCHEDULERS = ("constant", "power_law")
_STAT_NAMES = ("half_sq_norm", "sq_norm", "norm", "hamiltonian", "x0", "y0")


@dataclass(frozen=True)
class ExperimentConfig:
    landscape_kind: str = "bilinear"
    a: tuple[float, ...] = (0.0,)
    lam: tuple[float, ...] = (1.0,)
    noise_kind: str = "additive"
    sigma: tuple[float, ...] = (1.0,)
    method: str = "sgda"
    eta: tuple[float, ...] = (0.01,)
    rho: float = 0.0
    sampling: str = "same"
    eta_scheduler: str = "constant"
    eta_gamma: float = 0.0
    rho_scheduler: str = "constant"
    rho_gamma: float = 0.0
    dt: float | None = None
    z0: tuple[float, ...] = (1.0, 1.0)
    steps: int | None = None
    horizon: float | None = None
    n_runs: int = 5
    base_seed: int = 0
    record_every: int = 1
    statistics: tuple[str, ...] = ("half_sq_norm",)
    out_path: str | None = None

    def __post_init__(self):
        v = _validate_field
        v("landscape.kind", self.landscape_kind in _LANDSCAPE_KINDS, "unknown landscape")
        v("method.kind", self.method in _METHOD_KINDS, "unknown method")
        v("landscape.noise", self.noise_kind in _NOISE_KINDS, "unknown noise kind")
        v("method.sampling", self.sampling in _SAMPLINGS, "unknown sampling")
        v("method.eta_scheduler", self.eta_scheduler in _SCHEDULERS, "unknown scheduler")
        v("method.rho_scheduler", self.rho_scheduler in _SCHEDULERS, "unknown scheduler")
        v("eta", len(self.eta) > 0 and all(e > 0 for e in self.eta), "eta must be positive")
        v("run.z0", len(self.z0) >= 2 and len(self.z0) % 2 == 0,
          "z0 needs an even number of entries")
        v("run.steps", (self.steps is None) != (self.horizon is None),
          "exactly one of steps/horizon must be given")
        if self.steps is not None:
            v("run.steps", self.steps >= 1, "steps must be >= 1")
        if self.horizon is not None:
            v("run.horizon", self.horizon > 0, "horizon must be positive")
        v("run.n_runs", self.n_runs >= 1, "n_runs must be >= 1")
        v("run.record_every", self.record_every >= 1, "record_every must be >= 1")
        v("method.dt", self.dt is None or self.dt > 0, "dt must be positive")
        d = len(self.z0) // 2
        v("landscape.lam", len(self.lam) in (1, d), "lam length must be 1 or d")
        v("landscape.a", len(self.a) in (1, d), "a length must be 1 or d")
        v("landscape.sigma", len(self.sigma) in (1, d), "sigma length must be 1 or d")
        v("method.eta", len(self.eta) in (1, 2 * d), "eta length must be 1 or 2d")
        if len(self.eta) > 1:
            v("method.eta", self.method == "sgda", "vector stepsizes are SGDA-only")
        for s in self.statistics:
            v("output.statistics", s in _STAT_NAMES, f"unknown statistic {s!r}")
        if self.noise_kind == "matrix":
            v("landscape.noise",
              self.landscape_kind == "bilinear"
              or (self.landscape_kind == "quadratic" and all(x == 0 for x in self.a)),
              "matrix-entry noise requires a bilinear game")

    @property
    def d(self) -> int:
        return len(self.z0) // 2

    @property
    def is_sde(self) -> bool:
        return self.method.endswith("_sde")

    @property
    def eta_scalar(self) -> float:
        return float(np.mean(self.eta))

    def effective_dt(self) -> float:
        return self.dt if self.dt is not None else self.eta_scalar / 10.0

    def effective_steps(self) -> int:
        if self.steps is not None:
            return self.steps
        step = self.effective_dt() if self.is_sde else self.eta_scalar
        n = int(np.ceil(self.horizon / step)) if self.is_sde \
            else int(np.floor(self.horizon / step))
        return max(n, 1)

    def total_time(self) -> float:
        step = self.effective_dt() if self.is_sde else self.eta_scalar
        return self.effective_steps() * step


def _validate_field(name: str, ok: bool, message: str):
    if not ok:
        raise ConfigError(name, message)


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# key -> (attribute, parser)
def _vec(s: str) -> tuple[float, ...]:
    return tuple(float(p) for p in s.split(","))


def _strs(s: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in s.split(","))


_KEYS = {
    "landscape.kind": ("landscape_kind", str),
    "landscape.a": ("a", _vec),
    "landscape.lam": ("lam", _vec),
    "landscape.noise": ("noise_kind", str),
    "landscape.sigma": ("sigma", _vec),
    "method.kind": ("method", str),
    "method.eta": ("eta", _vec),
    "method.rho": ("rho", float),
    "method.sampling": ("sampling", str),
    "method.eta_scheduler": ("eta_scheduler", str),
    "method.eta_gamma": ("eta_gamma", float),
    "method.rho_scheduler": ("rho_scheduler", str),
    "method.rho_gamma": ("rho_gamma", float),
    "method.dt": ("dt", float),
    "run.z0": ("z0", _vec),
    "run.steps": ("steps", int),
    "run.horizon": ("horizon", float),
    "run.n_runs": ("n_runs", int),
    "run.base_seed": ("base_seed", int),
    "run.record_every": ("record_every", int),
    "output.statistics": ("statistics", _strs),
    "output.path": ("out_path", str),
}


def parse_config(text: str) -> ExperimentConfig:
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _KEYS:
            raise ConfigError(key, "unknown key")
        attr, parser = _KEYS[key]
        if attr in fields:
            raise ConfigError(key, "duplicate key")
        try:
            fields[attr] = parser(value)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(key, f"could not parse {value!r}: {exc}") from None
    try:
        return ExperimentConfig(**fields)
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from None


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def load_preset(name: str) -> ExperimentConfig:
    ref = importlib.resources.files("saddlesim").joinpath(f"presets/{name}.cfg")
    if not ref.is_file():
        raise ConfigError("preset", f"no preset named {name!r}")
    return parse_config(ref.read_text(encoding="utf-8"))


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = []
    for key, (attr, _) in _KEYS.items():
        value = getattr(cfg, attr)
        if value is None:
            continue
        if attr == "statistics":
            lines.append(f"{key} = {', '.join(value)}")
        else:
            lines.append(f"{key} = {_fmt(value)}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# execution


def build_landscape(cfg: ExperimentConfig) -> Landscape:
    d = cfg.d
    if cfg.noise_kind == "none":
        noise = NoiseSpec.none(d)
    elif cfg.noise_kind == "additive":
        noise = NoiseSpec.additive(np.resize(cfg.sigma, d), d)
    else:
        noise = NoiseSpec.matrix_entry(np.resize(cfg.sigma, d), d)
    kind = cfg.landscape_kind
    if kind in ("quadratic", "bilinear"):
        a = np.zeros(d) if kind == "bilinear" else np.resize(cfg.a, d)
        return Quadratic(a, np.resize(cfg.lam, d), noise=noise)
    if d != 1:
        raise ConfigError("run.z0", f"{kind} is a two-dimensional game")
    cls = {"nonbilinear1": NonBilinear1, "nonbilinear2": NonBilinear2,
           "nonbilinear3": NonBilinear3}[kind]
    return cls(noise=noise)


def _scheduler(kind: str, gamma: float) -> Scheduler:
    if kind == "constant":
        return Scheduler.constant()
    return Scheduler.power_law(gamma)


def _sampling(cfg: ExperimentConfig) -> Sampling:
    return Sampling.SAME_SAMPLE if cfg.sampling == "same" else Sampling.INDEPENDENT_SAMPLE


def execute(cfg: ExperimentConfig):
    """Run all Monte Carlo repetitions.

    Returns (times, states, diverged_at) with states of shape
    (n_runs, n_recorded, 2d)."""
    l = build_landscape(cfg)
    z0 = StateVector.from_z(np.asarray(cfg.z0, dtype=float))
    steps = cfg.effective_steps()
    eta = cfg.eta[0] if len(cfg.eta) == 1 else np.array(cfg.eta)
    eta_sched = _scheduler(cfg.eta_scheduler, cfg.eta_gamma)
    rho_sched = _scheduler(cfg.rho_scheduler, cfg.rho_gamma)
    if not cfg.is_sde:
        ocfg = OptimizerConfig(method=Method[cfg.method.upper()], eta=eta, rho=cfg.rho,
                               eta_sched=eta_sched, rho_sched=rho_sched,
                               sampling=_sampling(cfg))
        return run_optimizer_batch(l, ocfg, z0, steps, cfg.base_seed, cfg.n_runs,
                                   record_every=cfg.record_every)
    builders = {
        "sgda_sde": lambda: build_sgda_sde(l, eta),
        "seg_small_rho_sde": lambda: build_seg_small_rho_sde(l, eta),
        "seg_sde": lambda: build_seg_sde(l, eta, cfg.rho, _sampling(cfg)),
        "shgd_sde": lambda: build_shgd_sde(l, eta, _sampling(cfg)),
    }
    model = builders[cfg.method]()
    if cfg.eta_scheduler != "constant" or cfg.rho_scheduler != "constant":
        model = scheduled_sde(model, eta_sched, rho_sched)
    return euler_maruyama_batch(model, z0, cfg.effective_dt(), steps,
                                cfg.base_seed, cfg.n_runs, record_every=cfg.record_every)


def resolve_statistic(name: str, l: Landscape) -> stats.Statistic:
    if name == "hamiltonian":
        return stats.make_hamiltonian_statistic(l)
    if name == "norm":
        def norm(Z):
            return np.sqrt(np.sum(Z ** 2, axis=-1))
        norm.__name__ = "norm"
        return norm
    if name == "y0":
        return stats.coordinate(l.d)
    return stats.STATISTICS[name]


def moment_series(cfg: ExperimentConfig, statistic: str | None = None) -> stats.MomentSeries:
    l = build_landscape(cfg)
    times, states, div = execute(cfg)
    name = statistic or cfg.statistics[0]
    return stats.estimate_moments_array(times, states, div, resolve_statistic(name, l), name)


@dataclass
class ResultTable:
    rows: list[tuple[float, str, float, float, int]]
    config: ExperimentConfig | None = None
    extra_header: list[str] = field(default_factory=list)

    def serialize(self) -> str:
        lines = ["# saddlesim result v1"]
        lines.append(f"# timestamp = {datetime.datetime.now(datetime.timezone.utc).isoformat()}")
        if self.config is not None:
            lines += [f"# {ln}" for ln in serialize_config(self.config).splitlines()]
        lines += [f"# {ln}" for ln in self.extra_header]
        lines.append("time,statistic,mean,stderr,n_effective")
        for t, name, mean, err, n in self.rows:
            lines.append(f"{t:.17g},{name},{mean:.17g},{err:.17g},{n}")
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.serialize())

    @classmethod
    def parse(cls, text: str) -> "ResultTable":
        header, rows = [], []
        for line in text.splitlines():
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body and not body.startswith("timestamp"):
                    header.append(body)
            elif line and not line.startswith("time,"):
                t, name, mean, err, n = line.split(",")
                rows.append((float(t), name, float(mean), float(err), int(n)))
        cfg = parse_config("\n".join(header)) if header else None
        return cls(rows, cfg)


def table_from_series(series_list: Sequence[stats.MomentSeries],
                      cfg: ExperimentConfig | None = None,
                      labels: Sequence[str] | None = None) -> ResultTable:
    rows = []
    for k, series in enumerate(series_list):
        label = labels[k] if labels else series.statistic
        for t, m, e in zip(series.times, series.mean, series.stderr):
            rows.append((float(t), label, float(m), float(e), series.n_runs))
    return ResultTable(rows, cfg)


def run_experiment(cfg: ExperimentConfig) -> ResultTable:
    l = build_landscape(cfg)
    times, states, div = execute(cfg)
    rows = []
    for name in cfg.statistics:
        g = resolve_statistic(name, l)
        if cfg.n_runs == 1:
            vals = g(states[0])
            for t, v in zip(times, vals):
                rows.append((float(t), name, float(v), 0.0, 1))
        else:
            series = stats.estimate_moments_array(times, states, div, g, name)
            for t, m, e in zip(series.times, series.mean, series.stderr):
                rows.append((float(t), name, float(m), float(e), cfg.n_runs))
    table = ResultTable(rows, cfg)
    if cfg.out_path:
        table.save(cfg.out_path)
    return table


def compare(cfgs: Sequence[ExperimentConfig], statistic: str = "half_sq_norm") -> ResultTable:
    """Aligned per-config moment curves plus pairwise weak-error summary rows."""
    if not cfgs:
        raise InvalidInput("need at least one config")
    ref = cfgs[0]
    for cfg in cfgs[1:]:
        same_game = (cfg.landscape_kind == ref.landscape_kind and cfg.a == ref.a
                     and cfg.lam == ref.lam and cfg.noise_kind == ref.noise_kind
                     and cfg.sigma == ref.sigma)
        if not same_game:
            raise GridMismatch("configs must share the landscape")
        if abs(cfg.total_time() - ref.total_time()) > 1e-9 * max(1.0, ref.total_time()):
            raise GridMismatch("configs must share the horizon")
    series = [moment_series(cfg, statistic) for cfg in cfgs]
    labels = [f"{statistic}[{i}:{cfg.method}]" for i, cfg in enumerate(cfgs)]
    table = table_from_series(series, ref, labels)
    for i in range(len(cfgs)):
        for j in range(i + 1, len(cfgs)):
            we = stats.weak_error(series[i], series[j])
            table.rows.append((we.time, f"weak_error[{i},{j}]", we.error, we.stderr,
                               min(series[i].n_runs, series[j].n_runs)))
    return table


def sweep_rho(base: ExperimentConfig, rhos: Sequence[float]) -> ResultTable:
    """Per-rho tail variance against the stationary formula.

    The empirical estimate averages the across-run per-coordinate variance
    over the last 10% of checkpoints; rows flag divergence and tails shorter
    than 5 mixing times of the slowest coordinate."""
    if len(rhos) == 0:
        raise InvalidInput("need at least one rho")
    if base.landscape_kind not in ("quadratic", "bilinear"):
        raise InvalidInput("rho sweeps compare against the quadratic-game formula")
    if base.method != "seg":
        raise InvalidInput("rho sweeps drive the SEG optimizer")
    d = base.d
    a = np.resize(base.a, d) if base.landscape_kind == "quadratic" else np.zeros(d)
    lam = np.resize(base.lam, d)
    sig = np.resize(base.sigma, d)
    rows = []
    for rho in rhos:
        cfg = replace(base, rho=float(rho))
        times, states, div = execute(cfg)
        params = analytic.QuadraticGameParams.of(a, lam, sig, cfg.eta_scalar, float(rho))
        kappa = a + rho * (lam ** 2 - a ** 2)
        converges = bool(np.all(kappa > 0)) and not np.any(np.asarray(div) >= 0)
        rows.append((float(rho), "converges", float(converges), 0.0, cfg.n_runs))
        if not converges:
            series = stats.estimate_moments_array(times, states, div,
                                                  stats.half_sq_norm, "half_sq_norm")
            try:
                slope, _ = stats.linear_variance_fit(series)
                rows.append((float(rho), "divergence_slope", slope, 0.0, cfg.n_runs))
            except InvalidInput:
                pass
            continue
        n_tail = max(1, len(times) // 10)
        tail_span = times[-1] - times[-n_tail]
        mixing_ok = tail_span >= 5.0 / (2.0 * np.min(kappa))
        rows.append((float(rho), "tail_converged", float(mixing_ok), 0.0, cfg.n_runs))
        emp = np.mean(np.var(states[:, -n_tail:, :], axis=0, ddof=1), axis=0)
        pred = np.concatenate([cfg.eta_scalar * sig ** 2, cfg.eta_scalar * sig ** 2]) \
            * np.tile(analytic.seg_asymptotic_variance_factor(params), 2)
        err_scale = np.sqrt(2.0 / (cfg.n_runs - 1)) if cfg.n_runs > 1 else 0.0
        for i in range(2 * d):
            rows.append((float(rho), f"empirical_var[{i}]", float(emp[i]),
                         float(emp[i]) * err_scale, cfg.n_runs))
            rows.append((float(rho), f"predicted_var[{i}]", float(pred[i]), 0.0, cfg.n_runs))
    return ResultTable(rows, base)


# ---------------------------------------------------------------------------
# validation suites (shared with the acceptance tests)


@dataclass(frozen=True)
class ReportRow:
    name: str
    measured: float
    tolerance: float
    passed: bool

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.name}: measured {self.measured:.6g} (tolerance {self.tolerance:.6g})"


def validate(suite: str) -> list[ReportRow]:
    from . import validation
    suites = {
        "gradients": validation.suite_gradients,
        "closed_forms": validation.suite_closed_forms,
        "weak_order": validation.suite_weak_order,
        "schedulers": validation.suite_schedulers,
        "figures": validation.suite_figures,
    }
    if suite not in suites:
        raise InvalidInput(f"unknown suite {suite!r}; choose from {sorted(suites)}")
    return suites[suite]()
