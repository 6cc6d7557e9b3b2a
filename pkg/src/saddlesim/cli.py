"""Command-line entry point.

Subcommands: simulate, compare, sweep-rho, analytic, validate. Exit codes:
0 success, 1 config error, 2 numerical error, 3 validation failure."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import analytic, harness
from .core import StateVector
from .errors import ConfigError, NotPSD, QuadratureError, SaddleSimError
from .optimizers import Method, Scheduler


def _load(path_or_preset: str) -> harness.ExperimentConfig:
    try:
        return harness.load_config(path_or_preset)
    except FileNotFoundError:
        return harness.load_preset(path_or_preset)


def _apply_overrides(cfg: harness.ExperimentConfig, args) -> harness.ExperimentConfig:
    if args.seed is not None:
        cfg = replace(cfg, base_seed=args.seed)
    if args.runs is not None:
        cfg = replace(cfg, n_runs=args.runs)
    if args.out is not None:
        cfg = replace(cfg, out_path=args.out)
    return cfg


def _emit(table: harness.ResultTable, out: str | None):
    if out:
        table.save(out)
    else:
        sys.stdout.write(table.serialize())


def _cmd_simulate(args) -> int:
    cfg = _apply_overrides(_load(args.config), args)
    table = harness.run_experiment(cfg)
    if not cfg.out_path:
        sys.stdout.write(table.serialize())
    return 0


def _cmd_compare(args) -> int:
    cfgs = [_apply_overrides(_load(p), args) for p in args.configs]
    table = harness.compare(cfgs, args.stat)
    _emit(table, args.out)
    return 0


def _cmd_sweep_rho(args) -> int:
    cfg = _apply_overrides(_load(args.config), args)
    rhos = [float(p) for p in args.rhos.split(",")]
    table = harness.sweep_rho(cfg, rhos)
    _emit(table, args.out)
    return 0


_FORMULAS = {
    "shgd_norm_fixed_bilinear":
        lambda a: analytic.shgd_norm_fixed_bilinear(a["lam"], a["sigma"], a["eta"],
                                                    _z0(a), a["t"]),
    "seg_norm_fixed_bilinear":
        lambda a: analytic.seg_norm_fixed_bilinear(a["lam"], a["sigma"], a["eta"],
                                                   a["rho"], _z0(a), a["t"]),
    "shgd_norm_stochastic_bilinear":
        lambda a: analytic.shgd_norm_stochastic_bilinear(a["lam"], a["sigma"], a["eta"],
                                                         _z0(a), a["t"]),
    "seg_norm_stochastic_bilinear":
        lambda a: analytic.seg_norm_stochastic_bilinear(a["lam"], a["sigma"], a["eta"],
                                                        a["rho"], _z0(a), a["t"]),
    "scheduled_norm":
        lambda a: analytic.scheduled_norm(
            Method[a.get("method", "shgd").upper()], a["lam"], a["sigma"], a["eta"],
            a.get("rho", 1.0), _sched(a.get("eta_gamma", 0.0)),
            _sched(a.get("rho_gamma", 0.0)), _z0(a), a["t"]),
    "optimal_rho":
        lambda a: analytic.optimal_rho(
            analytic.QuadraticGameParams.of(a["a"], a["lam"], a.get("sigma", 1.0),
                                            a.get("eta", 0.01)),
            analytic.RhoObjective[a.get("objective", "per_coordinate_variance").upper()]),
    "seg_asymptotic_variance_factor":
        lambda a: analytic.seg_asymptotic_variance_factor(
            analytic.QuadraticGameParams.of(a["a"], a["lam"], a.get("sigma", 1.0),
                                            a.get("eta", 0.01), a.get("rho", 0.0))),
}


def _z0(a) -> StateVector:
    z = np.atleast_1d(np.asarray(a.get("z0", (1.0, 1.0)), dtype=float))
    return StateVector.from_z(z)


def _sched(gamma: float) -> Scheduler:
    return Scheduler.power_law(gamma) if gamma else Scheduler.constant()


def _cmd_analytic(args) -> int:
    if args.formula not in _FORMULAS:
        raise ConfigError("formula", f"unknown formula {args.formula!r}; "
                          f"choose from {sorted(_FORMULAS)}")
    params = {}
    for item in args.params:
        if "=" not in item:
            raise ConfigError("params", f"expected name=value, got {item!r}")
        key, _, value = item.partition("=")
        try:
            parts = [float(p) for p in value.split(",")]
        except ValueError:
            params[key] = value
            continue
        params[key] = parts[0] if len(parts) == 1 else tuple(parts)
    result = _FORMULAS[args.formula](params)
    print(np.array2string(np.asarray(result), precision=17))
    return 0


def _cmd_validate(args) -> int:
    rows = harness.validate(args.suite)
    for row in rows:
        print(row)
    return 0 if all(r.passed for r in rows) else 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="saddlesim",
                                     description="Minimax optimization laboratory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--runs", type=int, default=None)
    parser.add_argument("--out", type=str, default=None)
    parser.add_argument("--threads", type=int, default=1,
                        help="reserved; execution is vectorized in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one experiment config or preset")
    p.add_argument("config")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("compare", help="align several configs and report weak errors")
    p.add_argument("configs", nargs="+")
    p.add_argument("--stat", default="half_sq_norm")
    p.set_defaults(fn=_cmd_compare)

    p = sub.add_parser("sweep-rho", help="tail variance against the stationary formula")
    p.add_argument("config")
    p.add_argument("--rhos", required=True, help="comma-separated list")
    p.set_defaults(fn=_cmd_sweep_rho)

    p = sub.add_parser("analytic", help="evaluate a closed-form expression")
    p.add_argument("formula")
    p.add_argument("params", nargs="*", help="name=value pairs")
    p.set_defaults(fn=_cmd_analytic)

    p = sub.add_parser("validate", help="run a validation suite")
    p.add_argument("suite", choices=["gradients", "closed_forms", "weak_order",
                                     "schedulers", "figures"])
    p.set_defaults(fn=_cmd_validate)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (NotPSD, QuadratureError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except SaddleSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
