"""Command-line front end.

Subcommands mirror the harness drivers: solve-linear, solve-bernoulli,
solve-system, hyperopt, compare, emit-figures.  Every run reads a JSON
config (or a manifest from an earlier run), honors --seed/--out/--threads
overrides, writes CSVs plus a manifest into the output directory, and
prints a one-line summary.  Failures exit nonzero with a one-line
diagnostic: 2 config, 3 singular coefficient, 4 non-finite states,
5 unusable reservoir draw, 1 anything else.
"""

import argparse
import sys

from .errors import (
    AllZeroRecurrentError,
    ConfigError,
    NonFiniteLossError,
    NonFiniteStateError,
    SingularCoefficientError,
)
from . import harness

__all__ = ["main"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_SINGULAR = 3
EXIT_NONFINITE = 4
EXIT_RESERVOIR = 5


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON config or manifest from a previous run")
    shared.add_argument("--seed", type=int, default=None,
                        help="override reservoir/GD/BO seeds")
    shared.add_argument("--out", default=None, help="override the output directory")
    shared.add_argument("--threads", type=int, default=None,
                        help="worker threads for per-IC reference computations")

    parser = argparse.ArgumentParser(
        prog="rcsolve",
        description="reservoir-computing ODE solver experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve-linear", parents=[shared],
                   help="closed-form solve of a linear first-order ODE")
    sub.add_parser("solve-bernoulli", parents=[shared],
                   help="warm-started gradient-descent solve of a quadratic ODE")
    sub.add_parser("solve-system", parents=[shared],
                   help="multi-output solve of a named ODE system")
    sub.add_parser("hyperopt", parents=[shared],
                   help="trust-region Bayesian search over hyperparameters")
    sub.add_parser("compare", parents=[shared],
                   help="race the reservoir solver against a stepping integrator")
    sub.add_parser("emit-figures", parents=[shared],
                   help="write gnuplot scripts for the CSVs of a finished run")
    return parser


def _load(args) -> harness.ExperimentConfig:
    if not args.config:
        raise ConfigError("--config is required")
    cfg = harness.load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be a positive integer")
        cfg.threads = args.threads
    return cfg


def _fmt_seconds(value: float) -> str:
    return f"{value * 1000.0:.3f} ms" if value < 1.0 else f"{value:.3f} s"


def _run_solve_linear(args) -> str:
    s = harness.run_solve_linear(_load(args))
    extra = (f", max |err| {s['max_abs_error']:.3g}"
             if "max_abs_error" in s else "")
    return (f"solve-linear: {s['n_ics']} ICs x {s['n_points']} points, "
            f"max RMSR {s['max_rmsr']:.3g}{extra} -> {s['out_dir']}")


def _run_solve_bernoulli(args) -> str:
    s = harness.run_solve_bernoulli(_load(args))
    extra = (f", max |err| {s['max_abs_error']:.3g}"
             if "max_abs_error" in s else "")
    return (f"solve-bernoulli: {s['n_ics']} ICs x {s['n_points']} points, "
            f"max RMSR {s['max_rmsr']:.3g}, best loss "
            f"{min(s['best_losses']):.3g}{extra} -> {s['out_dir']}")


def _run_solve_system(args) -> str:
    s = harness.run_solve_system(_load(args))
    extra = (f", max |E - H| {s['max_energy_violation']:.3g}"
             if "max_energy_violation" in s else "")
    return (f"solve-system: {s['n_points']} points, max RMSR {s['max_rmsr']:.3g}, "
            f"best loss {s['best_loss']:.3g}{extra} -> {s['out_dir']}")


def _run_hyperopt(args) -> str:
    s = harness.run_hyperopt(_load(args))
    point = ", ".join(f"{k}={v:.6g}" for k, v in s["best_point"].items())
    return (f"hyperopt: {s['evaluations']} evaluations, best objective "
            f"{s['best_objective']:.4g} at {{{point}}} -> {s['out_dir']}")


def _run_compare(args) -> str:
    cfg = _load(args)
    report = harness.compare(cfg)
    cfg_out = cfg.out_dir
    rc = (f"rc declare {_fmt_seconds(report.rc_declare_seconds)}, "
          f"fit {_fmt_seconds(report.rc_fit_per_ic_seconds)}/IC")
    if report.baseline == "none":
        base = "no baseline"
    else:
        base = (f"{report.baseline} {_fmt_seconds(report.baseline_per_ic_seconds)}/IC")
    err = (f", rc RMS err {float(max(report.rc_rms_errors)):.3g} "
           f"vs {report.reference}")
    return f"compare: {report.n_ics} ICs, {rc}; {base}{err} -> {cfg_out}"


def _run_emit_figures(args) -> str:
    if args.out is not None:
        out_dir = args.out
    elif args.config:
        out_dir = harness.load_config(args.config).out_dir
    else:
        raise ConfigError("emit-figures needs --out or --config")
    written = harness.emit_figures(out_dir)
    if not written:
        return f"emit-figures: no plottable CSVs in {out_dir}"
    names = " ".join(sorted(p.rsplit("/", 1)[-1] for p in written))
    return f"emit-figures: wrote {names} -> {out_dir}"


_COMMANDS = {
    "solve-linear": _run_solve_linear,
    "solve-bernoulli": _run_solve_bernoulli,
    "solve-system": _run_solve_system,
    "hyperopt": _run_hyperopt,
    "compare": _run_compare,
    "emit-figures": _run_emit_figures,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        print(_COMMANDS[args.command](args))
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularCoefficientError as exc:
        print(f"singular coefficient: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (NonFiniteStateError, NonFiniteLossError) as exc:
        print(f"non-finite states: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    except AllZeroRecurrentError as exc:
        print(f"unusable reservoir draw: {exc}", file=sys.stderr)
        return EXIT_RESERVOIR
    except Exception as exc:  # pragma: no cover - catch-all for the CLI
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
