"""Experiment drivers: configs, solve runs, baseline comparisons, CSV and
plot-script emission.

A run is described by a JSON config (see ExperimentConfig), executed by one
of the run_* drivers, and leaves behind CSV files plus a manifest.  The
manifest echoes the fully resolved configuration, so feeding it back in as
a config reproduces the numeric outputs byte for byte.  Plots are emitted
as gnuplot scripts next to the CSVs they read, never as rendered images.
"""

import dataclasses
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from .bernoulli import BernoulliODE, solve_bernoulli
from .errors import ConfigError
from .hyperopt import BOConfig, Dimension, SearchSpace, bo_objective, optimize
from .hyperopt import _DEFAULT_HYPER as _BASE_HYPER
from .integrators import euler_integrate, rk4_integrate
from .linear import (LinearODE, RidgeReadout, eval_on_grid, gram_ridge,
                     residual_matrix, rmsr, solve_linear)
from .presets import get_preset
from .registry import build_problem
from .reservoir import HyperParams, build_reservoir, propagate
from .systems import ODESystem, solve_system
from .training import GDConfig, INIT_MODES
from .trial import build_basis, evaluate

__all__ = [
    "BASELINES",
    "ComparisonReport",
    "ExperimentConfig",
    "compare",
    "emit_figures",
    "load_config",
    "read_csv",
    "run_hyperopt",
    "run_solve_bernoulli",
    "run_solve_linear",
    "run_solve_system",
    "write_csv",
    "write_manifest",
]

BASELINES = ("none", "euler", "rk4")

_HYPER_FIELDS = {f.name for f in dataclasses.fields(HyperParams)}
_GD_FIELDS = {f.name for f in dataclasses.fields(GDConfig)}
_BO_FIELDS = {f.name for f in dataclasses.fields(BOConfig)} - {"gd"}
_CONFIG_FIELDS = ("problem", "preset", "hyper", "gd", "init", "bo",
                  "baseline", "seed", "out_dir", "threads")


@dataclass
class ExperimentConfig:
    """One experiment: a problem, how to solve it, and where results go.

    problem is a registry block (named benchmark or spelled-out scalar ODE).
    preset names a tuned hyperparameter bundle; the hyper/gd dicts override
    individual fields on top of it.  seed, when set, overrides the reservoir
    seed, the GD seed, and the BO seed at once.  baseline picks the
    integrator compare() races against.
    """

    problem: dict
    preset: str | None = None
    hyper: dict = field(default_factory=dict)
    gd: dict = field(default_factory=dict)
    init: str | None = None
    bo: dict = field(default_factory=dict)
    baseline: str = "none"
    seed: int | None = None
    out_dir: str = "runs"
    threads: int = 1

    def __post_init__(self):
        if not isinstance(self.problem, dict) or not self.problem:
            raise ConfigError("config needs a problem block")
        if self.baseline not in BASELINES:
            raise ConfigError(f"baseline must be one of {BASELINES}, got {self.baseline!r}")
        if int(self.threads) != self.threads or self.threads < 1:
            raise ConfigError(f"threads must be a positive integer, got {self.threads!r}")
        self.threads = int(self.threads)
        bad = set(self.hyper) - _HYPER_FIELDS
        if bad:
            raise ConfigError(f"unknown hyper keys: {sorted(bad)}")
        bad = set(self.gd) - _GD_FIELDS
        if bad:
            raise ConfigError(f"unknown gd keys: {sorted(bad)}")
        bad = set(self.bo) - (_BO_FIELDS | {"space", "gd"})
        if bad:
            raise ConfigError(f"unknown bo keys: {sorted(bad)}")
        if self.init is not None and self.init not in INIT_MODES:
            raise ConfigError(f"init must be one of {INIT_MODES}, got {self.init!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        unknown = set(d) - set(_CONFIG_FIELDS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {k: d[k] for k in _CONFIG_FIELDS if k in d}
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in _CONFIG_FIELDS}
        return {k: v for k, v in out.items() if v not in (None, {}, [])}


def load_config(path: str) -> ExperimentConfig:
    """Read a JSON config file; a manifest (dict with a "config" key) is
    accepted directly, which is what makes runs replayable."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if isinstance(data, dict) and "config" in data:
        data = data["config"]
    return ExperimentConfig.from_dict(data)


def resolve_hyper(cfg: ExperimentConfig, defaults: HyperParams | None = None) -> HyperParams:
    """Merge preset, config overrides, and the seed override into HyperParams."""
    merged = {}
    if defaults is not None:
        merged.update(dataclasses.asdict(defaults))
    if cfg.preset is not None:
        try:
            merged.update(dataclasses.asdict(get_preset(cfg.preset).hyper))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    merged.update(cfg.hyper)
    if cfg.seed is not None:
        merged["random_seed"] = int(cfg.seed)
    missing = _HYPER_FIELDS - set(merged)
    if missing:
        raise ConfigError(f"hyper block missing fields: {sorted(missing)} "
                          "(set them or name a preset)")
    try:
        return HyperParams(**merged)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def resolve_gd(cfg: ExperimentConfig, required: bool = True) -> GDConfig | None:
    """Merge preset GD settings with config overrides into a GDConfig."""
    merged = {}
    if cfg.preset is not None:
        preset = get_preset(cfg.preset)
        if preset.gd is not None:
            merged.update(dataclasses.asdict(preset.gd))
    merged.update(cfg.gd)
    if cfg.seed is not None:
        merged["seed"] = int(cfg.seed)
    if not merged or "epochs" not in merged or "learning_rate" not in merged:
        if required:
            raise ConfigError("training needs gd settings with epochs and "
                              "learning_rate (set a gd block or name a preset)")
        return None
    try:
        return GDConfig(**merged)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def resolve_init(cfg: ExperimentConfig) -> str:
    if cfg.init is not None:
        return cfg.init
    if cfg.preset is not None:
        return get_preset(cfg.preset).init
    return "linearized_then_gd"


# ---------------------------------------------------------------------------
# CSV and manifest plumbing


def _fmt(value) -> str:
    v = float(value)
    if v == int(v) and abs(v) < 1e16:
        return repr(int(v)) if float(int(v)) == v else repr(v)
    return repr(v)


def write_csv(path: str, header, columns) -> None:
    """Comma-separated columns at full precision: parse(emit(x)) == x."""
    columns = [np.asarray(c) for c in columns]
    if len({c.shape[0] for c in columns}) != 1:
        raise ValueError("columns must share one length")
    if len(header) != len(columns):
        raise ValueError("one header entry per column")
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path: str):
    """Inverse of write_csv: returns (header, list of float columns)."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    columns = [np.array([float(r[j]) for r in rows]) for j in range(len(header))]
    return header, columns


def write_manifest(cfg: ExperimentConfig, resolved: dict, outputs) -> str:
    """Write manifest.json: config echo, resolved settings, seed, versions.

    The "config" entry is itself a valid config (with the resolved
    hyperparameters folded in), so the manifest replays the run.
    """
    echo = cfg.to_dict()
    echo["hyper"] = resolved.get("hyper", echo.get("hyper", {}))
    for key in ("gd", "init", "bo"):
        if key in resolved:
            echo[key] = resolved[key]
    manifest = {
        "config": echo,
        "seed": cfg.seed,
        "resolved": {k: v for k, v in resolved.items() if k not in echo},
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "rcsolve": __version__,
        },
        "outputs": sorted(outputs),
    }
    path = os.path.join(cfg.out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _prep_out(cfg: ExperimentConfig) -> None:
    os.makedirs(cfg.out_dir, exist_ok=True)


def _write_solution_files(cfg, result) -> list:
    """Per-IC (t, y, y_dot, residual) files plus the bundle RMSR file."""
    files = []
    for i in range(result.y.shape[0]):
        name = f"solution_ic{i:03d}.csv"
        write_csv(os.path.join(cfg.out_dir, name),
                  ["t", "y", "y_dot", "residual"],
                  [result.times, result.y[i], result.y_dot[i], result.residual[i]])
        files.append(name)
    write_csv(os.path.join(cfg.out_dir, "rmsr.csv"), ["t", "rmsr"],
              [result.times, result.rmsr()])
    files.append("rmsr.csv")
    return files


def _write_trace(cfg, trace, name: str) -> str:
    epochs = np.arange(trace.loss_per_epoch.shape[0])
    write_csv(os.path.join(cfg.out_dir, name), ["epoch", "loss", "lr"],
              [epochs, trace.loss_per_epoch, trace.lr_per_epoch])
    return name


def _hyper_dict(hyper: HyperParams) -> dict:
    return dataclasses.asdict(hyper)


def _gd_dict(gd: GDConfig) -> dict:
    return dataclasses.asdict(gd)


# ---------------------------------------------------------------------------
# Solve drivers


def run_solve_linear(cfg: ExperimentConfig) -> dict:
    """Closed-form solve of a linear problem for every IC in the config."""
    problem, exact = build_problem(cfg.problem)
    if not isinstance(problem, LinearODE):
        raise ConfigError("solve-linear needs a linear problem block")
    hyper = resolve_hyper(cfg)
    _prep_out(cfg)
    res = build_reservoir(hyper)
    result = solve_linear(problem, res)
    files = _write_solution_files(cfg, result)
    manifest = write_manifest(cfg, {"hyper": _hyper_dict(hyper)}, files)
    summary = {
        "out_dir": cfg.out_dir,
        "manifest": manifest,
        "n_ics": int(result.y.shape[0]),
        "n_points": int(result.times.shape[0]),
        "max_rmsr": float(np.max(result.rmsr())),
    }
    if exact is not None:
        errs = [float(np.max(np.abs(result.y[i] - exact(result.times, psi0))))
                for i, psi0 in enumerate(result.psi0_list)]
        summary["max_abs_error"] = max(errs)
    return summary


def run_solve_bernoulli(cfg: ExperimentConfig) -> dict:
    """Warm-started gradient-descent solve of a quadratic scalar problem."""
    problem, exact = build_problem(cfg.problem)
    if not isinstance(problem, BernoulliODE):
        raise ConfigError("solve-bernoulli needs a bernoulli problem block")
    hyper = resolve_hyper(cfg)
    gd = resolve_gd(cfg)
    init = resolve_init(cfg)
    _prep_out(cfg)
    res = build_reservoir(hyper)
    result = solve_bernoulli(problem, res, gd, init=init)
    files = _write_solution_files(cfg, result)
    for i, trace in enumerate(result.traces):
        files.append(_write_trace(cfg, trace, f"trace_ic{i:03d}.csv"))
    manifest = write_manifest(
        cfg, {"hyper": _hyper_dict(hyper), "gd": _gd_dict(gd), "init": init}, files)
    summary = {
        "out_dir": cfg.out_dir,
        "manifest": manifest,
        "n_ics": int(result.y.shape[0]),
        "n_points": int(result.times.shape[0]),
        "max_rmsr": float(np.max(result.rmsr())),
        "best_losses": [float(t.best_loss) for t in result.traces],
    }
    if exact is not None:
        errs = [float(np.max(np.abs(result.y[i] - exact(result.times, psi0))))
                for i, psi0 in enumerate(result.psi0_list)]
        summary["max_abs_error"] = max(errs)
    return summary


def run_solve_system(cfg: ExperimentConfig) -> dict:
    """Multi-output solve of a named ODE system."""
    problem, _ = build_problem(cfg.problem)
    if not isinstance(problem, ODESystem):
        raise ConfigError("solve-system needs a system problem block")
    hyper = resolve_hyper(cfg)
    init = resolve_init(cfg)
    gd = resolve_gd(cfg, required=(init != "linearized"))
    if gd is None:
        gd = GDConfig(epochs=1, learning_rate=0.01)
    _prep_out(cfg)
    res = build_reservoir(hyper)
    result = solve_system(problem, res, gd, init=init)
    dim = result.y.shape[1]
    header = (["t"] + [f"y{r}" for r in range(dim)]
              + [f"y{r}_dot" for r in range(dim)]
              + [f"residual{r}" for r in range(dim)])
    columns = ([result.times] + [result.y[:, r] for r in range(dim)]
               + [result.y_dot[:, r] for r in range(dim)]
               + [result.residual[:, r] for r in range(dim)])
    write_csv(os.path.join(cfg.out_dir, "solution.csv"), header, columns)
    files = ["solution.csv", _write_trace(cfg, result.trace, "trace.csv")]
    if result.energy_violation is not None:
        write_csv(os.path.join(cfg.out_dir, "energy.csv"), ["t", "violation"],
                  [result.times, result.energy_violation])
        files.append("energy.csv")
    manifest = write_manifest(
        cfg, {"hyper": _hyper_dict(hyper), "gd": _gd_dict(gd), "init": init}, files)
    summary = {
        "out_dir": cfg.out_dir,
        "manifest": manifest,
        "n_points": int(result.times.shape[0]),
        "max_rmsr": float(np.max(result.rmsr())),
        "best_loss": float(result.trace.best_loss),
    }
    if result.energy_violation is not None:
        summary["max_energy_violation"] = float(np.max(result.energy_violation))
    return summary


def run_hyperopt(cfg: ExperimentConfig) -> dict:
    """Trust-region BO over the config's search space for a scalar problem."""
    problem, _ = build_problem(cfg.problem)
    if isinstance(problem, ODESystem):
        raise ConfigError("hyperopt tunes scalar problems; tune systems from "
                          "the library API with a custom objective")
    space_block = cfg.bo.get("space")
    if not space_block:
        raise ConfigError("bo block needs a nonempty space list")
    dims = []
    for entry in space_block:
        if not isinstance(entry, dict) or not {"name", "low", "high"} <= set(entry):
            raise ConfigError(f"space entry needs name/low/high, got {entry!r}")
        unknown = set(entry) - {"name", "low", "high", "scale", "integer"}
        if unknown:
            raise ConfigError(f"unknown space entry keys: {sorted(unknown)}")
        try:
            dims.append(Dimension(entry["name"], float(entry["low"]),
                                  float(entry["high"]), entry.get("scale", "linear"),
                                  bool(entry.get("integer", False))))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    try:
        space = SearchSpace(tuple(dims))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    bo_kwargs = {k: v for k, v in cfg.bo.items() if k in _BO_FIELDS}
    if cfg.seed is not None:
        bo_kwargs["seed"] = int(cfg.seed)
    if "max_evals" not in bo_kwargs or bo_kwargs["max_evals"] < 1:
        raise ConfigError("bo block needs max_evals >= 1")
    gd_block = cfg.bo.get("gd", cfg.gd)
    gd_cfg = None
    if gd_block:
        try:
            gd_cfg = GDConfig(**gd_block)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
    try:
        bo_cfg = BOConfig(gd=gd_cfg, **bo_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    base_hyper = resolve_hyper(cfg, defaults=_BASE_HYPER)

    _prep_out(cfg)
    objective = lambda point: bo_objective(point, problem, bo_cfg, base_hyper=base_hyper)
    best, history = optimize(space, objective, bo_cfg)

    evals = np.arange(len(history))
    columns = [evals]
    header = ["eval"]
    for name in space.names:
        header.append(name)
        columns.append(np.array([p[name] for p in history.points], dtype=float))
    header += ["objective", "best", "side"]
    columns += [np.array(history.values), np.array(history.best_values),
                np.array(history.sides)]
    write_csv(os.path.join(cfg.out_dir, "history.csv"), header, columns)

    resolved = {"hyper": _hyper_dict(base_hyper), "best_point": best,
                "best_objective": float(history.best_values[-1])}
    manifest = write_manifest(cfg, resolved, ["history.csv"])
    return {
        "out_dir": cfg.out_dir,
        "manifest": manifest,
        "evaluations": len(history),
        "best_point": best,
        "best_objective": float(history.best_values[-1]),
    }


# ---------------------------------------------------------------------------
# Baseline comparison


@dataclass
class ComparisonReport:
    """Wall-clock and accuracy comparison between the reservoir solver and a
    stepping baseline on one problem, shared grid, shared ICs.

    rc_declare_seconds covers reservoir construction, state propagation, and
    the first IC's readout (the work shared across ICs plus one solve);
    rc_fit_seconds covers the remaining ICs only.  Hyperparameter search
    never runs inside compare, so no BO time is mixed in.
    """

    problem: dict
    n_ics: int
    dt: float
    reference: str  # "exact" or "rk4/10"
    rc_declare_seconds: float
    rc_fit_seconds: float
    rc_fit_per_ic_seconds: float
    baseline: str
    baseline_seconds: float
    baseline_per_ic_seconds: float
    rc_rms_errors: np.ndarray = None        # (L,) vs reference
    baseline_rms_errors: np.ndarray = None  # (L,) vs reference
    times: np.ndarray = None                # (K,)
    rc_residuals: np.ndarray = None         # (L, K)

    def __post_init__(self):
        for name in ("rc_declare_seconds", "rc_fit_seconds", "rc_fit_per_ic_seconds",
                     "baseline_seconds", "baseline_per_ic_seconds"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")

    def to_dict(self) -> dict:
        out = {
            "problem": self.problem,
            "n_ics": self.n_ics,
            "dt": self.dt,
            "reference": self.reference,
            "baseline": self.baseline,
            "timings_seconds": {
                "rc_declare": round(self.rc_declare_seconds, 3),
                "rc_fit": round(self.rc_fit_seconds, 3),
                "rc_fit_per_ic": round(self.rc_fit_per_ic_seconds, 6),
                "baseline_total": round(self.baseline_seconds, 3),
                "baseline_per_ic": round(self.baseline_per_ic_seconds, 6),
            },
        }
        if self.rc_rms_errors is not None:
            out["rc_rms_error_max"] = float(np.max(self.rc_rms_errors))
            out["rc_rms_error_mean"] = float(np.mean(self.rc_rms_errors))
        if self.baseline_rms_errors is not None and len(self.baseline_rms_errors):
            out["baseline_rms_error_max"] = float(np.max(self.baseline_rms_errors))
            out["baseline_rms_error_mean"] = float(np.mean(self.baseline_rms_errors))
        return out


def _reference_values(problem, exact, ics, times, dt, t_range, threads):
    """Ground truth on the coarse grid: exact when known, else RK4 at dt/10."""
    if exact is not None:
        return np.stack([exact(times, ic) for ic in ics]), "exact"

    def one(ic):
        fine = rk4_integrate(problem, ic, dt / 10.0, t_range)
        y = fine.y[::10]
        if y.shape[0] < times.shape[0]:
            raise RuntimeError("reference grid shorter than solve grid")
        return y[:times.shape[0]]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, ics))
    else:
        rows = [one(ic) for ic in ics]
    return np.stack(rows), "rk4/10"


def compare(cfg: ExperimentConfig) -> ComparisonReport:
    """Race the reservoir solver against a stepping integrator on one scalar
    problem, reporting the declare/fit split and per-method accuracy."""
    problem, exact = build_problem(cfg.problem)
    if isinstance(problem, ODESystem):
        raise ConfigError("compare supports scalar problems (linear or bernoulli)")
    hyper = resolve_hyper(cfg)
    dt = hyper.dt
    ics = np.asarray(list(problem.psi0_list), dtype=float)
    if ics.shape[0] < 1:
        raise ConfigError("compare needs at least one IC")
    _prep_out(cfg)

    resolved = {"hyper": _hyper_dict(hyper)}
    if isinstance(problem, LinearODE):
        t0 = time.perf_counter()
        res = build_reservoir(hyper)
        basis = build_basis(propagate(res, *problem.t_range))
        a1v = eval_on_grid(problem.a1, basis.times)
        a0v = eval_on_grid(problem.a0, basis.times)
        fv = eval_on_grid(problem.force, basis.times)
        d_h = residual_matrix(problem, basis)
        readout = RidgeReadout(d_h, gram_ridge(hyper))

        def fit_one(psi0):
            d_0 = a0v * psi0 - fv
            w = readout.solve(-(d_h.T @ d_0))
            yi, ydi = evaluate(basis, w, psi0)
            return yi, ydi, a1v * ydi + a0v * yi - fv

        y = np.empty((ics.shape[0], basis.n_points))
        y_dot = np.empty_like(y)
        residual = np.empty_like(y)
        y[0], y_dot[0], residual[0] = fit_one(ics[0])
        declare = time.perf_counter() - t0
        t1 = time.perf_counter()
        for i in range(1, ics.shape[0]):
            y[i], y_dot[i], residual[i] = fit_one(ics[i])
        fit = time.perf_counter() - t1
        times = basis.times
    else:
        gd = resolve_gd(cfg)
        init = resolve_init(cfg)
        t0 = time.perf_counter()
        res = build_reservoir(hyper)
        basis = build_basis(propagate(res, *problem.t_range))
        first = dataclasses.replace(problem, psi0_list=[float(ics[0])])
        r1 = solve_bernoulli(first, res, gd, init=init, basis=basis)
        declare = time.perf_counter() - t0
        t1 = time.perf_counter()
        if ics.shape[0] > 1:
            rest = dataclasses.replace(problem, psi0_list=[float(v) for v in ics[1:]])
            r2 = solve_bernoulli(rest, res, gd, init=init, basis=basis)
            y = np.vstack([r1.y, r2.y])
            y_dot = np.vstack([r1.y_dot, r2.y_dot])
            residual = np.vstack([r1.residual, r2.residual])
        else:
            y, y_dot, residual = r1.y, r1.y_dot, r1.residual
        fit = time.perf_counter() - t1
        times = r1.times
        resolved["gd"] = _gd_dict(gd)
        resolved["init"] = init

    per_ic_fit = fit / (ics.shape[0] - 1) if ics.shape[0] > 1 else 0.0

    baseline_total = 0.0
    baseline_y = None
    if cfg.baseline != "none":
        step = euler_integrate if cfg.baseline == "euler" else rk4_integrate
        t2 = time.perf_counter()
        baseline_rows = [step(problem, float(ic), dt, problem.t_range).y for ic in ics]
        baseline_total = time.perf_counter() - t2
        baseline_y = np.stack([row[:times.shape[0]] for row in baseline_rows])
    per_ic_baseline = baseline_total / ics.shape[0] if cfg.baseline != "none" else 0.0

    ref, ref_name = _reference_values(problem, exact, ics, times, dt,
                                      problem.t_range, cfg.threads)
    rc_errs = np.sqrt(np.mean((y - ref) ** 2, axis=1))
    base_errs = (np.sqrt(np.mean((baseline_y - ref) ** 2, axis=1))
                 if baseline_y is not None else np.array([]))

    report = ComparisonReport(
        problem=dict(cfg.problem), n_ics=int(ics.shape[0]), dt=float(dt),
        reference=ref_name,
        rc_declare_seconds=declare, rc_fit_seconds=fit,
        rc_fit_per_ic_seconds=per_ic_fit,
        baseline=cfg.baseline, baseline_seconds=baseline_total,
        baseline_per_ic_seconds=per_ic_baseline,
        rc_rms_errors=rc_errs, baseline_rms_errors=base_errs,
        times=times, rc_residuals=residual)

    files = []
    for i in range(ics.shape[0]):
        name = f"solution_ic{i:03d}.csv"
        write_csv(os.path.join(cfg.out_dir, name), ["t", "y", "y_dot", "residual"],
                  [times, y[i], y_dot[i], residual[i]])
        files.append(name)
    write_csv(os.path.join(cfg.out_dir, "rmsr.csv"), ["t", "rmsr"],
              [times, rmsr(residual)])
    files.append("rmsr.csv")
    err_cols = [np.arange(ics.shape[0]), ics, rc_errs]
    err_head = ["ic_index", "ic", "rc_rms_error"]
    if baseline_y is not None:
        err_cols.append(base_errs)
        err_head.append(f"{cfg.baseline}_rms_error")
    write_csv(os.path.join(cfg.out_dir, "errors.csv"), err_head, err_cols)
    files.append("errors.csv")
    with open(os.path.join(cfg.out_dir, "report.json"), "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    files.append("report.json")
    write_manifest(cfg, resolved, files)
    return report


# ---------------------------------------------------------------------------
# Plot-script emission


def _gp_preamble(output_name: str, title: str) -> str:
    return (f"# render with: gnuplot {output_name}.gp\n"
            "set terminal svg size 900,600 dynamic\n"
            f"set output '{output_name}.svg'\n"
            "set datafile separator ','\n"
            f"set title '{title}'\n"
            "set xlabel 't'\n")


def emit_figures(out_dir: str) -> list:
    """Write gnuplot scripts for whatever CSVs a run left in out_dir.

    Scripts reference the CSVs by relative name, so directories stay
    relocatable; rendering is the caller's choice (no image dependency).
    """
    if not os.path.isdir(out_dir):
        raise ConfigError(f"output directory {out_dir} does not exist")
    names = sorted(os.listdir(out_dir))
    written = []

    def emit(name: str, text: str):
        path = os.path.join(out_dir, name)
        with open(path, "w") as fh:
            fh.write(text)
        written.append(path)

    per_ic = [n for n in names if n.startswith("solution_ic") and n.endswith(".csv")]
    if per_ic:
        lines = ",\\\n  ".join(
            f"'{n}' using 1:2 skip 1 with lines title 'IC {i}'"
            for i, n in enumerate(per_ic))
        emit("fig_solutions.gp",
             _gp_preamble("fig_solutions", "solutions per initial condition")
             + "set ylabel 'y'\nplot \\\n  " + lines + "\n")
        lines = ",\\\n  ".join(
            f"'{n}' using 1:4 skip 1 with lines title 'IC {i}'"
            for i, n in enumerate(per_ic))
        emit("fig_residuals.gp",
             _gp_preamble("fig_residuals", "per-IC residuals")
             + "set ylabel 'residual'\nplot \\\n  " + lines + "\n")

    if "solution.csv" in names:
        header, _ = read_csv(os.path.join(out_dir, "solution.csv"))
        ys = [h for h in header if h.startswith("y") and "dot" not in h]
        lines = ",\\\n  ".join(
            f"'solution.csv' using 1:{header.index(h) + 1} skip 1 with lines title '{h}'"
            for h in ys)
        emit("fig_solutions.gp",
             _gp_preamble("fig_solutions", "system trajectory")
             + "set ylabel 'y'\nplot \\\n  " + lines + "\n")
        if len(ys) == 2:
            cols = (header.index(ys[0]) + 1, header.index(ys[1]) + 1)
            emit("fig_phase.gp",
                 _gp_preamble("fig_phase", "phase portrait")
                 + f"set xlabel '{ys[0]}'\nset ylabel '{ys[1]}'\nset size square\n"
                 + f"plot 'solution.csv' using {cols[0]}:{cols[1]} skip 1 "
                 + "with lines notitle\n")

    if "rmsr.csv" in names:
        emit("fig_rmsr.gp",
             _gp_preamble("fig_rmsr", "root-mean-square residual across ICs")
             + "set ylabel 'RMSR'\nset logscale y\n"
             + "plot 'rmsr.csv' using 1:2 skip 1 with lines notitle\n")

    if "energy.csv" in names:
        emit("fig_energy.gp",
             _gp_preamble("fig_energy", "energy violation along the trajectory")
             + "set ylabel '|E - H|'\n"
             + "plot 'energy.csv' using 1:2 skip 1 with lines notitle\n")

    traces = [n for n in names if n.startswith("trace") and n.endswith(".csv")]
    if traces:
        lines = ",\\\n  ".join(
            f"'{n}' using 1:2 skip 1 with lines title '{n[:-4]}'" for n in traces)
        emit("fig_loss.gp",
             _gp_preamble("fig_loss", "training loss")
             + "set xlabel 'epoch'\nset ylabel 'loss'\nset logscale y\n"
             + "plot \\\n  " + lines + "\n")

    if "history.csv" in names:
        header, _ = read_csv(os.path.join(out_dir, "history.csv"))
        obj = header.index("objective") + 1
        best = header.index("best") + 1
        emit("fig_history.gp",
             _gp_preamble("fig_history", "hyperparameter search progress")
             + "set xlabel 'evaluation'\nset ylabel 'objective'\n"
             + f"plot 'history.csv' using 1:{obj} skip 1 with points title 'evaluations', \\\n"
             + f"  'history.csv' using 1:{best} skip 1 with lines title 'incumbent'\n")

    return written
