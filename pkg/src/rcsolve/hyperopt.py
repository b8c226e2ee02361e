"""Trust-region Bayesian optimization of reservoir hyperparameters.

A single trust region shrinks and grows around the incumbent while a
Gaussian-process surrogate (anisotropic squared-exponential kernel on inputs
normalized to the unit cube, standardized objective values) proposes batches
by Thompson sampling.  The objective for ODE problems is the cross-validated
unsupervised residual loss: random sub-sequences of the grid are split into a
train part and a later validation part, the readout is trained on the train
part only, and the two log-losses are blended.
"""

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import optimize as sp_optimize
from scipy.linalg import cho_factor, cho_solve, cholesky, solve_triangular
from scipy.stats import qmc

from .bernoulli import BernoulliODE, linearized_matrices, residual_problem
from .errors import DegenerateSurrogateWarning
from .linear import (CharMatrices, closed_form_weights, eval_on_grid,
                     forcing_offset, gram_ridge, residual_matrix)
from .reservoir import HyperParams, build_reservoir, propagate, time_grid
from .training import GDConfig, train
from .trial import TrialBasis, build_basis, evaluate

__all__ = [
    "BOConfig",
    "BOHistory",
    "Dimension",
    "SearchSpace",
    "TrustRegion",
    "bo_objective",
    "optimize",
]

GD_KEYS = ("enet_alpha", "enet_strength", "spike_threshold", "gamma",
           "gamma_cyclic", "learning_rate", "epochs")
SENTINEL = 1e9


@dataclass(frozen=True)
class Dimension:
    """One search dimension; log10-scaled dimensions search the exponent."""

    name: str
    low: float
    high: float
    scale: str = "linear"
    integer: bool = False

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"{self.name}: need low < high")
        if self.scale not in ("linear", "log10"):
            raise ValueError(f"{self.name}: scale must be linear or log10")
        if self.scale == "log10" and self.low <= 0.0:
            raise ValueError(f"{self.name}: log10 scale needs positive bounds")

    def to_unit(self, value: float) -> float:
        lo, hi = self._span()
        v = math.log10(value) if self.scale == "log10" else value
        return (v - lo) / (hi - lo)

    def from_unit(self, u: float) -> float:
        lo, hi = self._span()
        v = lo + float(np.clip(u, 0.0, 1.0)) * (hi - lo)
        v = 10.0 ** v if self.scale == "log10" else v
        return int(round(v)) if self.integer else v

    def _span(self):
        if self.scale == "log10":
            return math.log10(self.low), math.log10(self.high)
        return self.low, self.high


@dataclass(frozen=True)
class SearchSpace:
    """Ordered bundle of dimensions; points live in [0, 1]^d internally."""

    dimensions: tuple

    def __post_init__(self):
        object.__setattr__(self, "dimensions", tuple(self.dimensions))
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise ValueError("duplicate dimension names")

    @property
    def names(self):
        return [d.name for d in self.dimensions]

    @property
    def dim(self) -> int:
        return len(self.dimensions)

    def from_unit(self, u: np.ndarray) -> dict:
        return {d.name: d.from_unit(u[i]) for i, d in enumerate(self.dimensions)}

    def to_unit(self, point: dict) -> np.ndarray:
        return np.array([d.to_unit(point[d.name]) for d in self.dimensions])


@dataclass(frozen=True)
class BOConfig:
    """Budget, cross-validation layout, and seeding for one optimization."""

    max_evals: int
    n_init: int = 10
    batch_size: int = 4
    cv_samples: int = 3
    subsequence_length: int | None = None  # points; default 2/3 of the grid
    val_split: float = 0.3
    beta: float = 0.5
    ic_bundle: Sequence[float] = (1.0,)
    seed: int = 0
    gd: GDConfig | None = None

    def __post_init__(self):
        if not 0.0 < self.val_split < 1.0:
            raise ValueError("val_split must be in (0, 1)")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")
        if self.max_evals < self.n_init:
            raise ValueError("max_evals must cover the initial design")


@dataclass
class TrustRegion:
    """Axis-aligned box in the unit cube, resized by success/failure runs."""

    center: np.ndarray
    side_length: float = 0.8
    success_count: int = 0
    failure_count: int = 0
    success_tol: int = 3
    failure_tol: int = 3
    min_side: float = 2.0 ** -7
    max_side: float = 1.6

    def record(self, improved: bool) -> None:
        if improved:
            self.success_count += 1
            self.failure_count = 0
            if self.success_count >= self.success_tol:
                self.side_length = min(2.0 * self.side_length, self.max_side)
                self.success_count = 0
        else:
            self.failure_count += 1
            self.success_count = 0
            if self.failure_count >= self.failure_tol:
                self.side_length *= 0.5
                self.failure_count = 0

    def bounds(self, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        half = 0.5 * self.side_length * weights
        return np.clip(self.center - half, 0.0, 1.0), np.clip(self.center + half, 0.0, 1.0)


@dataclass
class BOHistory:
    """Everything observed during one optimization, in evaluation order."""

    points: list = field(default_factory=list)       # dicts in original units
    values: list = field(default_factory=list)
    best_values: list = field(default_factory=list)  # incumbent after each eval
    sides: list = field(default_factory=list)        # trust-region side at each eval

    def append(self, point: dict, value: float, side: float) -> None:
        self.points.append(dict(point))
        self.values.append(float(value))
        best = value if not self.best_values else min(self.best_values[-1], value)
        self.best_values.append(float(best))
        self.sides.append(float(side))

    def __len__(self) -> int:
        return len(self.values)


def _split_params(point: dict) -> tuple[dict, dict]:
    """Separate reservoir hyperparameters from trainer overrides."""
    hyper = {k: v for k, v in point.items() if k not in GD_KEYS}
    gd = {k: v for k, v in point.items() if k in GD_KEYS}
    if "epochs" in gd:
        gd["epochs"] = int(round(gd["epochs"]))
    return hyper, gd


def _mean_sq(rows: np.ndarray) -> float:
    return float(np.mean(rows ** 2))


def _log_loss(value: float) -> float:
    return math.log(max(value, 1e-300))


def bo_objective(point: dict, problem, cfg: BOConfig,
                 base_hyper: HyperParams | None = None) -> float:
    """Cross-validated unsupervised log-loss of one hyperparameter point.

    For each of cv_samples random sub-sequences of the problem grid, the
    readout is trained on the early train fraction and the mean squared
    residual is measured on that part and on the later validation part; the
    objective is the average of beta*log(L_train) + (1-beta)*log(L_val) over
    sub-sequences and the deterministic IC bundle.  Failures of any kind
    (unbuildable reservoir, non-finite losses) return the 1e9 sentinel so
    the surrogate still sees the point.  Deterministic given cfg.seed.
    """
    rng = np.random.default_rng(cfg.seed)
    hyper_kw, gd_kw = _split_params(point)
    base = base_hyper if base_hyper is not None else _DEFAULT_HYPER
    try:
        hyper = replace(base, **hyper_kw)
        res = build_reservoir(hyper)
        times = time_grid(problem.t_range[0], problem.t_range[1], hyper.dt)
        k = times.shape[0]
        sub_len = cfg.subsequence_length or max(2, (2 * k) // 3)
        sub_len = min(sub_len, k)
        n_train = max(2, int(round((1.0 - cfg.val_split) * sub_len)))
        if n_train >= sub_len:
            n_train = sub_len - 1

        total = 0.0
        count = 0
        for _ in range(cfg.cv_samples):
            start = int(rng.integers(0, k - sub_len + 1))
            seg = times[start:start + sub_len]
            basis = build_basis(propagate(res, seg[0], seg[-1]))
            if basis.n_points != sub_len:  # guard against grid round-off
                basis = _trim_basis(basis, sub_len)
            train_basis = _trim_basis(basis, n_train)
            for psi0 in cfg.ic_bundle:
                resid = _fit_and_residual(problem, res, basis, train_basis,
                                          psi0, gd_kw, cfg)
                l_train = _mean_sq(resid[:n_train])
                l_val = _mean_sq(resid[n_train:])
                if not (np.isfinite(l_train) and np.isfinite(l_val)):
                    return SENTINEL
                total += cfg.beta * _log_loss(l_train) + (1.0 - cfg.beta) * _log_loss(l_val)
                count += 1
        return total / count
    except Exception:
        return SENTINEL


_DEFAULT_HYPER = HyperParams(n_nodes=100, connectivity=0.2, spectral_radius=1.2,
                             leaking_rate=0.3, bias=0.3, dt=0.01, regularization=1e-3,
                             activation="tanh", random_seed=0)


def _trim_basis(basis: TrialBasis, n: int) -> TrialBasis:
    return TrialBasis(times=basis.times[:n], s_mat=basis.s_mat[:n],
                      s_dot=basis.s_dot[:n], g_vals=basis.g_vals[:n],
                      g_dot_vals=basis.g_dot_vals[:n])


def _fit_and_residual(problem, res, basis: TrialBasis, train_basis: TrialBasis,
                      psi0: float, gd_kw: dict, cfg: BOConfig) -> np.ndarray:
    """Train on the truncated basis, return the residual over the full one."""
    lam = gram_ridge(res.hyper)
    if isinstance(problem, BernoulliODE):
        cm_train = linearized_matrices(problem, train_basis, psi0)
        w = closed_form_weights(cm_train, lam)
        if np.any(eval_on_grid(problem.q, basis.times) != 0.0):
            gd_base = cfg.gd or GDConfig(epochs=300, learning_rate=0.01,
                                         spike_threshold=0.25, gamma=0.3)
            gd_cfg = replace(gd_base, **gd_kw) if gd_kw else gd_base
            prob = residual_problem(problem, train_basis, psi0)
            w, _ = train(prob, train_basis, w, gd_cfg)
        full = residual_problem(problem, basis, psi0)
        y, yd = evaluate(basis, w, psi0)
        return full.residual(basis.times, y[:, None], yd[:, None]).ravel()
    # linear path: closed form on the train rows, residual on all rows
    d_h_full = residual_matrix(problem, basis)
    d_0_full = forcing_offset(problem, basis, psi0)
    n = train_basis.n_points
    w = closed_form_weights(CharMatrices(d_h=d_h_full[:n], d_0=d_0_full[:n]), lam)
    return d_h_full @ w + d_0_full


class _Surrogate:
    """GP with constant-zero mean on standardized targets and an anisotropic
    squared-exponential kernel; hyperparameters by marginal likelihood."""

    def __init__(self, x: np.ndarray, y: np.ndarray, rng: np.random.Generator,
                 restarts: int = 5, jitter: float = 1e-6):
        self.x = x
        self.y_mean = float(np.mean(y))
        self.y_std = float(np.std(y))
        if not np.isfinite(self.y_std) or self.y_std <= 1e-12:
            raise FloatingPointError("degenerate targets")
        self.y = (y - self.y_mean) / self.y_std
        self.jitter = jitter
        d = x.shape[1]
        best = None
        for r in range(restarts):
            if r == 0:
                theta0 = np.zeros(d + 2)
                theta0[-1] = math.log(1e-2)
            else:
                theta0 = np.concatenate([rng.uniform(-2.0, 1.0, size=d + 1),
                                         [rng.uniform(math.log(1e-4), math.log(1e-1))]])
            out = sp_optimize.minimize(self._nlml, theta0, jac=True, method="L-BFGS-B",
                                       bounds=[(-5.0, 3.0)] * (d + 1) + [(-18.0, 0.0)],
                                       options={"maxiter": 60})
            if best is None or out.fun < best.fun:
                best = out
        self.theta = best.x
        kmat = self._kernel(self.x, self.x, self.theta)
        kmat[np.diag_indices_from(kmat)] += math.exp(self.theta[-1]) + self.jitter
        self.chol = cho_factor(kmat, lower=True)
        self.alpha = cho_solve(self.chol, self.y)

    def _kernel(self, a, b, theta):
        ls = np.exp(theta[:-2])
        sig2 = math.exp(theta[-2])
        diff = (a[:, None, :] - b[None, :, :]) / ls
        return sig2 * np.exp(-0.5 * np.sum(diff * diff, axis=2))

    def _nlml(self, theta):
        n, d = self.x.shape
        ls = np.exp(theta[:d])
        sig2 = math.exp(theta[d])
        noise = math.exp(theta[d + 1])
        diff = (self.x[:, None, :] - self.x[None, :, :]) / ls
        sq = np.sum(diff * diff, axis=2)
        kmat = sig2 * np.exp(-0.5 * sq)
        kn = kmat + (noise + self.jitter) * np.eye(n)
        try:
            low = cholesky(kn, lower=True)
        except np.linalg.LinAlgError:
            return 1e12, np.zeros_like(theta)
        alpha = solve_triangular(low.T, solve_triangular(low, self.y, lower=True))
        nlml = 0.5 * float(self.y @ alpha) + float(np.sum(np.log(np.diag(low)))) \
            + 0.5 * n * math.log(2.0 * math.pi)
        kinv = cho_solve((low, True), np.eye(n))
        outer = np.outer(alpha, alpha) - kinv
        grad = np.empty_like(theta)
        for i in range(d):
            dk = kmat * (diff[:, :, i] ** 2)
            grad[i] = -0.5 * float(np.sum(outer * dk))
        grad[d] = -0.5 * float(np.sum(outer * kmat))
        grad[d + 1] = -0.5 * noise * float(np.trace(outer))
        return nlml, grad

    def lengthscales(self) -> np.ndarray:
        return np.exp(self.theta[:self.x.shape[1]])

    def sample(self, cand: np.ndarray, n_draws: int,
               rng: np.random.Generator) -> np.ndarray:
        """Joint posterior draws at the candidates, in original y units."""
        kc = self._kernel(self.x, cand, self.theta)
        mu = kc.T @ self.alpha
        v = cho_solve(self.chol, kc)
        cov = self._kernel(cand, cand, self.theta) - kc.T @ v
        cov[np.diag_indices_from(cov)] += 1e-10
        draws = rng.multivariate_normal(mu, cov, size=n_draws, method="cholesky")
        return draws * self.y_std + self.y_mean


def optimize(space: SearchSpace, objective, cfg: BOConfig):
    """Minimize a hyperparameter objective inside one trust region.

    objective is either a callable mapping a {name: value} dict to a float,
    or an ODE problem object, in which case bo_objective evaluates it.
    Returns (best_point, BOHistory); history length equals the number of
    objective evaluations, which is min(max_evals, evaluations done when the
    trust region collapses below its minimum side).
    """
    if not callable(objective):
        problem = objective
        objective = lambda pt: bo_objective(pt, problem, cfg)

    rng = np.random.default_rng(cfg.seed)
    d = space.dim
    history = BOHistory()

    sobol = qmc.Sobol(d, scramble=True, seed=int(rng.integers(2 ** 31)))
    n_init = min(cfg.n_init, cfg.max_evals)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # Sobol balance note
        x_unit = np.clip(sobol.random(n_init), 0.0, 1.0)
    xs, ys = [], []
    tr = TrustRegion(center=x_unit[0].copy(),
                     failure_tol=max(1, math.ceil(d / cfg.batch_size)))
    for u in x_unit:
        point = space.from_unit(u)
        val = float(objective(point))
        xs.append(u)
        ys.append(val)
        history.append(point, val, tr.side_length)

    best_i = int(np.argmin(ys))
    tr.center = xs[best_i].copy()

    while len(history) < cfg.max_evals and tr.side_length >= tr.min_side:
        x_arr = np.asarray(xs)
        y_arr = np.asarray(ys)
        batch = min(cfg.batch_size, cfg.max_evals - len(history))
        n_cand = min(100 * d, 500)
        try:
            gp = _Surrogate(x_arr, y_arr, rng)
            ls = gp.lengthscales()
            weights = ls / np.exp(np.mean(np.log(ls)))
            weights = np.clip(weights, 0.1, 10.0)
            lo, hi = tr.bounds(weights)
            cand = rng.uniform(lo, hi, size=(n_cand, d))
            draws = gp.sample(cand, batch, rng)
            picks = []
            for row in draws:
                order = np.argsort(row)
                j = next((int(j) for j in order if int(j) not in picks), int(order[0]))
                picks.append(j)
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            warnings.warn(f"surrogate fit failed ({exc}); sampling uniformly "
                          "inside the trust region", DegenerateSurrogateWarning)
            lo, hi = tr.bounds(np.ones(d))
            cand = rng.uniform(lo, hi, size=(max(batch, 8), d))
            picks = list(range(batch))

        incumbent = float(np.min(y_arr))
        batch_vals = []
        for j in picks[:batch]:
            u = cand[j]
            point = space.from_unit(u)
            val = float(objective(point))
            xs.append(u)
            ys.append(val)
            batch_vals.append(val)
            history.append(point, val, tr.side_length)
        improved = min(batch_vals) < incumbent
        tr.record(improved)
        best_i = int(np.argmin(ys))
        tr.center = xs[best_i].copy()

    best_i = int(np.argmin(ys))
    return space.from_unit(xs[best_i]), history
