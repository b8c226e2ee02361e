"""Quadratic (Bernoulli-type) scalar ODEs: a1 y' + a0 y + q y^2 = f.

The closed-form machinery for linear problems carries over after dropping the
term quadratic in the readout output: with y = psi0 + S w, the residual's
(S w)^2 part is the only obstruction, and for small readouts it is negligible.
What remains is a ridge problem with the characteristic matrices shifted by
the quadratic coefficient, giving a cheap warm start that gradient descent
then refines against the full nonlinear residual.
"""

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .linear import (
    CharMatrices,
    LinearSolveResult,
    closed_form_weights,
    eval_on_grid,
    forcing_offset,
    gram_ridge,
    residual_matrix,
)
from .errors import SingularCoefficientError
from .reservoir import Reservoir, propagate
from .training import (
    GDConfig,
    INIT_MODES,
    ResidualProblem,
    TrainTrace,
    frozen_trace,
    loss_and_grad,
    random_init,
    train,
)
from .trial import TrialBasis, build_basis, evaluate

__all__ = [
    "BernoulliODE",
    "BernoulliSolveResult",
    "INIT_MODES",
    "linearized_matrices",
    "linearized_weights",
    "residual_problem",
    "solve_bernoulli",
]


@dataclass
class BernoulliODE:
    """a1(t) y' + a0(t) y + q(t) y^2 = f(t) for each initial value."""

    a1: Callable | float
    a0: Callable | float
    q: Callable | float
    force: Callable | float
    psi0_list: Sequence[float]
    t_range: tuple[float, float]


def linearized_matrices(ode: BernoulliODE, basis: TrialBasis, psi0: float,
                        d_h: np.ndarray | None = None) -> CharMatrices:
    """Characteristic matrices with the readout-quadratic term dropped.

    Row-wise: the feature matrix gains 2 q(t_n) psi0 * s_mat[n, :] and the
    offset gains q(t_n) psi0^2 (the surviving pieces of q (psi0 + S w)^2).
    """
    if d_h is None:
        d_h = residual_matrix(ode, basis)
    qv = eval_on_grid(ode.q, basis.times)
    d_h_mod = d_h + (2.0 * psi0 * qv)[:, None] * basis.s_mat
    d_0_mod = forcing_offset(ode, basis, psi0) + qv * psi0 ** 2
    return CharMatrices(d_h=d_h_mod, d_0=d_0_mod)


def linearized_weights(ode: BernoulliODE, basis: TrialBasis, psi0: float,
                       lam: float, d_h: np.ndarray | None = None) -> np.ndarray:
    """Closed-form ridge weights of the linearized residual."""
    return closed_form_weights(linearized_matrices(ode, basis, psi0, d_h=d_h), lam)


def residual_problem(ode: BernoulliODE, basis: TrialBasis, psi0: float) -> ResidualProblem:
    """Full nonlinear residual bundle for the trainer, coefficients frozen on
    the grid."""
    t = basis.times
    a1v = eval_on_grid(ode.a1, t)[:, None]
    a0v = eval_on_grid(ode.a0, t)[:, None]
    qv = eval_on_grid(ode.q, t)[:, None]
    fv = eval_on_grid(ode.force, t)[:, None]
    if np.any(a1v == 0.0):
        raise SingularCoefficientError("leading coefficient a1 vanishes on the grid")

    return ResidualProblem(
        ic=[psi0],
        residual=lambda tt, y, yd: a1v * yd + a0v * y + qv * y * y - fv,
        residual_dy=lambda tt, y, yd: (a0v + 2.0 * qv * y)[:, :, None],
        residual_dydot=lambda tt, y, yd: np.broadcast_to(a1v[:, :, None], y.shape + (1,)),
    )


@dataclass
class BernoulliSolveResult(LinearSolveResult):
    """Per-IC solutions plus the training trace of each GD run."""

    traces: list = None


def solve_bernoulli(ode: BernoulliODE, res: Reservoir, cfg: GDConfig,
                    init: str = "linearized_then_gd",
                    basis: TrialBasis | None = None) -> BernoulliSolveResult:
    """Solve for every IC with one reservoir pass.

    init picks the strategy: "linearized" stops at the closed-form warm
    start, "random" trains from small random weights, and the default
    "linearized_then_gd" trains from the warm start.
    """
    if init not in INIT_MODES:
        raise ValueError(f"init must be one of {INIT_MODES}, got {init!r}")
    if basis is None:
        basis = build_basis(propagate(res, *ode.t_range))

    t = basis.times
    a1v = eval_on_grid(ode.a1, t)
    a0v = eval_on_grid(ode.a0, t)
    qv = eval_on_grid(ode.q, t)
    fv = eval_on_grid(ode.force, t)
    d_h = residual_matrix(ode, basis) if init != "random" else None
    lam = gram_ridge(res.hyper)

    psi0s = np.asarray(list(ode.psi0_list), dtype=float)
    k, p = basis.n_points, basis.n_features
    y = np.empty((len(psi0s), k))
    y_dot = np.empty((len(psi0s), k))
    resid = np.empty((len(psi0s), k))
    w_out = np.empty((len(psi0s), p))
    traces = []
    for i, psi0 in enumerate(psi0s):
        problem = residual_problem(ode, basis, psi0)
        if init == "random":
            w0 = random_init(p, cfg.seed + i)
        else:
            w0 = linearized_weights(ode, basis, psi0, lam, d_h=d_h)
        if init == "linearized":
            w_best = w0
            loss0, _ = loss_and_grad(problem, basis, w0, cfg.enet_alpha, cfg.enet_strength)
            traces.append(frozen_trace(loss0))
        else:
            w_best, trace = train(problem, basis, w0, cfg)
            traces.append(trace)
        yi, ydi = evaluate(basis, w_best, psi0)
        y[i] = yi
        y_dot[i] = ydi
        resid[i] = a1v * ydi + a0v * yi + qv * yi * yi - fv
        w_out[i] = w_best
    return BernoulliSolveResult(times=t, y=y, y_dot=y_dot, residual=resid,
                                w_out=w_out, psi0_list=psi0s, traces=traces)
