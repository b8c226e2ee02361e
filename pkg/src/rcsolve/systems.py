"""Coupled first-order ODE systems trained on a shared reservoir basis.

An ODESystem bundles R residual equations r_i(t, y, y') = 0 with their
analytic partials, one initial condition vector, and optionally a conserved
energy function whose level set the trained solution is pulled toward.  All
outputs share a single reservoir propagation; each output gets its own
readout row.  The warm start linearizes every residual about the frozen
initial-condition path and solves the resulting coupled ridge problem in
closed form, which is also the exact solution whenever the system is linear.
"""

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .linear import CharMatrices, closed_form_weights, gram_ridge, rmsr
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
    "HamiltonianSpec",
    "ODESystem",
    "SystemSolveResult",
    "harmonic_oscillator",
    "linearized_system_matrices",
    "linearized_system_weights",
    "nonlinear_oscillator",
    "solve_system",
    "system_loss",
    "system_problem",
]


@dataclass(frozen=True)
class HamiltonianSpec:
    """Conserved energy attached to a system.

    h_fn maps solution samples (K, R) to energies (K,); h_grad returns the
    (K, R) gradient with respect to the outputs.  energy_e is the level the
    solution must stay on; build instances with from_ic so that it equals
    h_fn at the initial condition exactly (same floating-point value, not an
    approximation of it).
    """

    h_fn: Callable
    h_grad: Callable
    energy_e: float

    @classmethod
    def from_ic(cls, h_fn: Callable, h_grad: Callable, ic) -> "HamiltonianSpec":
        ic = np.atleast_1d(np.asarray(ic, dtype=float))
        energy = float(np.asarray(h_fn(ic[None, :]), dtype=float).reshape(()))
        return cls(h_fn=h_fn, h_grad=h_grad, energy_e=energy)


@dataclass
class ODESystem:
    """R coupled residual equations r_i(t, y, y') = 0 with analytic partials.

    residuals[i](t, y, y_dot) maps a grid t (K,) and samples y, y_dot (K, R)
    to the i-th residual (K,).  residuals_dy[i] and residuals_dydot[i] return
    the (K, R) partials of that residual with respect to y and y'.  The
    partials are spot checked against central finite differences when the
    system is constructed, so a typo in a derivative fails fast instead of
    silently mistraining.  rhs, when the system can be written as
    y' = rhs(t, y), feeds the stepping integrators used as baselines.
    """

    residuals: Sequence[Callable]
    residuals_dy: Sequence[Callable]
    residuals_dydot: Sequence[Callable]
    ic: np.ndarray
    t_range: tuple[float, float]
    hamiltonian: HamiltonianSpec | None = None
    rhs: Callable | None = None

    def __post_init__(self):
        self.ic = np.atleast_1d(np.asarray(self.ic, dtype=float))
        if not (len(self.residuals) == len(self.residuals_dy)
                == len(self.residuals_dydot) == self.dim):
            raise ValueError("need one residual and one pair of partials per output")
        _check_partials(self)

    @property
    def dim(self) -> int:
        return self.ic.shape[0]


def _check_partials(sys: ODESystem, n_points: int = 3, step: float = 1e-6) -> None:
    """Compare every analytic partial with central differences at a few
    points around the initial condition; raise on disagreement."""
    rng = np.random.default_rng(0)
    t0, t1 = sys.t_range
    t = rng.uniform(t0, t1, size=n_points)
    y = sys.ic + 0.25 * rng.standard_normal((n_points, sys.dim))
    yd = 0.25 * rng.standard_normal((n_points, sys.dim))

    def bump(base, r, h):
        out = base.copy()
        out[:, r] += h
        return out

    for i in range(sys.dim):
        got_dy = np.asarray(sys.residuals_dy[i](t, y, yd), dtype=float)
        got_dyd = np.asarray(sys.residuals_dydot[i](t, y, yd), dtype=float)
        for arr, name in ((got_dy, "residuals_dy"), (got_dyd, "residuals_dydot")):
            if arr.shape != (n_points, sys.dim):
                raise ValueError(f"{name}[{i}] must return shape (K, {sys.dim})")
        for r in range(sys.dim):
            fd = (np.asarray(sys.residuals[i](t, bump(y, r, step), yd), dtype=float)
                  - np.asarray(sys.residuals[i](t, bump(y, r, -step), yd), dtype=float)) / (2 * step)
            if not np.allclose(fd, got_dy[:, r], rtol=1e-4, atol=1e-5):
                raise ValueError(f"residuals_dy[{i}][:, {r}] disagrees with finite differences")
            fd = (np.asarray(sys.residuals[i](t, y, bump(yd, r, step)), dtype=float)
                  - np.asarray(sys.residuals[i](t, y, bump(yd, r, -step)), dtype=float)) / (2 * step)
            if not np.allclose(fd, got_dyd[:, r], rtol=1e-4, atol=1e-5):
                raise ValueError(f"residuals_dydot[{i}][:, {r}] disagrees with finite differences")
    if sys.hamiltonian is not None:
        got = np.asarray(sys.hamiltonian.h_grad(y), dtype=float)
        for r in range(sys.dim):
            fd = (np.asarray(sys.hamiltonian.h_fn(bump(y, r, step)), dtype=float)
                  - np.asarray(sys.hamiltonian.h_fn(bump(y, r, -step)), dtype=float)) / (2 * step)
            if not np.allclose(fd, got[:, r], rtol=1e-4, atol=1e-5):
                raise ValueError(f"h_grad[:, {r}] disagrees with finite differences of h_fn")


def system_problem(sys: ODESystem) -> ResidualProblem:
    """Stack the per-equation residuals into the trainer's vectorized form."""

    def residual(t, y, y_dot):
        return np.stack([np.asarray(r(t, y, y_dot), dtype=float)
                         for r in sys.residuals], axis=1)

    def residual_dy(t, y, y_dot):
        return np.stack([np.asarray(d(t, y, y_dot), dtype=float)
                         for d in sys.residuals_dy], axis=1)

    def residual_dydot(t, y, y_dot):
        return np.stack([np.asarray(d(t, y, y_dot), dtype=float)
                         for d in sys.residuals_dydot], axis=1)

    return ResidualProblem(ic=sys.ic, residual=residual, residual_dy=residual_dy,
                           residual_dydot=residual_dydot, hamiltonian=sys.hamiltonian)


def system_loss(sys: ODESystem, basis: TrialBasis, w: np.ndarray,
                enet_alpha: float = 0.0, enet_strength: float = 0.0):
    """Training loss and gradient for readout rows w (R, M+1) on this system.

    Per grid point the loss sums the squared residual of every equation and,
    when a Hamiltonian is attached, the squared gap between its energy level
    and the energy of the current solution; the whole objective (penalty
    included) is averaged over the grid.
    """
    return loss_and_grad(system_problem(sys), basis, w, enet_alpha, enet_strength)


def linearized_system_matrices(sys: ODESystem, basis: TrialBasis) -> CharMatrices:
    """First-order expansion of all residuals about the frozen IC path.

    Holding y at the initial condition and y' at zero, each residual becomes
    affine in the stacked readout vector [w_1, ..., w_R]; the rows of every
    equation are stacked into one least-squares system that couples the
    outputs through the partials on that path.  The energy term is left out
    on purpose: linearized about a single point it would pin the solution
    near that point for all t, which fights any orbit that actually moves,
    and dropping it keeps the expansion exact for linear systems.
    """
    t = basis.times
    k = t.shape[0]
    dim = sys.dim
    y0 = np.broadcast_to(sys.ic, (k, dim))
    yd0 = np.zeros((k, dim))

    blocks = []
    offsets = []
    for i in range(dim):
        a = np.asarray(sys.residuals_dy[i](t, y0, yd0), dtype=float)
        b = np.asarray(sys.residuals_dydot[i](t, y0, yd0), dtype=float)
        blocks.append(np.hstack([a[:, r:r + 1] * basis.s_mat + b[:, r:r + 1] * basis.s_dot
                                 for r in range(dim)]))
        offsets.append(np.asarray(sys.residuals[i](t, y0, yd0), dtype=float))
    return CharMatrices(d_h=np.vstack(blocks), d_0=np.concatenate(offsets))


def linearized_system_weights(sys: ODESystem, basis: TrialBasis, lam: float) -> np.ndarray:
    """Ridge solution (R, M+1) of the linearized system at strength lam."""
    cm = linearized_system_matrices(sys, basis)
    return closed_form_weights(cm, lam).reshape(sys.dim, -1)


@dataclass
class SystemSolveResult:
    """Joint solution of one system; column r of y belongs to output r."""

    times: np.ndarray       # (K,)
    y: np.ndarray           # (K, R)
    y_dot: np.ndarray       # (K, R)
    residual: np.ndarray    # (K, R)
    w_out: np.ndarray       # (R, M+1)
    ic: np.ndarray          # (R,)
    trace: TrainTrace
    energy_violation: np.ndarray | None = None  # (K,) when a Hamiltonian is set

    def rmsr(self) -> np.ndarray:
        """Root-mean-square residual across equations, per time point."""
        return rmsr(self.residual.T)


def solve_system(sys: ODESystem, res: Reservoir, cfg: GDConfig,
                 init: str = "linearized_then_gd",
                 basis: TrialBasis | None = None) -> SystemSolveResult:
    """Train all outputs jointly on one reservoir pass.

    init picks the strategy: "linearized" stops at the closed-form warm
    start, "random" trains from small random weights, and the default
    "linearized_then_gd" trains from the warm start.  The ridge strength of
    the warm start comes from the reservoir's regularization hyperparameter.
    """
    if init not in INIT_MODES:
        raise ValueError(f"init must be one of {INIT_MODES}, got {init!r}")
    if basis is None:
        basis = build_basis(propagate(res, *sys.t_range))

    problem = system_problem(sys)
    n_feat = basis.s_mat.shape[1]
    if init == "random":
        w0 = random_init((sys.dim, n_feat), cfg.seed)
    else:
        w0 = linearized_system_weights(sys, basis, gram_ridge(res.hyper))

    if init == "linearized":
        loss, _ = loss_and_grad(problem, basis, w0, cfg.enet_alpha, cfg.enet_strength)
        w, trace = w0, frozen_trace(loss)
    else:
        w, trace = train(problem, basis, w0, cfg)

    y, y_dot = evaluate(basis, w, sys.ic)
    resid = problem.residual(basis.times, y, y_dot)
    violation = None
    if sys.hamiltonian is not None:
        energy = np.asarray(sys.hamiltonian.h_fn(y), dtype=float)
        violation = np.abs(sys.hamiltonian.energy_e - energy)
    return SystemSolveResult(times=basis.times, y=y, y_dot=y_dot, residual=resid,
                             w_out=w, ic=sys.ic.copy(), trace=trace,
                             energy_violation=violation)


def nonlinear_oscillator(ic=(1.3, 1.0), t_range=(0.0, 2.0 * np.pi)) -> ODESystem:
    """x' = p, p' = -x - x^3, with conserved energy p^2/2 + x^2/2 + x^4/4."""

    def h_fn(y):
        return y[:, 1] ** 2 / 2.0 + y[:, 0] ** 2 / 2.0 + y[:, 0] ** 4 / 4.0

    def h_grad(y):
        return np.stack([y[:, 0] + y[:, 0] ** 3, y[:, 1]], axis=1)

    residuals = [
        lambda t, y, yd: yd[:, 0] - y[:, 1],
        lambda t, y, yd: yd[:, 1] + y[:, 0] + y[:, 0] ** 3,
    ]
    residuals_dy = [
        lambda t, y, yd: np.stack([np.zeros_like(t), -np.ones_like(t)], axis=1),
        lambda t, y, yd: np.stack([1.0 + 3.0 * y[:, 0] ** 2, np.zeros_like(t)], axis=1),
    ]
    residuals_dydot = [
        lambda t, y, yd: np.stack([np.ones_like(t), np.zeros_like(t)], axis=1),
        lambda t, y, yd: np.stack([np.zeros_like(t), np.ones_like(t)], axis=1),
    ]
    return ODESystem(residuals=residuals, residuals_dy=residuals_dy,
                     residuals_dydot=residuals_dydot, ic=ic, t_range=t_range,
                     hamiltonian=HamiltonianSpec.from_ic(h_fn, h_grad, ic),
                     rhs=lambda t, y: np.array([y[1], -y[0] - y[0] ** 3]))


def harmonic_oscillator(ic=(1.0, 0.0), t_range=(0.0, 2.0 * np.pi)) -> ODESystem:
    """x' = p, p' = -x, with conserved energy (x^2 + p^2)/2."""

    def h_fn(y):
        return (y[:, 0] ** 2 + y[:, 1] ** 2) / 2.0

    def h_grad(y):
        return np.stack([y[:, 0], y[:, 1]], axis=1)

    residuals = [
        lambda t, y, yd: yd[:, 0] - y[:, 1],
        lambda t, y, yd: yd[:, 1] + y[:, 0],
    ]
    residuals_dy = [
        lambda t, y, yd: np.stack([np.zeros_like(t), -np.ones_like(t)], axis=1),
        lambda t, y, yd: np.stack([np.ones_like(t), np.zeros_like(t)], axis=1),
    ]
    residuals_dydot = [
        lambda t, y, yd: np.stack([np.ones_like(t), np.zeros_like(t)], axis=1),
        lambda t, y, yd: np.stack([np.zeros_like(t), np.ones_like(t)], axis=1),
    ]
    return ODESystem(residuals=residuals, residuals_dy=residuals_dy,
                     residuals_dydot=residuals_dydot, ic=ic, t_range=t_range,
                     hamiltonian=HamiltonianSpec.from_ic(h_fn, h_grad, ic),
                     rhs=lambda t, y: np.array([y[1], -y[0]]))
