"""Gradient-descent training of readout weights with analytic gradients.

The trained object is a linear readout on top of frozen reservoir states, so
the loss is cheap to evaluate in full batch and its gradient is exact: for
outputs y_r = ic_r + S w_r, every residual partial folds onto rows of S and
S_dot.  The scheduler watches the loss trace for spikes and optionally runs a
decaying cyclic profile on top of the base step size.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteLossError
from .trial import TrialBasis, evaluate

__all__ = [
    "GDConfig",
    "INIT_MODES",
    "ResidualProblem",
    "TrainTrace",
    "elastic_net",
    "frozen_trace",
    "loss_and_grad",
    "random_init",
    "scheduled_lr",
    "train",
]

INIT_MODES = ("linearized", "random", "linearized_then_gd")


@dataclass(frozen=True)
class GDConfig:
    """Settings for one gradient-descent run.

    gamma_cyclic switches on the cyclic profile; cyclic_period and
    cyclic_floor shape it (triangle period in epochs, valley as a fraction of
    the base step).  momentum is off by default; plain GD is enough for a
    convex loss in one linear layer.
    """

    epochs: int
    learning_rate: float
    spike_threshold: float = 0.25
    gamma: float = 0.9
    gamma_cyclic: float | None = None
    cyclic_cap_epochs: int = 5000
    cyclic_period: int = 200
    cyclic_floor: float = 0.1
    enet_alpha: float = 0.0
    enet_strength: float = 0.0
    momentum: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError(f"epochs must be a positive integer, got {self.epochs}")
        object.__setattr__(self, "epochs", int(self.epochs))
        if self.learning_rate <= 0.0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.spike_threshold <= 0.0:
            raise ValueError(f"spike_threshold must be positive, got {self.spike_threshold}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.gamma_cyclic is not None and not 0.0 < self.gamma_cyclic < 1.0:
            raise ValueError(f"gamma_cyclic must lie in (0, 1), got {self.gamma_cyclic}")
        if int(self.cyclic_cap_epochs) != self.cyclic_cap_epochs or self.cyclic_cap_epochs < 1:
            raise ValueError(
                f"cyclic_cap_epochs must be a positive integer, got {self.cyclic_cap_epochs}")
        object.__setattr__(self, "cyclic_cap_epochs", int(self.cyclic_cap_epochs))
        if int(self.cyclic_period) != self.cyclic_period or self.cyclic_period < 2:
            raise ValueError(f"cyclic_period must be an integer >= 2, got {self.cyclic_period}")
        object.__setattr__(self, "cyclic_period", int(self.cyclic_period))
        if not 0.0 < self.cyclic_floor <= 1.0:
            raise ValueError(f"cyclic_floor must lie in (0, 1], got {self.cyclic_floor}")
        if not 0.0 <= self.enet_alpha <= 1.0:
            raise ValueError(f"enet_alpha must lie in [0, 1], got {self.enet_alpha}")
        if self.enet_strength < 0.0:
            raise ValueError(f"enet_strength must be nonnegative, got {self.enet_strength}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class ResidualProblem:
    """Vectorized residual bundle the trainer minimizes.

    residual(t, y, y_dot) returns a (K, I) array of the I equation residuals
    at every grid point; residual_dy and residual_dydot return (K, I, R)
    partials with respect to the R outputs y_r and their derivatives.  ic has
    length R.  hamiltonian, when set, supplies h_fn(y) -> (K,), h_grad(y) ->
    (K, R) and the conserved level energy_e, adding (energy_e - h)^2 per grid
    point to the loss.
    """

    ic: np.ndarray
    residual: callable
    residual_dy: callable
    residual_dydot: callable
    hamiltonian: object = None

    def __post_init__(self):
        object.__setattr__(self, "ic", np.atleast_1d(np.asarray(self.ic, dtype=float)))

    @property
    def dim(self) -> int:
        return self.ic.shape[0]


@dataclass
class TrainTrace:
    """Loss and step-size history of one run; row e belongs to epoch e."""

    loss_per_epoch: np.ndarray
    lr_per_epoch: np.ndarray
    best_loss: float
    best_epoch: int
    final_lr: float


def frozen_trace(loss: float) -> TrainTrace:
    """One-row trace for a solution accepted without any training."""
    return TrainTrace(loss_per_epoch=np.array([loss]), lr_per_epoch=np.array([0.0]),
                      best_loss=float(loss), best_epoch=0, final_lr=0.0)


def elastic_net(w: np.ndarray, alpha: float, strength: float):
    """Penalty strength*(alpha*||w||_1 + (1-alpha)*||w||_2^2) and its
    (sub)gradient, with sign(0) = 0 for the L1 part."""
    if strength == 0.0:
        return 0.0, np.zeros_like(w)
    value = strength * (alpha * np.sum(np.abs(w)) + (1.0 - alpha) * np.sum(w * w))
    grad = strength * (alpha * np.sign(w) + 2.0 * (1.0 - alpha) * w)
    return float(value), grad


def loss_and_grad(problem: ResidualProblem, basis: TrialBasis, w: np.ndarray,
                  enet_alpha: float = 0.0, enet_strength: float = 0.0):
    """Full-batch loss and its exact gradient, averaged over the grid.

    loss = (1/K) [ sum_n ( sum_i r_i(t_n)^2 (+ (E - H(y_n))^2) ) + penalty(w) ];
    the gradient has the same shape as w.  Scaling the whole objective by the
    grid size keeps loss values, spike thresholds, and step sizes on a scale
    that does not depend on how finely the range is sampled (tuned scheduler
    settings for the bundled benchmark problems assume this), and it leaves
    every minimizer identical to the plain-sum objective, so a pure-L2
    penalty of strength lambda still matches the ridge solution at the same
    lambda.  Raises NonFiniteLossError when the loss or the gradient leaves
    the finite range.
    """
    w = np.asarray(w, dtype=float)
    w2 = np.atleast_2d(w)
    with np.errstate(over="ignore", invalid="ignore"):
        y, y_dot = evaluate(basis, w2, problem.ic)  # (K, R) each
        t = basis.times
        k = t.shape[0]

        r = np.asarray(problem.residual(t, y, y_dot), dtype=float)
        if r.ndim == 1:
            r = r[:, None]
        loss = float(np.sum(r * r))

        dr_dy = np.asarray(problem.residual_dy(t, y, y_dot), dtype=float)
        dr_dydot = np.asarray(problem.residual_dydot(t, y, y_dot), dtype=float)
        if dr_dy.ndim == 2:
            dr_dy = dr_dy[:, :, None]
        if dr_dydot.ndim == 2:
            dr_dydot = dr_dydot[:, :, None]

        # a[n, r] multiplies s_mat[n, :], b[n, r] multiplies s_dot[n, :]
        a = 2.0 * np.einsum("ki,kir->kr", r, dr_dy)
        b = 2.0 * np.einsum("ki,kir->kr", r, dr_dydot)

        ham = problem.hamiltonian
        if ham is not None:
            gap = ham.energy_e - np.asarray(ham.h_fn(y), dtype=float)
            loss += float(np.sum(gap * gap))
            a = a - 2.0 * gap[:, None] * np.asarray(ham.h_grad(y), dtype=float)

        pen, pen_grad = elastic_net(w2, enet_alpha, enet_strength)
        loss = (loss + pen) / k
        grad = (a.T @ basis.s_mat + b.T @ basis.s_dot + pen_grad) / k

    if w.ndim == 1:
        grad = grad[0]
    if not (np.isfinite(loss) and np.isfinite(grad).all()):
        raise NonFiniteLossError("training loss left the finite range")
    return loss, grad


def random_init(shape, seed: int) -> np.ndarray:
    """Small random start, N(0, 0.01^2): keeps the readout in the regime
    where the linearized closed form is a good description."""
    return 0.01 * np.random.default_rng(seed).standard_normal(shape)


def scheduled_lr(base_lr: float, epoch: int, cfg: GDConfig) -> float:
    """Step size for one epoch under the cyclic profile.

    Triangle wave between cyclic_floor*base_lr and base_lr with period
    cyclic_period, amplitude damped by gamma_cyclic**epoch, switched off
    (plain base_lr) once epoch reaches cyclic_cap_epochs.
    """
    if cfg.gamma_cyclic is None or epoch >= cfg.cyclic_cap_epochs:
        return base_lr
    half = cfg.cyclic_period / 2.0
    cycle = math.floor(1.0 + epoch / cfg.cyclic_period)
    x = abs(epoch / half - 2.0 * cycle + 1.0)
    lo = cfg.cyclic_floor * base_lr
    return lo + (base_lr - lo) * max(0.0, 1.0 - x) * cfg.gamma_cyclic ** epoch


def train(problem, basis, w_init: np.ndarray, cfg: GDConfig, loss_fn=None):
    """Full-batch gradient descent; returns (w_best, trace).

    The weights returned are the ones with the lowest observed loss, not the
    final-epoch weights.  A spike (loss increase above spike_threshold) cuts
    the base step size by gamma and rewinds the weights to the best ones
    seen, so a divergent excursion costs one cut instead of one cut per
    epoch it would take to blow up.  A non-finite loss is recorded as +inf
    and handled by the same rule (a spike of infinite size).
    """
    if loss_fn is None:
        def loss_fn(p, b, wt):
            return loss_and_grad(p, b, wt, cfg.enet_alpha, cfg.enet_strength)

    w = np.array(w_init, dtype=float)
    velocity = np.zeros_like(w)
    base_lr = cfg.learning_rate
    losses = np.empty(cfg.epochs)
    lrs = np.empty(cfg.epochs)
    best_loss = np.inf
    best_epoch = -1
    best_w = w.copy()
    prev_loss = None
    lr = base_lr

    for epoch in range(cfg.epochs):
        lr = scheduled_lr(base_lr, epoch, cfg)
        try:
            loss, grad = loss_fn(problem, basis, w)
            if not np.isfinite(loss):
                raise NonFiniteLossError
        except NonFiniteLossError:
            loss, grad = np.inf, None
        losses[epoch] = loss
        lrs[epoch] = lr

        spiked = prev_loss is not None and loss - prev_loss > cfg.spike_threshold
        if spiked:
            base_lr *= cfg.gamma
        if loss < best_loss:
            best_loss = loss
            best_epoch = epoch
            best_w = w.copy()

        if grad is None or (spiked and best_loss < loss):
            w = best_w.copy()
            velocity[...] = 0.0
        elif cfg.momentum > 0.0:
            velocity = cfg.momentum * velocity - lr * grad
            w = w + velocity
        else:
            w = w - lr * grad
        prev_loss = loss

    trace = TrainTrace(loss_per_epoch=losses, lr_per_epoch=lrs,
                       best_loss=float(best_loss), best_epoch=int(best_epoch),
                       final_lr=float(lr))
    return best_w, trace
