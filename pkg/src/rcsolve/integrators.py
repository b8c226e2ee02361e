"""Classical fixed-step integrators used as baselines and reference oracles."""

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteStateError
from .linear import eval_on_grid
from .reservoir import time_grid

__all__ = ["Trajectory", "explicit_rhs", "euler_integrate", "rk4_integrate"]


@dataclass(frozen=True)
class Trajectory:
    """Grid and values from a stepping integrator; y is (K,) for scalar
    problems and (K, R) for systems."""

    times: np.ndarray
    y: np.ndarray


def explicit_rhs(ode):
    """Vector field F with dy/dt = F(t, y) for a residual-form problem.

    Scalar first-order problems expose a1, a0, force (and optionally q for a
    quadratic term); systems carry an explicit rhs attribute because their
    residual form is not invertible in general.  Raw callables pass through.
    """
    if callable(ode) and not hasattr(ode, "a1"):
        return ode
    rhs = getattr(ode, "rhs", None)
    if rhs is not None:
        return rhs
    if hasattr(ode, "a1"):
        a1, a0, force = ode.a1, ode.a0, ode.force
        q = getattr(ode, "q", 0.0)

        def field(t, y):
            t = np.asarray(t, dtype=float)
            a1v = eval_on_grid(a1, t)
            if np.any(a1v == 0.0):
                raise ZeroDivisionError("leading coefficient vanishes at t = %r" % t)
            qy2 = eval_on_grid(q, t) * y * y
            return (eval_on_grid(force, t) - eval_on_grid(a0, t) * y - qy2) / a1v

        return field
    raise TypeError(f"cannot derive an explicit right-hand side from {type(ode).__name__}")


def _prepare(ode, ic, dt, t_range):
    field = explicit_rhs(ode)
    scalar = np.ndim(ic) == 0
    y0 = np.atleast_1d(np.asarray(ic, dtype=float))
    times = time_grid(t_range[0], t_range[1], dt)
    return field, scalar, y0, times


def _check_finite(y, t):
    if not np.isfinite(y).all():
        raise NonFiniteStateError(f"integrator state left the finite range near t = {t:.6g}")


def euler_integrate(ode, ic, dt: float, t_range) -> Trajectory:
    """Forward Euler y_{n+1} = y_n + dt F(t_n, y_n)."""
    field, scalar, y0, times = _prepare(ode, ic, dt, t_range)
    out = np.empty((times.shape[0],) + y0.shape)
    y = y0
    out[0] = y
    for n in range(times.shape[0] - 1):
        y = y + dt * np.asarray(field(times[n], y), dtype=float)
        _check_finite(y, times[n + 1])
        out[n + 1] = y
    return Trajectory(times=times, y=out[:, 0] if scalar else out)


def rk4_integrate(ode, ic, dt: float, t_range) -> Trajectory:
    """Classical fourth-order Runge-Kutta; the reference oracle for problems
    without a closed-form solution."""
    field, scalar, y0, times = _prepare(ode, ic, dt, t_range)
    out = np.empty((times.shape[0],) + y0.shape)
    y = y0
    out[0] = y
    for n in range(times.shape[0] - 1):
        t = times[n]
        k1 = np.asarray(field(t, y), dtype=float)
        k2 = np.asarray(field(t + 0.5 * dt, y + 0.5 * dt * k1), dtype=float)
        k3 = np.asarray(field(t + 0.5 * dt, y + 0.5 * dt * k2), dtype=float)
        k4 = np.asarray(field(t + dt, y + dt * k3), dtype=float)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check_finite(y, times[n + 1])
        out[n + 1] = y
    return Trajectory(times=times, y=out[:, 0] if scalar else out)
