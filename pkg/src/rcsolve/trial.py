"""Trial-solution basis built on top of reservoir trajectories.

A candidate solution is y(t) = psi0 + g(t) * (w . [1, h(t)]) with a ramp
g that vanishes at the start of the grid, so the initial condition holds
for any readout w.  This module turns a state trajectory into the matrix
pair (s_mat, s_dot) that every solver consumes, and evaluates candidate
solutions given readout weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionMismatchError
from .reservoir import StateTrajectory


@dataclass(frozen=True)
class GFunction:
    """Ramp g and its derivative; the contract is g(0) == 0."""

    g: Callable[[np.ndarray], np.ndarray]
    g_dot: Callable[[np.ndarray], np.ndarray]


# saturating exponential ramp; expm1 keeps small-t values exact
EXP_RAMP = GFunction(g=lambda t: -np.expm1(-t), g_dot=lambda t: np.exp(-t))


def g_of_t(t):
    """Default ramp values (g, g_dot) at the given times."""
    t = np.asarray(t, dtype=float)
    return EXP_RAMP.g(t), EXP_RAMP.g_dot(t)


@dataclass(frozen=True)
class TrialBasis:
    """Ramped states S = g(t - t0) * states and the exact time derivative
    S_dot = g_dot * states + g * state_derivs (full product rule, bias
    column included: its derivative column is g_dot itself)."""

    times: np.ndarray       # (K,)
    s_mat: np.ndarray       # (K, M+1)
    s_dot: np.ndarray       # (K, M+1)
    g_vals: np.ndarray      # (K,)
    g_dot_vals: np.ndarray  # (K,)

    @property
    def n_features(self) -> int:
        return self.s_mat.shape[1]

    @property
    def n_points(self) -> int:
        return self.times.shape[0]


def build_basis(traj: StateTrajectory, g_pair: GFunction | None = None) -> TrialBasis:
    """Apply the ramp to a trajectory.  The ramp argument is shifted by the
    first grid time, so grids starting at t0 > 0 keep g == 0 at their first
    point and the initial condition stays exact."""
    if g_pair is None:
        g_pair = EXP_RAMP
    g0 = float(np.asarray(g_pair.g(np.asarray(0.0))))
    if abs(g0) > 1e-12:
        raise ValueError(f"ramp must vanish at zero, got g(0) = {g0}")
    tau = traj.times - traj.times[0]
    g_vals = np.asarray(g_pair.g(tau), dtype=float)
    g_dot_vals = np.asarray(g_pair.g_dot(tau), dtype=float)
    s_mat = g_vals[:, None] * traj.states
    s_dot = g_dot_vals[:, None] * traj.states + g_vals[:, None] * traj.state_derivs
    for arr in (s_mat, s_dot, g_vals, g_dot_vals):
        arr.flags.writeable = False
    return TrialBasis(times=traj.times, s_mat=s_mat, s_dot=s_dot,
                      g_vals=g_vals, g_dot_vals=g_dot_vals)


def evaluate(basis: TrialBasis, w: np.ndarray, psi0):
    """Candidate solution and its derivative for readout weights w.

    A 1-d w of length M+1 with scalar psi0 gives (K,) outputs; a 2-d w of
    shape (R, M+1) with psi0 of length R gives (K, R) outputs.  y at the
    first grid point equals psi0 bit-exactly because the ramp vanishes there.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        if w.shape[0] != basis.n_features:
            raise DimensionMismatchError(
                f"weights have {w.shape[0]} entries, basis has {basis.n_features} columns")
        psi0 = float(np.asarray(psi0))
        y = psi0 + basis.s_mat @ w
        y_dot = basis.s_dot @ w
        return y, y_dot
    if w.ndim == 2:
        if w.shape[1] != basis.n_features:
            raise DimensionMismatchError(
                f"weights have {w.shape[1]} columns, basis has {basis.n_features}")
        psi0 = np.asarray(psi0, dtype=float).reshape(-1)
        if psi0.shape[0] != w.shape[0]:
            raise DimensionMismatchError(
                f"psi0 has {psi0.shape[0]} entries for {w.shape[0]} outputs")
        y = psi0[None, :] + basis.s_mat @ w.T
        y_dot = basis.s_dot @ w.T
        return y, y_dot
    raise DimensionMismatchError(f"weights must be 1-d or 2-d, got ndim={w.ndim}")
