"""Trial basis construction and evaluation."""

import numpy as np
import pytest

from rcsolve import DimensionMismatchError, HyperParams, build_reservoir, propagate
from rcsolve.reservoir import StateTrajectory
from rcsolve.trial import EXP_RAMP, GFunction, TrialBasis, build_basis, evaluate, g_of_t

G1 = 0.6321205588285577       # 1 - exp(-1)
GDOT1 = 0.36787944117144233   # exp(-1)


def small_traj(dt=0.05, t_end=2.0, seed=1, alpha=0.25):
    hyper = HyperParams(n_nodes=20, connectivity=0.5, spectral_radius=0.9,
                        leaking_rate=alpha, bias=0.1, dt=dt, regularization=0.0,
                        random_seed=seed)
    return propagate(build_reservoir(hyper), 0.0, t_end)


class TestRamp:
    def test_vanishes_at_zero_exactly(self):
        g, gd = g_of_t(0.0)
        assert g == 0.0
        assert gd == 1.0

    def test_frozen_values_at_one(self):
        g, gd = g_of_t(1.0)
        assert g == pytest.approx(G1, abs=1e-15)
        assert gd == pytest.approx(GDOT1, abs=1e-15)

    def test_saturates_and_derivative_decays(self):
        t = np.linspace(0.0, 20.0, 200)
        g, gd = g_of_t(t)
        assert np.all(np.diff(g) > 0)
        assert np.all(gd > 0)
        assert g[-1] == pytest.approx(1.0, abs=1e-8)

    def test_derivative_matches_finite_difference(self):
        t = np.linspace(0.1, 3.0, 30)
        h = 1e-6
        g_plus, _ = g_of_t(t + h)
        g_minus, _ = g_of_t(t - h)
        _, gd = g_of_t(t)
        np.testing.assert_allclose((g_plus - g_minus) / (2 * h), gd, atol=1e-9)


class TestBuildBasis:
    def test_first_row_identically_zero(self):
        basis = build_basis(small_traj())
        assert np.all(basis.s_mat[0] == 0.0)

    def test_bias_column_derivative_is_gdot(self):
        basis = build_basis(small_traj())
        np.testing.assert_array_equal(basis.s_dot[:, 0], basis.g_dot_vals)

    def test_hand_rows_against_frozen_state(self):
        # one state row [1, 0.3, -0.2] with derivs [0, 0.5, -0.1] at t = 1
        times = np.array([0.0, 0.5, 1.0])
        states = np.array([[1.0, 0.0, 0.0], [1.0, 0.1, 0.4], [1.0, 0.3, -0.2]])
        derivs = np.array([[0.0, 0.2, 0.8], [0.0, 0.4, -0.6], [0.0, 0.5, -0.1]])
        traj = StateTrajectory(times=times, states=states, state_derivs=derivs)
        basis = build_basis(traj)
        np.testing.assert_allclose(basis.s_mat[2], G1 * states[2], atol=1e-15)
        np.testing.assert_allclose(basis.s_dot[2], GDOT1 * states[2] + G1 * derivs[2],
                                   atol=1e-15)

    def test_shifted_grid_keeps_first_row_zero(self):
        hyper = HyperParams(n_nodes=10, connectivity=0.6, spectral_radius=0.8,
                            leaking_rate=0.5, bias=0.0, dt=0.1, regularization=0.0)
        traj = propagate(build_reservoir(hyper), 3.0, 5.0)
        basis = build_basis(traj)
        assert np.all(basis.s_mat[0] == 0.0)
        assert basis.g_vals[1] > 0.0

    def test_finite_difference_consistency_improves_with_dt(self):
        # alpha scaled with dt so both grids discretize the same smooth flow
        errs = []
        for dt in (0.02, 0.01):
            traj = small_traj(dt=dt, t_end=2.0, alpha=5.0 * dt)
            basis = build_basis(traj)
            fd = (basis.s_mat[2:] - basis.s_mat[:-2]) / (2 * dt)
            errs.append(np.max(np.abs(fd - basis.s_dot[1:-1])))
        assert errs[1] < errs[0] / 1.8
        assert errs[1] < 0.05

    def test_custom_linear_ramp(self):
        traj = small_traj()
        ramp = GFunction(g=lambda t: t, g_dot=lambda t: np.ones_like(t))
        basis = build_basis(traj, ramp)
        tau = traj.times - traj.times[0]
        np.testing.assert_allclose(basis.s_mat, tau[:, None] * traj.states, atol=1e-15)

    def test_ramp_not_vanishing_rejected(self):
        traj = small_traj()
        bad = GFunction(g=np.cos, g_dot=lambda t: -np.sin(t))
        with pytest.raises(ValueError):
            build_basis(traj, bad)


class TestEvaluate:
    def test_zero_weights_give_constant(self):
        basis = build_basis(small_traj())
        y, y_dot = evaluate(basis, np.zeros(basis.n_features), -2.5)
        assert np.all(y == -2.5)
        assert np.all(y_dot == 0.0)

    def test_initial_condition_exact_for_any_weights(self):
        basis = build_basis(small_traj())
        rng = np.random.default_rng(0)
        for _ in range(5):
            w = rng.standard_normal(basis.n_features) * 10
            y, _ = evaluate(basis, w, 3.7)
            assert y[0] == 3.7

    def test_multi_output_shapes_and_ics(self):
        basis = build_basis(small_traj())
        rng = np.random.default_rng(1)
        w = rng.standard_normal((3, basis.n_features))
        ic = np.array([1.0, -2.0, 0.5])
        y, y_dot = evaluate(basis, w, ic)
        assert y.shape == (basis.n_points, 3)
        assert y_dot.shape == (basis.n_points, 3)
        np.testing.assert_array_equal(y[0], ic)

    def test_linearity_in_weights(self):
        basis = build_basis(small_traj())
        rng = np.random.default_rng(2)
        w1 = rng.standard_normal(basis.n_features)
        w2 = rng.standard_normal(basis.n_features)
        y1, d1 = evaluate(basis, w1, 0.0)
        y2, d2 = evaluate(basis, w2, 0.0)
        ysum, dsum = evaluate(basis, w1 + w2, 0.0)
        np.testing.assert_allclose(ysum, y1 + y2, atol=1e-12)
        np.testing.assert_allclose(dsum, d1 + d2, atol=1e-12)

    def test_dimension_mismatches_raise(self):
        basis = build_basis(small_traj())
        with pytest.raises(DimensionMismatchError):
            evaluate(basis, np.zeros(basis.n_features + 1), 0.0)
        with pytest.raises(DimensionMismatchError):
            evaluate(basis, np.zeros((2, basis.n_features)), np.zeros(3))
        with pytest.raises(DimensionMismatchError):
            evaluate(basis, np.zeros((2, 2, 2)), 0.0)
