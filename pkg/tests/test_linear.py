"""Closed-form ridge readout for first-order linear ODEs."""

import numpy as np
import pytest

from rcsolve import (
    CharMatrices,
    HyperParams,
    IllConditionedWarning,
    LinearODE,
    RidgeReadout,
    SingularCoefficientError,
    build_basis,
    build_reservoir,
    characteristic_matrices,
    closed_form_weights,
    propagate,
    propagation_count,
    reset_propagation_count,
    rmsr,
    solve_linear,
)
from rcsolve.linear import eval_on_grid, forcing_offset, gram_ridge, residual_matrix


def make_hyper(**kw):
    base = dict(n_nodes=60, connectivity=0.4, spectral_radius=1.1, leaking_rate=0.5,
                bias=0.2, dt=0.02, regularization=1.0, activation="tanh", random_seed=0)
    base.update(kw)
    return HyperParams(**base)


def ridge_oracle(d_h, d_0, lam):
    """Independent ridge solution via the augmented least-squares system."""
    p = d_h.shape[1]
    a = np.vstack([d_h, np.sqrt(lam) * np.eye(p)])
    b = np.concatenate([-d_0, np.zeros(p)])
    w, *_ = np.linalg.lstsq(a, b, rcond=None)
    return w


def random_instance(rng, k=40, p=12):
    return rng.standard_normal((k, p)), rng.standard_normal(k)


class TestGridEvaluation:
    def test_plain_number_broadcasts(self):
        t = np.linspace(0.0, 1.0, 5)
        assert np.array_equal(eval_on_grid(2.5, t), np.full(5, 2.5))

    def test_vectorized_callable(self):
        t = np.linspace(0.0, 1.0, 5)
        assert np.allclose(eval_on_grid(np.sin, t), np.sin(t))

    def test_scalar_only_callable(self):
        # a coefficient written for floats, not arrays
        def a0(x):
            if x > 0.5:
                return 1.0
            return -1.0

        t = np.array([0.0, 0.4, 0.6, 1.0])
        assert np.array_equal(eval_on_grid(a0, t), [-1.0, -1.0, 1.0, 1.0])

    def test_constant_returning_callable(self):
        t = np.linspace(0.0, 1.0, 7)
        assert np.array_equal(eval_on_grid(lambda t: 3.0, t), np.full(7, 3.0))


class TestCharacteristicMatrices:
    def setup_method(self):
        res = build_reservoir(make_hyper())
        self.basis = build_basis(propagate(res, 0.0, 1.0))

    def test_pure_derivative_ode_gives_s_dot(self):
        ode = LinearODE(a1=1.0, a0=0.0, force=0.0, psi0_list=[0.0], t_range=(0.0, 1.0))
        assert np.array_equal(residual_matrix(ode, self.basis), self.basis.s_dot)

    def test_pure_value_ode_gives_s_mat(self):
        ode = LinearODE(a1=1.0, a0=1.0, force=0.0, psi0_list=[0.0], t_range=(0.0, 1.0))
        d_h = residual_matrix(ode, self.basis)
        assert np.allclose(d_h, self.basis.s_dot + self.basis.s_mat, rtol=0, atol=0)

    def test_time_varying_assembly_matches_manual(self):
        ode = LinearODE(a1=lambda t: 1.0 + 0.1 * np.sin(t), a0=np.cos,
                        force=0.0, psi0_list=[0.0], t_range=(0.0, 1.0))
        t = self.basis.times
        want = ((1.0 + 0.1 * np.sin(t))[:, None] * self.basis.s_dot
                + np.cos(t)[:, None] * self.basis.s_mat)
        assert np.allclose(residual_matrix(ode, self.basis), want, rtol=0, atol=0)

    def test_vanishing_leading_coefficient_rejected(self):
        ode = LinearODE(a1=lambda t: t - 0.5, a0=1.0, force=0.0,
                        psi0_list=[0.0], t_range=(0.0, 1.0))
        with pytest.raises(SingularCoefficientError):
            residual_matrix(ode, self.basis)

    def test_forcing_offset_hand_value(self):
        ode = LinearODE(a1=1.0, a0=2.0, force=np.sin, psi0_list=[3.0], t_range=(0.0, 1.0))
        want = 2.0 * 3.0 - np.sin(self.basis.times)
        assert np.allclose(forcing_offset(ode, self.basis, 3.0), want, rtol=0, atol=0)

    def test_precomputed_d_h_is_shared_not_copied(self):
        ode = LinearODE(a1=1.0, a0=1.0, force=1.0, psi0_list=[1.0, 2.0], t_range=(0.0, 1.0))
        d_h = residual_matrix(ode, self.basis)
        cms = [characteristic_matrices(ode, self.basis, p, d_h=d_h) for p in (1.0, 2.0)]
        assert cms[0].d_h is d_h and cms[1].d_h is d_h
        assert not np.array_equal(cms[0].d_0, cms[1].d_0)


class TestClosedFormWeights:
    def test_zero_offset_gives_zero_weights(self):
        rng = np.random.default_rng(7)
        d_h, _ = random_instance(rng)
        w = closed_form_weights(CharMatrices(d_h=d_h, d_0=np.zeros(40)), 0.5)
        assert np.array_equal(w, np.zeros(12))

    def test_matches_augmented_least_squares(self):
        rng = np.random.default_rng(21)
        for lam in [1e-6, 1e-3, 0.3, 8.656278081920211, 714.156090350679]:
            d_h, d_0 = random_instance(rng)
            w = closed_form_weights(CharMatrices(d_h=d_h, d_0=d_0), lam)
            ref = ridge_oracle(d_h, d_0, lam)
            assert np.linalg.norm(w - ref) <= 1e-10 * max(1.0, np.linalg.norm(ref))

    def test_stationarity_of_the_ridge_objective(self):
        rng = np.random.default_rng(22)
        for _ in range(5):
            d_h, d_0 = random_instance(rng)
            lam = 10.0 ** rng.uniform(-6, 2)
            w = closed_form_weights(CharMatrices(d_h=d_h, d_0=d_0), lam)
            grad = 2.0 * (d_h.T @ (d_h @ w + d_0) + lam * w)
            scale = 1.0 + np.linalg.norm(d_h.T @ d_0)
            assert np.linalg.norm(grad) <= 1e-8 * scale

    def test_heavier_ridge_shrinks_the_weights(self):
        rng = np.random.default_rng(23)
        d_h, d_0 = random_instance(rng)
        cm = CharMatrices(d_h=d_h, d_0=d_0)
        norms = [np.linalg.norm(closed_form_weights(cm, lam))
                 for lam in (1e-4, 1e-1, 1e2, 1e5)]
        assert all(a > b for a, b in zip(norms, norms[1:]))

    def test_large_ridge_limit_matches_gradient_direction(self):
        # for lam >> ||gram||, w -> -d_h^T d_0 / lam
        rng = np.random.default_rng(24)
        d_h, d_0 = random_instance(rng)
        lam = 1e12
        w = closed_form_weights(CharMatrices(d_h=d_h, d_0=d_0), lam)
        assert np.allclose(w, -(d_h.T @ d_0) / lam, rtol=1e-6)


class TestRidgeReadout:
    def test_reuse_across_right_hand_sides(self):
        rng = np.random.default_rng(31)
        d_h, _ = random_instance(rng)
        readout = RidgeReadout(d_h, 0.7)
        for _ in range(3):
            d_0 = rng.standard_normal(40)
            w = readout.solve(-(d_h.T @ d_0))
            ref = ridge_oracle(d_h, d_0, 0.7)
            assert np.linalg.norm(w - ref) <= 1e-10 * max(1.0, np.linalg.norm(ref))

    def test_negative_regularization_rejected(self):
        with pytest.raises(ValueError):
            RidgeReadout(np.eye(3), -1.0)

    def test_singular_unregularized_gram_warns_and_still_solves(self):
        # duplicated column, lam = 0: Cholesky must fail, fallback must answer
        d_h = np.array([[1.0, 1.0], [2.0, 2.0], [0.5, 0.5]])
        with pytest.warns(IllConditionedWarning):
            readout = RidgeReadout(d_h, 0.0)
        rhs = d_h.T @ np.array([1.0, 1.0, 1.0])
        w = readout.solve(rhs)
        assert np.isfinite(w).all()
        assert np.allclose((d_h.T @ d_h) @ w, rhs, atol=1e-10)

    def test_tiny_pivot_triggers_conditioning_warning(self):
        d_h = np.diag([1.0, 1e-9])
        with pytest.warns(IllConditionedWarning):
            RidgeReadout(d_h, 0.0)

    def test_well_conditioned_case_is_silent(self):
        rng = np.random.default_rng(33)
        d_h, _ = random_instance(rng)
        with np.testing.suppress_warnings() as sup:
            sup.record(IllConditionedWarning)
            RidgeReadout(d_h, 1.0)
            assert len(sup.log) == 0


class TestRmsr:
    def test_hand_value(self):
        residual = np.array([[3.0, 4.0], [4.0, 3.0]])
        out = rmsr(residual)
        assert np.array_equal(out, [3.5355339059327378, 3.5355339059327378])

    def test_single_row_is_abs(self):
        assert np.array_equal(rmsr(np.array([-2.0, 0.0, 5.0])), [2.0, 0.0, 5.0])


class TestGramRidge:
    def test_scales_by_grid_spacing(self):
        hyper = make_hyper(regularization=3.0, dt=0.01)
        assert gram_ridge(hyper) == 3.0 * 0.01


class TestSolveLinear:
    def test_exponential_decay_matches_exact_solution(self):
        # y' + y = 0, y(0) = psi0, exact psi0 * exp(-t)
        hyper = make_hyper(n_nodes=120, connectivity=0.3, spectral_radius=0.9,
                           leaking_rate=0.6, bias=0.1, dt=0.01,
                           regularization=1e-7, random_seed=3)
        res = build_reservoir(hyper)
        ode = LinearODE(a1=1.0, a0=1.0, force=0.0, psi0_list=[1.0, -2.0],
                        t_range=(0.0, 2.0))
        out = solve_linear(ode, res)
        exact = np.outer(out.psi0_list, np.exp(-out.times))
        assert np.max(np.abs(out.y - exact)) <= 1e-3

    def test_tuned_decay_settings_hit_tight_error(self):
        # tuned set for the plain decay benchmark; measured error is ~1e-6
        hyper = HyperParams(
            n_nodes=250, connectivity=0.7170604557008349,
            spectral_radius=1.5755887031555176, leaking_rate=0.9272222518920898,
            bias=0.1780446171760559, dt=0.0031622776601683794,
            regularization=0.00034441529823729916, random_seed=0)
        res = build_reservoir(hyper)
        ode = LinearODE(a1=1.0, a0=1.0, force=0.0, psi0_list=[1.0],
                        t_range=(0.0, 2.0 * np.pi))
        out = solve_linear(ode, res)
        err = np.max(np.abs(out.y[0] - np.exp(-out.times)))
        assert err <= 1e-2
        assert np.max(out.rmsr()) <= 5e-2

    def test_initial_condition_is_exact(self):
        res = build_reservoir(make_hyper(random_seed=5))
        ode = LinearODE(a1=1.0, a0=2.0, force=np.cos, psi0_list=[-1.5, 0.0, 4.25],
                        t_range=(0.0, 1.0))
        out = solve_linear(ode, res)
        assert np.array_equal(out.y[:, 0], [-1.5, 0.0, 4.25])

    def test_zero_ic_homogeneous_solution_is_identically_zero(self):
        res = build_reservoir(make_hyper(random_seed=6))
        ode = LinearODE(a1=1.0, a0=1.0, force=0.0, psi0_list=[0.0], t_range=(0.0, 1.0))
        out = solve_linear(ode, res)
        assert np.array_equal(out.y, np.zeros_like(out.y))
        assert np.array_equal(out.w_out, np.zeros_like(out.w_out))

    def test_homogeneous_solutions_scale_linearly(self):
        # ridge weights are linear in the offset, so doubling the IC doubles y
        res = build_reservoir(make_hyper(random_seed=7))
        ode = LinearODE(a1=1.0, a0=lambda t: 1.0 + 0.3 * np.sin(t), force=0.0,
                        psi0_list=[1.0, 2.0], t_range=(0.0, 1.5))
        out = solve_linear(ode, res)
        assert np.allclose(out.y[1], 2.0 * out.y[0], rtol=1e-12, atol=1e-12)

    def test_residual_definition(self):
        res = build_reservoir(make_hyper(random_seed=8))
        ode = LinearODE(a1=lambda t: 1.0 + 0.1 * t, a0=0.5, force=np.sin,
                        psi0_list=[0.7], t_range=(0.0, 1.0))
        out = solve_linear(ode, res)
        a1v = 1.0 + 0.1 * out.times
        want = a1v * out.y_dot[0] + 0.5 * out.y[0] - np.sin(out.times)
        assert np.allclose(out.residual[0], want, rtol=0, atol=0)
        assert np.array_equal(out.rmsr(), rmsr(out.residual))

    def test_batch_of_ics_costs_one_propagation(self):
        res = build_reservoir(make_hyper(random_seed=9))
        ode = LinearODE(a1=1.0, a0=1.0, force=np.sin,
                        psi0_list=list(np.linspace(-2, 2, 11)), t_range=(0.0, 1.0))
        reset_propagation_count()
        solve_linear(ode, res)
        assert propagation_count() == 1

    def test_prebuilt_basis_is_reused_and_bit_identical(self):
        res = build_reservoir(make_hyper(random_seed=10))
        ode = LinearODE(a1=1.0, a0=1.0, force=np.cos, psi0_list=[0.3], t_range=(0.0, 1.0))
        basis = build_basis(propagate(res, 0.0, 1.0))
        reset_propagation_count()
        out = solve_linear(ode, res, basis=basis)
        assert propagation_count() == 0
        ref = solve_linear(ode, res)
        assert np.array_equal(out.y, ref.y)
        assert np.array_equal(out.w_out, ref.w_out)
