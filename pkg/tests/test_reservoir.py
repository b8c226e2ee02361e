"""Reservoir construction and propagation invariants."""

import numpy as np
import pytest

from rcsolve import (
    AllZeroRecurrentError,
    HyperParams,
    NonFiniteStateError,
    Reservoir,
    build_reservoir,
    check_derivative_identity,
    load_reservoir,
    propagate,
    propagation_count,
    reset_propagation_count,
    save_reservoir,
    spectral_radius_of,
    time_grid,
)


def make_hyper(**kw):
    base = dict(n_nodes=40, connectivity=0.4, spectral_radius=1.1, leaking_rate=0.5,
                bias=0.2, dt=0.05, regularization=1.0, activation="tanh", random_seed=0)
    base.update(kw)
    return HyperParams(**base)


def hand_reservoir(w_res, w_in, bias_vec, **kw):
    """Bypass the random build for hand-set weight matrices."""
    hyper = make_hyper(n_nodes=w_res.shape[0], **kw)
    return Reservoir(hyper=hyper, w_in=np.asarray(w_in, float).reshape(-1, 1),
                     w_res=np.asarray(w_res, float), bias_vec=np.asarray(bias_vec, float))


class TestBuild:
    def test_spectral_radius_is_rescaled_exactly(self):
        # checked against the dense eigensolver, independent of the build path
        cases = [(50, 0.7, 1.58, 0), (250, 0.3, 9.97, 1), (500, 0.1, 2.37, 2)]
        for m, conn, rho, seed in cases:
            res = build_reservoir(make_hyper(n_nodes=m, connectivity=conn,
                                             spectral_radius=rho, random_seed=seed))
            measured = np.max(np.abs(np.linalg.eigvals(res.w_res)))
            assert abs(measured - rho) <= 1e-6 * rho

    def test_nonzero_fraction_within_binomial_error(self):
        for m, conn, seed in [(100, 0.25, 3), (200, 0.717, 4), (500, 0.01, 5)]:
            res = build_reservoir(make_hyper(n_nodes=m, connectivity=conn, random_seed=seed))
            nnz = np.count_nonzero(res.w_res)
            sigma = np.sqrt(m * m * conn * (1 - conn))
            assert abs(nnz - m * m * conn) <= 3 * sigma

    def test_full_connectivity_leaves_no_zeros(self):
        res = build_reservoir(make_hyper(n_nodes=4, connectivity=1.0))
        assert np.count_nonzero(res.w_res) == 16

    def test_all_zero_recurrent_raises(self):
        # seed chosen so the Bernoulli mask comes out empty
        with pytest.raises(AllZeroRecurrentError):
            build_reservoir(make_hyper(n_nodes=10, connectivity=0.02, random_seed=11))

    def test_nilpotent_recurrent_raises(self):
        # a few nonzero entries but an acyclic graph: spectrum is all zero,
        # so no rescaling to a positive spectral radius exists
        with pytest.raises(AllZeroRecurrentError):
            build_reservoir(make_hyper(n_nodes=10, connectivity=0.02, random_seed=0))

    def test_same_seed_bit_identical_different_seed_not(self):
        a = build_reservoir(make_hyper(random_seed=9))
        b = build_reservoir(make_hyper(random_seed=9))
        c = build_reservoir(make_hyper(random_seed=10))
        assert np.array_equal(a.w_res, b.w_res)
        assert np.array_equal(a.w_in, b.w_in)
        assert np.array_equal(a.bias_vec, b.bias_vec)
        assert not np.array_equal(a.w_res, c.w_res)

    def test_input_and_bias_ranges(self):
        res = build_reservoir(make_hyper(n_nodes=300, bias=-0.5, random_seed=12))
        assert np.all(np.abs(res.w_in) <= 1.0)
        assert np.all(np.abs(res.bias_vec) <= 0.5)

    def test_weights_are_immutable(self):
        res = build_reservoir(make_hyper())
        with pytest.raises(ValueError):
            res.w_res[0, 0] = 1.0

    def test_hyper_validation(self):
        with pytest.raises(ValueError):
            make_hyper(connectivity=0.0)
        with pytest.raises(ValueError):
            make_hyper(connectivity=1.5)
        with pytest.raises(ValueError):
            make_hyper(leaking_rate=0.0)
        with pytest.raises(ValueError):
            make_hyper(spectral_radius=-1.0)
        with pytest.raises(ValueError):
            make_hyper(dt=0.0)
        with pytest.raises(ValueError):
            make_hyper(regularization=-1e-9)
        with pytest.raises(ValueError):
            make_hyper(activation="relu")

    def test_from_dict_ignores_unknown_keys(self):
        d = make_hyper().to_dict()
        d["comment"] = "ignored"
        assert HyperParams.from_dict(d) == make_hyper()


class TestTimeGrid:
    def test_endpoint_inclusion_rule(self):
        assert len(time_grid(0.0, 1.0, 0.1)) == 11
        grid = time_grid(0.0, 1.04, 0.1)
        assert len(grid) == 11
        assert grid[-1] == pytest.approx(1.0, abs=1e-12)

    def test_short_span_rejected(self):
        with pytest.raises(ValueError):
            time_grid(0.0, 0.15, 0.1)


class TestPropagate:
    def test_matches_hand_iteration(self):
        # two symmetric nodes stepped by hand through the leaky update
        res = hand_reservoir(np.diag([0.5, 0.5]), [1.0, 1.0], [0.0, 0.0],
                             leaking_rate=0.5, dt=0.1)
        traj = propagate(res, 0.0, 0.3)
        expect_h = [0.0, 0.0, 0.04983399731247791, 0.13551676325431358]
        expect_hd = [0.0, 0.49833997312477907, 0.8568276594183568, 1.0825633726942432]
        assert traj.states.shape == (4, 3)
        np.testing.assert_allclose(traj.times, [0.0, 0.1, 0.2, 0.3], atol=1e-15)
        for col in (1, 2):
            np.testing.assert_allclose(traj.states[:, col], expect_h, atol=1e-12)
            np.testing.assert_allclose(traj.state_derivs[:, col], expect_hd, atol=1e-12)

    def test_bias_and_ones_columns(self):
        res = build_reservoir(make_hyper())
        traj = propagate(res, 0.0, 1.0)
        assert np.all(traj.states[:, 0] == 1.0)
        assert np.all(traj.state_derivs[:, 0] == 0.0)

    def test_initial_state_is_zero(self):
        traj = propagate(build_reservoir(make_hyper()), 0.0, 1.0)
        assert np.all(traj.states[0, 1:] == 0.0)

    def test_states_bounded_for_tanh_and_sin(self):
        for act in ("tanh", "sin"):
            res = build_reservoir(make_hyper(activation=act, spectral_radius=5.0,
                                             leaking_rate=0.9, random_seed=21))
            traj = propagate(res, 0.0, 3.0)
            assert np.max(np.abs(traj.states[:, 1:])) <= 1.0 + 1e-12

    def test_derivative_identity_small(self):
        res = build_reservoir(make_hyper(random_seed=33))
        traj = propagate(res, 0.0, 2.0)
        assert check_derivative_identity(traj) <= 1e-10 * (res.hyper.leaking_rate / res.hyper.dt)

    def test_alpha_one_is_pure_echo_state(self):
        res = hand_reservoir(np.diag([0.5, 0.5]), [1.0, 1.0], [0.0, 0.0],
                             leaking_rate=1.0, dt=0.1)
        traj = propagate(res, 0.0, 0.3)
        # h_{n+1} = tanh(0.5 h_n + t_n) exactly
        h = np.zeros(2)
        for n, t in enumerate(traj.times):
            np.testing.assert_allclose(traj.states[n, 1:], h, atol=1e-14)
            h = np.tanh(0.5 * h + t)

    def test_tiny_alpha_freezes_state(self):
        res = build_reservoir(make_hyper(leaking_rate=1e-12, random_seed=5))
        traj = propagate(res, 0.0, 1.0)
        assert np.max(np.abs(traj.states[:, 1:])) <= 1e-9

    def test_nonuniform_start_time(self):
        res = build_reservoir(make_hyper())
        traj = propagate(res, 2.0, 3.0)
        assert traj.times[0] == 2.0
        assert check_derivative_identity(traj) < 1e-10

    def test_propagation_counter(self):
        res = build_reservoir(make_hyper())
        reset_propagation_count()
        propagate(res, 0.0, 1.0)
        propagate(res, 0.0, 1.0)
        assert propagation_count() == 2

    def test_non_finite_state_raises(self):
        bad = hand_reservoir(np.array([[np.nan, 0.0], [0.0, 0.5]]), [1.0, 1.0], [0.0, 0.0])
        with pytest.raises(NonFiniteStateError):
            propagate(bad, 0.0, 1.0)

    def test_span_shorter_than_two_steps_rejected(self):
        res = build_reservoir(make_hyper(dt=1.0))
        with pytest.raises(ValueError):
            propagate(res, 0.0, 1.5)


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        res = build_reservoir(make_hyper(n_nodes=80, random_seed=17))
        path = str(tmp_path / "res.npz")
        save_reservoir(res, path)
        back = load_reservoir(path)
        assert back.hyper == res.hyper
        assert np.array_equal(back.w_res, res.w_res)
        assert np.array_equal(back.w_in, res.w_in)
        assert np.array_equal(back.bias_vec, res.bias_vec)
        # loaded reservoir propagates identically
        a = propagate(res, 0.0, 1.0)
        b = propagate(back, 0.0, 1.0)
        assert np.array_equal(a.states, b.states)

    def test_version_mismatch_rejected(self, tmp_path):
        res = build_reservoir(make_hyper())
        path = str(tmp_path / "res.npz")
        save_reservoir(res, path)
        data = dict(np.load(path, allow_pickle=False))
        data["format_version"] = np.int64(999)
        np.savez(str(tmp_path / "bad"), **data)
        with pytest.raises(ValueError):
            load_reservoir(str(tmp_path / "bad.npz"))


class TestSpectralRadiusHelper:
    def test_matches_dense_solver_on_random_matrices(self):
        rng = np.random.default_rng(0)
        for m in (30, 80, 200):
            w = rng.standard_normal((m, m)) * (rng.random((m, m)) < 0.3)
            dense = np.max(np.abs(np.linalg.eigvals(w)))
            assert spectral_radius_of(w) == pytest.approx(dense, rel=1e-6)
