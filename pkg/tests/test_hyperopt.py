"""Trust-region BO: search space mapping, objective, and optimizer behavior."""

import math
import warnings

import numpy as np
import pytest

import rcsolve.hyperopt as hyperopt
from rcsolve import LinearODE
from rcsolve.errors import DegenerateSurrogateWarning
from rcsolve.hyperopt import (
    SENTINEL,
    BOConfig,
    BOHistory,
    Dimension,
    SearchSpace,
    TrustRegion,
    bo_objective,
    optimize,
)


def quadratic_space():
    return SearchSpace((Dimension("x", -2.0, 2.0),))


def driven_population(psi0_list=(1.0,), t_range=(0.0, 2.0)):
    return LinearODE(a1=1.0, a0=1.0, force=np.sin,
                     psi0_list=list(psi0_list), t_range=t_range)


def test_dimension_unit_mapping_linear_and_log():
    lin = Dimension("a", -2.0, 6.0)
    assert lin.to_unit(-2.0) == 0.0
    assert lin.to_unit(6.0) == 1.0
    assert lin.from_unit(0.5) == pytest.approx(2.0)
    log = Dimension("b", 1e-4, 1.0, scale="log10")
    assert log.from_unit(0.0) == pytest.approx(1e-4)
    assert log.from_unit(1.0) == pytest.approx(1.0)
    assert log.from_unit(0.5) == pytest.approx(1e-2)
    assert log.to_unit(1e-2) == pytest.approx(0.5)


def test_dimension_integer_rounds_and_clips():
    dim = Dimension("n", 10.0, 500.0, integer=True)
    assert dim.from_unit(0.0) == 10
    assert dim.from_unit(1.0) == 500
    assert isinstance(dim.from_unit(0.37), int)
    # outside the cube clips to the bounds
    assert dim.from_unit(1.7) == 500
    assert dim.from_unit(-0.3) == 10


def test_dimension_validation_errors():
    with pytest.raises(ValueError):
        Dimension("a", 2.0, 1.0)
    with pytest.raises(ValueError):
        Dimension("a", 0.0, 1.0, scale="log2")
    with pytest.raises(ValueError):
        Dimension("a", -1.0, 1.0, scale="log10")


def test_search_space_round_trip_and_duplicates():
    space = SearchSpace((Dimension("a", 0.0, 1.0),
                         Dimension("b", 1e-3, 1e3, scale="log10")))
    point = {"a": 0.25, "b": 10.0}
    u = space.to_unit(point)
    back = space.from_unit(u)
    assert back["a"] == pytest.approx(0.25)
    assert back["b"] == pytest.approx(10.0)
    with pytest.raises(ValueError):
        SearchSpace((Dimension("a", 0.0, 1.0), Dimension("a", 1.0, 2.0)))


def test_bo_config_validation():
    with pytest.raises(ValueError):
        BOConfig(max_evals=20, val_split=1.0)
    with pytest.raises(ValueError):
        BOConfig(max_evals=20, beta=1.5)
    with pytest.raises(ValueError):
        BOConfig(max_evals=5, n_init=10)


def test_trust_region_resizing_arithmetic():
    tr = TrustRegion(center=np.array([0.5]), side_length=0.8,
                     success_tol=2, failure_tol=2)
    tr.record(True)
    assert tr.side_length == 0.8 and tr.success_count == 1
    tr.record(True)
    assert tr.side_length == 1.6 and tr.success_count == 0
    tr.record(True)
    tr.record(True)
    assert tr.side_length == 1.6  # capped at max_side
    tr.record(False)
    assert tr.success_count == 0
    tr.record(False)
    assert tr.side_length == 0.8 and tr.failure_count == 0
    lo, hi = tr.bounds(np.ones(1))
    assert lo[0] == pytest.approx(0.1) and hi[0] == pytest.approx(0.9)


def test_history_tracks_incumbent():
    hist = BOHistory()
    for v in [3.0, 5.0, 1.0, 2.0]:
        hist.append({"x": v}, v, 0.8)
    assert hist.best_values == [3.0, 3.0, 1.0, 1.0]
    assert len(hist) == 4


def test_objective_blends_train_and_val_logs(monkeypatch):
    # one cv sample, one IC, constant residual rows: e on train, e^2 on val,
    # so L_train = e^2 and L_val = e^4 and the blend is 0.5*2 + 0.5*4 = 3
    def fake_fit(problem, res, basis, train_basis, psi0, gd_kw, cfg):
        n = train_basis.n_points
        out = np.full(basis.n_points, math.e ** 2)
        out[:n] = math.e
        return out

    monkeypatch.setattr(hyperopt, "_fit_and_residual", fake_fit)
    ode = driven_population()
    cfg = BOConfig(max_evals=10, cv_samples=1, ic_bundle=(1.0,), seed=0)
    got = bo_objective({"n_nodes": 30}, ode, cfg)
    assert got == pytest.approx(3.0, rel=1e-12)
    # beta = 1 ignores the validation part entirely
    cfg_train_only = BOConfig(max_evals=10, cv_samples=1, beta=1.0, seed=0)
    assert bo_objective({"n_nodes": 30}, ode, cfg_train_only) == pytest.approx(2.0)


def test_objective_sentinel_on_unbuildable_point():
    ode = driven_population()
    cfg = BOConfig(max_evals=10, cv_samples=1, seed=0)
    # connectivity so low the recurrent matrix is all zeros: cannot rescale
    val = bo_objective({"n_nodes": 30, "connectivity": 1e-9}, ode, cfg)
    assert val == SENTINEL


def test_objective_deterministic_and_finite_on_real_problem():
    ode = driven_population()
    cfg = BOConfig(max_evals=10, cv_samples=2, ic_bundle=(1.0, -1.0), seed=7)
    point = {"n_nodes": 40, "spectral_radius": 1.1, "connectivity": 0.3}
    a = bo_objective(point, ode, cfg)
    b = bo_objective(point, ode, cfg)
    assert a == b
    assert np.isfinite(a) and a < SENTINEL


def test_optimize_budget_exactness_and_monotone_incumbent():
    space = quadratic_space()
    obj = lambda p: (p["x"] - 0.7) ** 2
    cfg = BOConfig(max_evals=23, n_init=6, batch_size=4, seed=3)
    best, hist = optimize(space, obj, cfg)
    assert len(hist) == 23
    assert hist.best_values == [min(hist.values[:i + 1]) for i in range(23)]
    assert hist.best_values[-1] == min(hist.values)
    assert obj(best) == hist.best_values[-1]


def test_optimize_recovers_quadratic_minimum():
    space = quadratic_space()
    obj = lambda p: (p["x"] - 0.7) ** 2
    best, hist = optimize(space, obj, BOConfig(max_evals=60, n_init=10, seed=11))
    assert abs(best["x"] - 0.7) < 0.02


def test_optimize_handles_constant_objective():
    # flat landscape degenerates the surrogate: optimizer must warn, fall back
    # to uniform sampling, and shrink the region instead of looping forever
    space = quadratic_space()
    cfg = BOConfig(max_evals=200, n_init=8, batch_size=4, seed=0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        best, hist = optimize(space, lambda p: 1.0, cfg)
    assert any(issubclass(w.category, DegenerateSurrogateWarning) for w in caught)
    assert len(hist) < 200
    assert hist.sides[-1] < 0.8


def test_optimize_seed_reproducible():
    space = SearchSpace((Dimension("x", -1.0, 1.0), Dimension("y", -1.0, 1.0)))
    obj = lambda p: (p["x"] - 0.2) ** 2 + (p["y"] + 0.4) ** 2
    cfg = BOConfig(max_evals=25, n_init=8, seed=5)
    best1, hist1 = optimize(space, obj, cfg)
    best2, hist2 = optimize(space, obj, cfg)
    assert hist1.values == hist2.values
    assert best1 == best2


def test_optimize_on_ode_problem_improves_over_initial_design():
    ode = driven_population(t_range=(0.0, 1.5))
    space = SearchSpace((
        Dimension("spectral_radius", 0.3, 5.0),
        Dimension("regularization", 1e-6, 1e2, scale="log10"),
    ))
    cfg = BOConfig(max_evals=16, n_init=8, batch_size=4, cv_samples=1, seed=2)
    best, hist = optimize(space, ode, cfg)
    assert len(hist) == 16
    assert min(hist.values) < SENTINEL
    assert set(best) == {"spectral_radius", "regularization"}
    # the tuned point must at least match the best initial draw
    assert hist.best_values[-1] <= min(hist.values[:8])
