"""Unsupervised reservoir-computing solvers for ordinary differential equations."""

__version__ = "0.1.0"

from .errors import (
    AllZeroRecurrentError,
    ConfigError,
    DegenerateSurrogateWarning,
    DimensionMismatchError,
    IllConditionedError,
    IllConditionedWarning,
    NonFiniteLossError,
    NonFiniteStateError,
    SingularCoefficientError,
)
from .bernoulli import (
    BernoulliODE,
    BernoulliSolveResult,
    linearized_matrices,
    linearized_weights,
    residual_problem,
    solve_bernoulli,
)
from .harness import (
    BASELINES,
    ComparisonReport,
    ExperimentConfig,
    compare,
    emit_figures,
    load_config,
    read_csv,
    run_hyperopt,
    run_solve_bernoulli,
    run_solve_linear,
    run_solve_system,
    write_csv,
    write_manifest,
)
from .hyperopt import (
    BOConfig,
    BOHistory,
    Dimension,
    SearchSpace,
    TrustRegion,
    bo_objective,
    optimize,
)
from .presets import (
    PRESETS,
    Preset,
    get_preset,
)
from .registry import (
    PROBLEM_BUILDERS,
    NamedProblem,
    build_problem,
    coefficient_fn,
)
from .integrators import (
    Trajectory,
    euler_integrate,
    explicit_rhs,
    rk4_integrate,
)
from .linear import (
    CharMatrices,
    LinearODE,
    LinearSolveResult,
    RidgeReadout,
    characteristic_matrices,
    closed_form_weights,
    eval_on_grid,
    gram_ridge,
    rmsr,
    solve_linear,
)
from .reservoir import (
    HyperParams,
    Reservoir,
    StateTrajectory,
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
from .systems import (
    HamiltonianSpec,
    ODESystem,
    SystemSolveResult,
    harmonic_oscillator,
    linearized_system_matrices,
    linearized_system_weights,
    nonlinear_oscillator,
    solve_system,
    system_loss,
    system_problem,
)
from .training import (
    GDConfig,
    INIT_MODES,
    ResidualProblem,
    TrainTrace,
    elastic_net,
    frozen_trace,
    loss_and_grad,
    random_init,
    scheduled_lr,
    train,
)
from .trial import (
    EXP_RAMP,
    GFunction,
    TrialBasis,
    build_basis,
    evaluate,
    g_of_t,
)

__all__ = [name for name in dir() if not name.startswith("_")]
