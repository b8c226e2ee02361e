"""Exception and warning types shared across the package."""


class AllZeroRecurrentError(RuntimeError):
    """Recurrent matrix has no usable spectrum (all zero, or numerically
    nilpotent so no rescaling to a target spectral radius is possible).
    Resample with a new seed or raise the connectivity."""


class NonFiniteStateError(RuntimeError):
    """A propagated trajectory (reservoir or integrator) left the finite range."""


class NonFiniteLossError(RuntimeError):
    """Training loss (or its gradient) left the finite range; the trainer
    treats this as a spike of infinite size."""


class DimensionMismatchError(ValueError):
    """Array shapes are inconsistent with the reservoir / readout layout."""


class SingularCoefficientError(ValueError):
    """Leading ODE coefficient vanishes somewhere on the time grid."""


class IllConditionedError(RuntimeError):
    """Regularized normal equations could not be solved."""


class IllConditionedWarning(RuntimeWarning):
    """Regularized normal equations are close to singular; results may be noisy."""


class DegenerateSurrogateWarning(RuntimeWarning):
    """Surrogate model fit failed; the optimizer fell back to uniform sampling."""


class ConfigError(ValueError):
    """Experiment configuration file is missing keys or holds invalid values."""
