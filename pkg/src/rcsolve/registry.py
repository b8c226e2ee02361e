"""Closed registry of coefficient functions and named benchmark problems.

Configuration files cannot carry arbitrary code, so ODE coefficients are
restricted to a small set of named forms (constant, polynomial, sine,
cosine, and their composition) and ODE systems to named constructions.
Extending the registry means adding an entry here, next to the existing
ones, so the config surface stays enumerable and testable.
"""

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .bernoulli import BernoulliODE
from .errors import ConfigError
from .linear import LinearODE
from .systems import ODESystem, harmonic_oscillator, nonlinear_oscillator

__all__ = [
    "NamedProblem",
    "PROBLEM_BUILDERS",
    "build_problem",
    "coefficient_fn",
]


def _poly(coeffs):
    c = [float(v) for v in coeffs]
    if not c:
        raise ConfigError("poly coefficient needs a nonempty coeffs list")
    return lambda t: np.polynomial.polynomial.polyval(t, c)


def _sinusoid(fn, spec):
    a = float(spec.get("amplitude", 1.0))
    w = float(spec.get("frequency", 1.0))
    p = float(spec.get("phase", 0.0))
    return lambda t: a * fn(w * np.asarray(t, dtype=float) + p)


def coefficient_fn(spec):
    """Resolve a config coefficient spec to a scalar or a vectorized callable.

    A bare number is a constant.  A dict picks a named form by "kind":
    constant {value}, poly {coeffs, lowest order first}, sin/cos
    {amplitude, frequency, phase}, compose {outer, inner} meaning
    outer(inner(t)).
    """
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return float(spec)
    if not isinstance(spec, dict):
        raise ConfigError(f"coefficient spec must be a number or a dict, got {spec!r}")
    kind = spec.get("kind")
    if kind == "constant":
        if "value" not in spec:
            raise ConfigError("constant coefficient needs a value")
        return float(spec["value"])
    if kind == "poly":
        return _poly(spec.get("coeffs", []))
    if kind == "sin":
        return _sinusoid(np.sin, spec)
    if kind == "cos":
        return _sinusoid(np.cos, spec)
    if kind == "compose":
        if "outer" not in spec or "inner" not in spec:
            raise ConfigError("compose coefficient needs outer and inner specs")
        outer = coefficient_fn(spec["outer"])
        inner = coefficient_fn(spec["inner"])
        if not callable(outer):
            value = float(outer)
            outer = lambda t: np.full_like(np.asarray(t, dtype=float), value)
        if not callable(inner):
            value = float(inner)
            inner = lambda t: np.full_like(np.asarray(t, dtype=float), value)
        return lambda t: outer(inner(t))
    raise ConfigError(f"unknown coefficient kind {kind!r}")


@dataclass(frozen=True)
class NamedProblem:
    """A benchmark problem the registry can build from its name alone."""

    name: str
    kind: str  # "linear" | "bernoulli" | "system"
    build: Callable              # (ics, t_range) -> ODE object
    exact: Callable | None       # (t, ic, t0) -> exact solution values, if known
    default_t_range: tuple


def _simple_population(ics, t_range):
    return LinearODE(a1=1.0, a0=1.0, force=0.0, psi0_list=list(ics), t_range=t_range)


def _simple_population_exact(t, psi0, t0):
    return psi0 * np.exp(-(t - t0))


def _driven_population(ics, t_range):
    return LinearODE(a1=1.0, a0=1.0, force=np.sin, psi0_list=list(ics), t_range=t_range)


def _driven_population_exact(t, psi0, t0):
    c = (psi0 - 0.5 * (np.sin(t0) - np.cos(t0))) * np.exp(t0)
    return c * np.exp(-t) + 0.5 * (np.sin(t) - np.cos(t))


def _time_dependent(ics, t_range):
    return LinearODE(a1=1.0, a0=lambda t: t ** 2, force=np.sin,
                     psi0_list=list(ics), t_range=t_range)


def _logistic(ics, t_range):
    return BernoulliODE(a1=1.0, a0=1.0, q=0.5, force=0.0,
                        psi0_list=list(ics), t_range=t_range)


def _logistic_exact(t, psi0, t0):
    decay = np.exp(-(t - t0))
    return 2.0 * psi0 * decay / (2.0 + psi0 * (1.0 - decay))


def _oscillator(ics, t_range):
    return nonlinear_oscillator(ic=tuple(ics), t_range=t_range)


def _harmonic(ics, t_range):
    return harmonic_oscillator(ic=tuple(ics), t_range=t_range)


def _harmonic_exact(t, ic, t0):
    x0, p0 = float(ic[0]), float(ic[1])
    tau = t - t0
    return np.stack([x0 * np.cos(tau) + p0 * np.sin(tau),
                     p0 * np.cos(tau) - x0 * np.sin(tau)], axis=1)


PROBLEM_BUILDERS = {
    p.name: p
    for p in (
        NamedProblem("simple-population", "linear", _simple_population,
                     _simple_population_exact, (0.0, 4.0 * math.pi)),
        NamedProblem("driven-population", "linear", _driven_population,
                     _driven_population_exact, (0.0, 4.0 * math.pi)),
        NamedProblem("time-dependent", "linear", _time_dependent,
                     None, (0.0, 2.0 * math.pi)),
        NamedProblem("logistic", "bernoulli", _logistic,
                     _logistic_exact, (0.0, 2.0 * math.pi)),
        NamedProblem("nonlinear-oscillator", "system", _oscillator,
                     None, (0.0, 2.0 * math.pi)),
        NamedProblem("harmonic-oscillator", "system", _harmonic,
                     _harmonic_exact, (0.0, 2.0 * math.pi)),
    )
}


def _as_t_range(value) -> tuple:
    if (not isinstance(value, Sequence) or isinstance(value, str)
            or len(value) != 2):
        raise ConfigError(f"t_range must be a [start, end] pair, got {value!r}")
    lo, hi = float(value[0]), float(value[1])
    if not hi > lo:
        raise ConfigError(f"t_range must have end > start, got {value!r}")
    return (lo, hi)


def _as_ics(value) -> list:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)]
    if isinstance(value, Sequence) and not isinstance(value, str) and value:
        return [float(v) for v in value]
    raise ConfigError(f"ics must be a number or a nonempty list, got {value!r}")


def build_problem(block: dict):
    """Build (problem, exact) from a config problem block.

    The block either names a registered benchmark ({"name": ..., "ics": ...,
    "t_range": ...}) or spells out a scalar ODE from registered coefficient
    forms ({"class": "linear"|"bernoulli", "a1": ..., "a0": ..., "force": ...,
    optional "q": ..., "ics": ..., "t_range": ...}).  ODE systems are only
    available by name: their residuals are code, not data.  exact is a
    callable (times, ic) -> values when the benchmark has a closed-form
    solution, else None.
    """
    if not isinstance(block, dict):
        raise ConfigError("problem block must be a mapping")
    if "name" in block:
        name = block["name"]
        named = PROBLEM_BUILDERS.get(name)
        if named is None:
            known = ", ".join(sorted(PROBLEM_BUILDERS))
            raise ConfigError(f"unknown problem name {name!r}; known: {known}")
        t_range = _as_t_range(block.get("t_range", named.default_t_range))
        if named.kind == "system":
            ics = block.get("ics", block.get("ic"))
            if ics is None:
                raise ConfigError(f"{name} needs an ic vector")
            ics = [float(v) for v in np.atleast_1d(ics)]
        else:
            ics = _as_ics(block.get("ics", 1.0))
        problem = named.build(ics, t_range)
        if named.exact is None:
            return problem, None
        t0 = t_range[0]
        if named.kind == "system":
            ic_vec = np.asarray(ics, dtype=float)
            return problem, lambda t, ic=ic_vec: named.exact(np.asarray(t, dtype=float), ic, t0)
        return problem, lambda t, psi0: named.exact(np.asarray(t, dtype=float), psi0, t0)

    cls = block.get("class")
    if cls not in ("linear", "bernoulli"):
        raise ConfigError(
            f"problem block needs a registered name or class linear/bernoulli, got {cls!r}")
    missing = [k for k in ("a1", "a0", "ics", "t_range") if k not in block]
    if missing:
        raise ConfigError(f"problem block missing keys: {', '.join(missing)}")
    a1 = coefficient_fn(block["a1"])
    a0 = coefficient_fn(block["a0"])
    force = coefficient_fn(block.get("force", 0.0))
    ics = _as_ics(block["ics"])
    t_range = _as_t_range(block["t_range"])
    if cls == "linear":
        return LinearODE(a1=a1, a0=a0, force=force, psi0_list=ics,
                         t_range=t_range), None
    q = coefficient_fn(block.get("q", 0.0))
    return BernoulliODE(a1=a1, a0=a0, q=q, force=force, psi0_list=ics,
                        t_range=t_range), None
