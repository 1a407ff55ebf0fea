"""Curvature model coefficient, model problems and their admissibility checks."""

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from eigenbound.errors import (
    DiameterExceedsMyersRange,
    DimensionBelowOne,
    ExponentNotAboveOne,
    NonPositiveDiameter,
    ProblemError,
)

# Below this value of |kappa|*t^2 the coefficient is evaluated by its Taylor
# series in kappa*t^2, so sweeps through kappa=0 stay continuous.
_SERIES_THRESHOLD = 1e-8

# D = pi/sqrt(kappa) is the round-sphere equality case and must be admitted;
# allow for the rounding in the caller's value of pi.
_MYERS_SLACK = 1e-12


def _as_result(values: np.ndarray) -> float | np.ndarray:
    return float(values) if values.ndim == 0 else values


def c_kappa(kappa: float, t: float | np.ndarray) -> float | np.ndarray:
    """Evaluate the curvature model coefficient c_kappa at *t*.

    ``cos(sqrt(kappa) t)`` for kappa > 0, ``1`` for kappa = 0 and
    ``cosh(sqrt(-kappa) t)`` for kappa < 0.  Accepts scalars or arrays; a
    scalar input returns a Python float.
    """
    t = np.asarray(t, dtype=float)
    x = kappa * t * t
    series = 1.0 - x / 2.0 + x * x / 24.0 - x * x * x / 720.0
    if kappa > 0:
        closed = np.cos(math.sqrt(kappa) * t)
    elif kappa < 0:
        closed = np.cosh(math.sqrt(-kappa) * t)
    else:
        closed = np.ones_like(t)
    return _as_result(np.where(np.abs(x) < _SERIES_THRESHOLD, series, closed))


def c_kappa_prime(kappa: float, t: float | np.ndarray) -> float | np.ndarray:
    """Exact derivative of :func:`c_kappa` with respect to *t*."""
    t = np.asarray(t, dtype=float)
    x = kappa * t * t
    series = -kappa * t * (1.0 - x / 6.0 + x * x / 120.0 - x * x * x / 5040.0)
    if kappa > 0:
        root = math.sqrt(kappa)
        closed = -root * np.sin(root * t)
    elif kappa < 0:
        root = math.sqrt(-kappa)
        closed = root * np.sinh(root * t)
    else:
        closed = np.zeros_like(t)
    return _as_result(np.where(np.abs(x) < _SERIES_THRESHOLD, series, closed))


def c_kappa_second(kappa: float, t: float | np.ndarray) -> float | np.ndarray:
    """Analytic second derivative of :func:`c_kappa`."""
    t = np.asarray(t, dtype=float)
    x = kappa * t * t
    series = -kappa * (1.0 - x / 2.0 + x * x / 24.0 - x * x * x / 720.0)
    if kappa > 0:
        closed = -kappa * np.cos(math.sqrt(kappa) * t)
    elif kappa < 0:
        closed = -kappa * np.cosh(math.sqrt(-kappa) * t)
    else:
        closed = np.zeros_like(t)
    return _as_result(np.where(np.abs(x) < _SERIES_THRESHOLD, series, closed))


def weight_drift(n: int, kappa: float, s: float | np.ndarray) -> float | np.ndarray:
    """Return ``(n-1) c_kappa'(s) / c_kappa(s)``, the drift term of the model ODE.

    This is the logarithmic derivative of the weight ``c_kappa^(n-1)``.  It is
    unbounded where c_kappa vanishes (kappa > 0, s = pi/(2 sqrt(kappa))); callers
    that integrate up to D/2 must check the weight first.
    """
    if n == 1:
        return _as_result(np.zeros_like(np.asarray(s, dtype=float)))
    c = np.asarray(c_kappa(kappa, s))
    dc = np.asarray(c_kappa_prime(kappa, s))
    return _as_result((n - 1) * dc / c)


def weight_function(n: int, kappa: float) -> Callable[[float], float]:
    """Return a scalar closure ``s -> c_kappa(s)^(n-1)``, clipped at zero.

    Same values as ``c_kappa(kappa, s) ** (n - 1)`` without the array overhead,
    for integrators that evaluate the weight one point at a time.
    """
    if n == 1 or kappa == 0:
        return lambda s: 1.0
    power = n - 1
    root = math.sqrt(abs(kappa))

    def weight(s: float) -> float:
        x = kappa * s * s
        if abs(x) < _SERIES_THRESHOLD:
            c = 1.0 - x / 2.0 + x * x / 24.0 - x * x * x / 720.0
        elif kappa > 0:
            c = math.cos(root * s)
        else:
            c = math.cosh(root * s)
        return max(c, 0.0) ** power

    return weight


def myers_limit(kappa: float) -> float:
    """Largest admissible diameter for curvature parameter *kappa*."""
    return math.pi / math.sqrt(kappa) if kappa > 0 else math.inf


def p_pi(p: float) -> float:
    """The p-analogue of pi, ``2 pi / (p sin(pi / p))``."""
    return 2.0 * math.pi / (p * math.sin(math.pi / p))


def flat_mu_p(p: float, diameter: float) -> float:
    """Closed form ``(p-1) (pi_p / D)^p`` of the model eigenvalue for kappa = 0."""
    return (p - 1.0) * (p_pi(p) / diameter) ** p


# ---------------------------------------------------------------------------
# Model problem types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SLProblem:
    """Linear model problem on [-D/2, D/2] with weight c_kappa^(n-1)."""

    n: int
    kappa: float
    D: float

    @property
    def half_length(self) -> float:
        return self.D / 2.0

    def endpoint_weight(self) -> float:
        """Weight ``c_kappa(D/2)^(n-1)`` at the end of the half interval."""
        return float(c_kappa(self.kappa, self.half_length)) ** (self.n - 1)


@dataclass(frozen=True)
class PSLProblem:
    """p-Laplacian model problem: the linear problem's data plus the exponent p."""

    base: SLProblem
    p: float

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def kappa(self) -> float:
        return self.base.kappa

    @property
    def D(self) -> float:
        return self.base.D


class Method(str, Enum):
    SHOOTING = "shooting"
    FINITE_DIFFERENCE = "finite_difference"


@dataclass(frozen=True)
class ModelEigenSolution:
    """Eigenvalue of a model problem with its profile sampled on [0, D/2].

    The profile is normalised to Phi(0) = 0, Phi'(0) = 1.  ``tolerance_achieved``
    is an absolute bound on the eigenvalue error estimated by the solver.
    """

    mu: float
    grid: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    method: Method
    tolerance_achieved: float
    p: float = 2.0
    details: dict = field(default_factory=dict)

    def profile_at(self, s: float | np.ndarray) -> float | np.ndarray:
        """Linearly interpolate Phi at *s* inside the sampled range."""
        return _as_result(np.interp(s, self.grid, self.phi))


def validate_problem(problem: SLProblem | PSLProblem) -> SLProblem | PSLProblem:
    """Check every invariant of *problem* and return it unchanged if it holds.

    Args:
        problem: A linear or p-Laplacian model problem.

    Returns:
        The same problem object.

    Raises:
        DimensionBelowOne: If n is not an integer >= 1.
        NonPositiveDiameter: If D is not a finite positive number.
        ExponentNotAboveOne: If p <= 1 (p-Laplacian problems only).
        DiameterExceedsMyersRange: If kappa > 0 and D > pi/sqrt(kappa).
    """
    base = problem.base if isinstance(problem, PSLProblem) else problem

    if isinstance(base.n, bool) or int(base.n) != base.n or base.n < 1:
        raise DimensionBelowOne(f"dimension n={base.n!r} must be an integer >= 1")
    if not math.isfinite(base.D) or base.D <= 0:
        raise NonPositiveDiameter(f"diameter D={base.D!r} must be positive")
    if not math.isfinite(base.kappa):
        raise ProblemError(f"kappa={base.kappa!r} must be finite")
    if isinstance(problem, PSLProblem) and not problem.p > 1:
        raise ExponentNotAboveOne(f"exponent p={problem.p!r} must exceed 1")

    limit = myers_limit(base.kappa)
    if base.D > limit * (1.0 + _MYERS_SLACK):
        raise DiameterExceedsMyersRange(
            f"diameter D={base.D!r} exceeds the Bonnet-Myers limit pi/sqrt(kappa)={limit!r} for kappa={base.kappa!r}"
        )
    return problem
