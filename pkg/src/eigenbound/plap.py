"""First eigenvalue mu_p(n, kappa, D) of the p-Laplacian model problem.

The equation is integrated in weighted flux form.  With the flux
Psi = |Phi'|^(p-2) Phi' and W = c_kappa^(n-1) Psi the problem becomes the
first-order system

    Phi' = sign(W) |W / c_kappa^(n-1)|^(1/(p-1))
    W'   = -mu c_kappa^(n-1) |Phi|^(p-2) Phi

whose right-hand side is continuous for every p > 1 and stays bounded up to
the zero of c_kappa.  Starting from (Phi, W)(0) = (0, 1), the first zero T(mu)
of the flux decreases strictly with mu, and mu_p is the value with
T(mu_p) = D/2.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from eigenbound.errors import (
    BracketNotFound,
    ExponentOutOfSupportedRange,
    NearSingularWeight,
    NoConvergence,
)
from eigenbound.model import (
    Method,
    ModelEigenSolution,
    PSLProblem,
    c_kappa,
    flat_mu_p,
    validate_problem,
    weight_drift,
    weight_function,
)
from eigenbound.sl_solver import ShootingConfig

log = logging.getLogger(__name__)

_DEFAULT_P_RANGE = ShootingConfig().p_range

# first_flux_zero gives up after this many half-lengths.
_FLUX_ZERO_CAP = 10.0

# Integration stops this far (relatively) short of the zero of c_kappa.
_SINGULAR_MARGIN = 1e-9

# Weighted flux below this at the singular margin counts as a zero at c_kappa = 0.
_TOUCH_TOLERANCE = 1e-9

_MAX_BRACKET_STEPS = 60

# Profile samples per configured ODE step.
_PROFILE_DENSITY = 4

# Fraction of [0, D/2] checked by flux_residual; np.gradient is one-sided at the ends.
_RESIDUAL_WINDOW = (0.1, 0.9)


@dataclass(frozen=True)
class FluxState:
    """Point of the flux system: position, Phi and the flux Psi."""

    s: float
    phi: float
    psi: float

    def dphi(self, p: float) -> float:
        """Recover Phi' = sign(Psi)|Psi|^(1/(p-1)); zero where Psi is."""
        return _signed_power(self.psi, 1.0 / (p - 1.0))


def _signed_power(x: float, exponent: float) -> float:
    return math.copysign(abs(x) ** exponent, x) if x else 0.0


def _flux_rhs(problem: PSLProblem, mu: float):
    weight = weight_function(problem.n, problem.kappa)
    inverse = 1.0 / (problem.p - 1.0)
    power = problem.p - 1.0

    def rhs(s: float, y: np.ndarray) -> list[float]:
        phi, weighted = y
        w = weight(s)
        return [_signed_power(weighted / w, inverse), -mu * w * _signed_power(phi, power)]

    return rhs


def _singular_point(problem: PSLProblem) -> float:
    """Where the weight vanishes: the first zero of c_kappa, or infinity."""
    if problem.kappa > 0 and problem.n > 1:
        return math.pi / (2.0 * math.sqrt(problem.kappa))
    return math.inf


def _integration_end(problem: PSLProblem, length: float) -> float:
    return min(length, (1.0 - _SINGULAR_MARGIN) * _singular_point(problem))


def _shoot(problem: PSLProblem, mu: float, config: ShootingConfig, end: float, **kwargs):
    return solve_ivp(
        _flux_rhs(problem, mu),
        (0.0, end),
        [0.0, 1.0],
        method="DOP853",
        rtol=config.ode_rtol,
        atol=1e-2 * config.ode_rtol,
        **kwargs,
    )


def _flux_zero(problem: PSLProblem, mu: float, config: ShootingConfig, end: float) -> float:
    """First zero of the flux on (0, end], or ``math.inf`` if it stays positive.

    When *end* was pulled in front of the zero of c_kappa and the weighted flux
    has decayed to nothing there, the zero is placed at c_kappa's zero.
    """

    def crossing(s: float, y: np.ndarray) -> float:
        return y[1]

    crossing.terminal = True
    crossing.direction = -1

    solution = _shoot(problem, mu, config, end, events=crossing)
    if solution.status == -1:
        raise NoConvergence(f"flux integration failed for {problem} at mu={mu!r}: {solution.message}")
    zeros = solution.t_events[0]
    if len(zeros):
        return float(zeros[0])

    singular = _singular_point(problem)
    if end < singular and solution.y[1, -1] <= _TOUCH_TOLERANCE:
        return singular
    return math.inf


def first_flux_zero(problem: PSLProblem, mu: float, config: ShootingConfig | None = None) -> float:
    """Return T(mu), the first s > 0 where the flux Psi changes sign.

    The zero is detected inside the integrator step where Psi changes sign and
    refined on the step's dense output.  ``math.inf`` is returned when no zero
    occurs before 10 half-lengths (or before c_kappa vanishes for kappa > 0).
    """
    config = config or ShootingConfig()
    if not mu > 0:
        raise ValueError(f"mu={mu!r} must be positive")
    end = _integration_end(problem, _FLUX_ZERO_CAP * problem.D / 2.0)
    return _flux_zero(problem, mu, config, end)


def _check_exponent(problem: PSLProblem, config: ShootingConfig) -> None:
    low, high = config.p_range
    if not low <= problem.p <= high:
        raise ExponentOutOfSupportedRange(
            f"exponent p={problem.p!r} is outside the supported range [{low}, {high}]"
        )
    default_low, default_high = _DEFAULT_P_RANGE
    if not default_low <= problem.p <= default_high:
        log.warning(
            "p=%g lies outside the default range [%g, %g]; binary64 integration may be unreliable",
            problem.p,
            default_low,
            default_high,
        )


def solve_mu_p(problem: PSLProblem, config: ShootingConfig | None = None) -> ModelEigenSolution:
    """Compute mu_p(n, kappa, D) by bisection on the flux-zero map T.

    The bracket is seeded from the kappa = 0 closed form scaled by 1/4 and 4
    and widened geometrically until T(lo) > D/2 >= T(hi).  Bisection stops once
    the bracket's relative width falls below ``config.mu_tolerance``.

    Args:
        problem: A valid p-Laplacian model problem.
        config: Solver settings; defaults to ``ShootingConfig()``.

    Returns:
        The eigenvalue with its profile sampled on [0, D/2].

    Raises:
        ExponentOutOfSupportedRange: If p lies outside ``config.p_range``.
        NearSingularWeight: If kappa > 0 and c_kappa(D/2)^(n-1) < 1e-12.
        BracketNotFound: If T(mu) = D/2 could not be bracketed.
    """
    config = config or ShootingConfig()
    validate_problem(problem)
    _check_exponent(problem, config)
    if problem.kappa > 0 and problem.n > 1 and problem.base.endpoint_weight() < 1e-12:
        raise NearSingularWeight(
            f"weight c_kappa(D/2)^(n-1)={problem.base.endpoint_weight():.3g} is too small for {problem}"
        )

    half = problem.D / 2.0
    end = _integration_end(problem, half)

    def reaches_zero(mu: float) -> bool:
        return _flux_zero(problem, mu, config, end) <= half

    seed = flat_mu_p(problem.p, problem.D)
    lo, hi = 0.25 * seed, 4.0 * seed
    for _ in range(_MAX_BRACKET_STEPS):
        if not reaches_zero(lo):
            break
        hi, lo = lo, 0.25 * lo
    else:
        raise BracketNotFound(f"no lower end for mu_p found for {problem}")
    for _ in range(_MAX_BRACKET_STEPS):
        if reaches_zero(hi):
            break
        lo, hi = hi, 4.0 * hi
    else:
        raise BracketNotFound(f"no upper end for mu_p found for {problem}; last tried {hi!r}")
    log.debug("mu_p bracket for %s: [%.12g, %.12g]", problem, lo, hi)

    bisections = 0
    while hi - lo > config.mu_tolerance * hi:
        if bisections >= config.max_bisections:
            raise BracketNotFound(
                f"bisection for {problem} stopped after {bisections} steps with bracket [{lo!r}, {hi!r}]"
            )
        middle = 0.5 * (lo + hi)
        if reaches_zero(middle):
            hi = middle
        else:
            lo = middle
        bisections += 1
    mu = 0.5 * (lo + hi)

    grid = np.linspace(0.0, half, _PROFILE_DENSITY * config.ode_steps + 1)
    profile = _shoot(problem, mu, config, half, t_eval=grid)
    if profile.status != 0:
        raise NoConvergence(f"profile integration failed for {problem} at mu={mu!r}: {profile.message}")
    phi, weighted = profile.y
    psi = weighted / np.asarray(c_kappa(problem.kappa, grid)) ** (problem.n - 1)
    dphi = np.sign(psi) * np.abs(psi) ** (1.0 / (problem.p - 1.0))

    log.info("mu_p%s = %.15g after %d bisections", (problem.n, problem.kappa, problem.D, problem.p), mu, bisections)
    return ModelEigenSolution(
        mu=mu,
        grid=grid,
        phi=phi,
        dphi=dphi,
        method=Method.SHOOTING,
        tolerance_achieved=hi - lo,
        p=problem.p,
        details={"bisections": bisections, "ode_rtol": config.ode_rtol},
    )


def flux_residual(solution: ModelEigenSolution, problem: PSLProblem) -> float:
    """Maximum pointwise residual of the flux equation along *solution*'s profile.

    ``Psi' + (n-1)(c'/c) Psi + mu |Phi|^(p-2) Phi`` is evaluated with a
    second-order difference for Psi' on the interior of [0, D/2].
    """
    p = problem.p
    s = solution.grid
    psi = np.sign(solution.dphi) * np.abs(solution.dphi) ** (p - 1.0)
    dpsi = np.gradient(psi, s, edge_order=2)
    forcing = np.sign(solution.phi) * np.abs(solution.phi) ** (p - 1.0)
    residual = dpsi + weight_drift(problem.n, problem.kappa, s) * psi + solution.mu * forcing
    low, high = _RESIDUAL_WINDOW
    window = (s >= low * s[-1]) & (s <= high * s[-1])
    return float(np.max(np.abs(residual[window])))


def curvature_ratio_near_origin(problem: PSLProblem, mu: float, h: float, config: ShootingConfig | None = None) -> float:
    """Return Phi''(h)/Phi(h) for the profile shot with eigenvalue *mu*.

    Phi'' is recovered from the flux equation as
    ``|Phi'|^(2-p) Psi' / (p-1)``.  For p = 2 the ratio tends to
    (n-1) kappa - mu as h -> 0; for 1 < p < 2 it diverges to -infinity.
    """
    config = config or ShootingConfig()
    end = _shoot(problem, mu, config, h).y[:, -1]
    weight = weight_function(problem.n, problem.kappa)(h)
    state = FluxState(s=h, phi=float(end[0]), psi=float(end[1]) / weight)
    forcing = _signed_power(state.phi, problem.p - 1.0)
    dpsi = -float(weight_drift(problem.n, problem.kappa, h)) * state.psi - mu * forcing
    slope = state.dphi(problem.p)
    second = abs(slope) ** (2.0 - problem.p) * dpsi / (problem.p - 1.0)
    return second / state.phi
