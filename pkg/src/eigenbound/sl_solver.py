"""First eigenvalue mu(n, kappa, D) of the linear model problem.

Two independent methods are provided and cross-checked by :func:`mu`:

* shooting on the half interval [0, D/2] from Phi(0) = 0, Phi'(0) = 1 with a
  fixed-step RK4 integrator and step halving, and
* a conservative cell-centred finite-difference scheme on the full interval
  [-D/2, D/2], whose symmetrised tridiagonal matrix is handed to LAPACK's
  Sturm-sequence bisection (``stebz``), optionally Richardson-extrapolated.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal, eigvalsh_tridiagonal
from scipy.optimize import brentq

from eigenbound.errors import (
    BracketNotFound,
    ConfigError,
    GridTooCoarse,
    MethodDisagreement,
    NearSingularWeight,
)
from eigenbound.model import (
    Method,
    ModelEigenSolution,
    SLProblem,
    c_kappa,
    validate_problem,
    weight_drift,
)

log = logging.getLogger(__name__)

_DEFAULT_ODE_STEPS = 256
_DEFAULT_MU_TOLERANCE = 1e-10
_DEFAULT_GRID_POINTS = 1024

# Shooting is refused outright below this endpoint weight c_kappa(D/2)^(n-1).
_MIN_SHOOTING_WEIGHT = 1e-12

# In "auto" mode the drift term (n-1) c'/c is considered too stiff for
# fixed-step RK4 once c_kappa(D/2) drops below this value; the finite
# difference scheme is used alone.
_AUTO_SHOOTING_MIN_C = 0.05

# Bracket search limits (geometric growth/shrink steps).
_MAX_BRACKET_STEPS = 200

# Relative half-width of the bracket reused from the previous halving level.
_WARM_BRACKET = 1e-4

# Steps used to integrate from 0 to a user-supplied h in limit_identity_residual.
_LIMIT_STEPS = 64


@dataclass(frozen=True)
class ShootingConfig:
    """Settings for the shooting solvers.

    Attributes:
        ode_steps: RK4 steps on [0, D/2] at the coarsest level (>= 64).  The
            p-Laplacian solver uses it as the profile sampling density.
        mu_tolerance: Relative tolerance on mu.  Step halving stops once two
            successive levels agree to this, and bisection widths are kept
            below it.
        max_bisections: Iteration cap for each root search.
        max_halvings: Maximum number of step-halving levels.
        ode_rtol: Relative tolerance of the adaptive integrator used by the
            p-Laplacian solver.
        p_range: Supported exponents for the p-Laplacian solver.
    """

    ode_steps: int = _DEFAULT_ODE_STEPS
    mu_tolerance: float = _DEFAULT_MU_TOLERANCE
    max_bisections: int = 200
    max_halvings: int = 6
    ode_rtol: float = 1e-12
    p_range: tuple[float, float] = (1.1, 10.0)

    def __post_init__(self) -> None:
        if self.ode_steps < 64:
            raise ConfigError(f"ode_steps={self.ode_steps} must be at least 64")
        if not self.mu_tolerance > 0:
            raise ConfigError(f"mu_tolerance={self.mu_tolerance} must be positive")
        if self.max_bisections < 1 or self.max_halvings < 0:
            raise ConfigError("max_bisections must be >= 1 and max_halvings >= 0")
        if not self.ode_rtol > 0:
            raise ConfigError(f"ode_rtol={self.ode_rtol} must be positive")
        low, high = self.p_range
        if not 1.0 < low < high:
            raise ConfigError(f"p_range={self.p_range} must satisfy 1 < low < high")


@dataclass(frozen=True)
class FDConfig:
    """Settings for the finite-difference solver.

    ``grid_points`` is the number of cells on [-D/2, D/2]; odd values are
    bumped to the next even number so that s = 0 is a cell face.
    """

    grid_points: int = _DEFAULT_GRID_POINTS
    richardson: bool = True

    def __post_init__(self) -> None:
        if self.grid_points < 32:
            raise ConfigError(f"grid_points={self.grid_points} must be at least 32")
        if self.grid_points % 2:
            object.__setattr__(self, "grid_points", self.grid_points + 1)


# ---------------------------------------------------------------------------
# Shooting
# ---------------------------------------------------------------------------

def _drift_table(problem: SLProblem, length: float, steps: int) -> tuple[float, list[float]]:
    """Sample the drift (n-1) c'/c at every RK4 node and midpoint on [0, length]."""
    h = length / steps
    nodes = np.arange(2 * steps + 1) * (h / 2.0)
    drift = np.atleast_1d(weight_drift(problem.n, problem.kappa, nodes))
    return h, drift.tolist()


def _integrate(
    mu: float,
    h: float,
    drift: list[float],
    keep: bool = False,
) -> tuple[float, float, bool, list[float], list[float]]:
    """Integrate Phi'' = -a Phi' - mu Phi from (0, 1) with classical RK4.

    Returns the end state ``(phi, dphi)``, whether Phi reached zero after the
    origin, and the sampled profile when *keep* is set.  Without *keep* the
    integration stops at the first zero of Phi.
    """
    phi, dphi = 0.0, 1.0
    phis = [phi] if keep else []
    dphis = [dphi] if keep else []
    crossed = False
    half = 0.5 * h
    sixth = h / 6.0
    for k in range(0, len(drift) - 1, 2):
        a0, a1, a2 = drift[k], drift[k + 1], drift[k + 2]
        k1p = dphi
        k1d = -a0 * dphi - mu * phi
        p2 = phi + half * k1p
        d2 = dphi + half * k1d
        k2d = -a1 * d2 - mu * p2
        p3 = phi + half * d2
        d3 = dphi + half * k2d
        k3d = -a1 * d3 - mu * p3
        p4 = phi + h * d3
        d4 = dphi + h * k3d
        k4d = -a2 * d4 - mu * p4
        phi += sixth * (k1p + 2.0 * d2 + 2.0 * d3 + d4)
        dphi += sixth * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
        if phi <= 0.0:
            crossed = True
            if not keep:
                break
        if keep:
            phis.append(phi)
            dphis.append(dphi)
    return phi, dphi, crossed, phis, dphis


def _classify(mu: float, h: float, drift: list[float]) -> tuple[int, float]:
    """Place *mu* relative to the first eigenvalue.

    Returns ``(-1, F)`` below it (Phi'(D/2) > 0, no zero of Phi), ``(1, F)``
    above it but before Phi develops an interior zero, and ``(2, F)`` once it
    has one.
    """
    _, dphi, crossed, _, _ = _integrate(mu, h, drift)
    if crossed:
        return 2, dphi
    return (-1 if dphi > 0.0 else 1), dphi


def _initial_bracket(problem: SLProblem) -> tuple[float, float]:
    n, kappa, D = problem.n, problem.kappa, problem.D
    base = math.pi**2 / D**2
    upper = base + max(0.0, (n - 1) * kappa) + (n - 1) * abs(kappa) + 4.0 / D**2
    return 0.5 * base, upper


def _find_bracket(problem: SLProblem, h: float, drift: list[float], guess: float | None) -> tuple[float, float]:
    if guess is not None:
        lo, hi = guess * (1.0 - _WARM_BRACKET), guess * (1.0 + _WARM_BRACKET)
        if _classify(lo, h, drift)[0] == -1 and _classify(hi, h, drift)[0] == 1:
            return lo, hi
        log.debug("Warm bracket around %.12g failed; searching from scratch", guess)

    lo, hi = _initial_bracket(problem)
    for _ in range(_MAX_BRACKET_STEPS):
        if _classify(lo, h, drift)[0] == -1:
            break
        hi = min(hi, lo)
        lo *= 0.5
    else:
        raise BracketNotFound(f"no lower end for mu found for {problem}; last tried {lo!r}")

    for _ in range(_MAX_BRACKET_STEPS):
        state, _ = _classify(hi, h, drift)
        if state == 1:
            return lo, hi
        if state == -1:
            lo, hi = hi, 2.0 * hi
        else:
            hi = 0.5 * (lo + hi)
    raise BracketNotFound(f"no sign change of Phi'(D/2) found for {problem} in [{lo!r}, {hi!r}]")


def _shoot(problem: SLProblem, steps: int, config: ShootingConfig, guess: float | None = None) -> float:
    """Return the first eigenvalue of the RK4 discretisation with *steps* steps."""
    h, drift = _drift_table(problem, problem.half_length, steps)
    lo, hi = _find_bracket(problem, h, drift, guess)

    def residual(mu: float) -> float:
        state, dphi = _classify(mu, h, drift)
        return -1.0 if state == 2 else dphi

    # Root tolerance well inside mu_tolerance so that level-to-level
    # differences measure discretisation error, not bisection noise.
    rtol = max(1e-2 * config.mu_tolerance, 1e-15)
    try:
        return brentq(residual, lo, hi, xtol=1e-300, rtol=rtol, maxiter=config.max_bisections)
    except RuntimeError as exc:
        raise BracketNotFound(f"root search for {problem} did not converge in [{lo!r}, {hi!r}]: {exc}") from exc


def solve_mu_shooting(problem: SLProblem, config: ShootingConfig | None = None) -> ModelEigenSolution:
    """Compute mu(n, kappa, D) by shooting on the half interval.

    The equation is integrated from Phi(0) = 0, Phi'(0) = 1 with fixed-step RK4
    and the smallest mu with Phi'(D/2) = 0 and Phi > 0 on (0, D/2] is located by
    a bracketed root search.  The step is halved until two successive levels
    agree to ``config.mu_tolerance``.

    Args:
        problem: A valid linear model problem.
        config: Shooting settings; defaults to ``ShootingConfig()``.

    Returns:
        The eigenvalue with the profile of the finest level.

    Raises:
        NearSingularWeight: If kappa > 0 and c_kappa(D/2)^(n-1) < 1e-12.
        BracketNotFound: If the first eigenvalue could not be bracketed.
    """
    config = config or ShootingConfig()
    validate_problem(problem)
    if problem.kappa > 0 and problem.n > 1 and problem.endpoint_weight() < _MIN_SHOOTING_WEIGHT:
        raise NearSingularWeight(
            f"weight c_kappa(D/2)^(n-1)={problem.endpoint_weight():.3g} is below {_MIN_SHOOTING_WEIGHT:g} "
            f"for {problem}; use the finite-difference solver"
        )

    steps = config.ode_steps
    mu = _shoot(problem, steps, config)
    change = math.inf
    for _ in range(config.max_halvings):
        steps *= 2
        refined = _shoot(problem, steps, config, guess=mu)
        change = abs(refined - mu)
        mu = refined
        log.debug("Shooting %s: %d steps, mu=%.15g, change=%.3g", problem, steps, mu, change)
        if change < config.mu_tolerance * mu:
            break
    else:
        log.warning(
            "Step halving for %s stopped at %d steps with change %.3g above tolerance", problem, steps, change
        )

    h, drift = _drift_table(problem, problem.half_length, steps)
    _, _, _, phis, dphis = _integrate(mu, h, drift, keep=True)
    grid = np.linspace(0.0, problem.half_length, steps + 1)
    log.info("mu%s = %.15g by shooting (%d steps)", (problem.n, problem.kappa, problem.D), mu, steps)
    return ModelEigenSolution(
        mu=mu,
        grid=grid,
        phi=np.asarray(phis),
        dphi=np.asarray(dphis),
        method=Method.SHOOTING,
        tolerance_achieved=max(change, 1e-2 * config.mu_tolerance * mu),
        details={"ode_steps": steps},
    )


def limit_identity_residual(solution: ModelEigenSolution, problem: SLProblem, h: float | None = None) -> float:
    """Residual of lim Phi''/Phi = (n-1) kappa - mu evaluated at a small s = h.

    Phi'' is recovered from the model equation, so the residual measures how
    close ``-(n-1)(c'/c)(h) Phi'(h)/Phi(h) - mu`` is to its limit; it is O(h^2).
    Without *h* the first interior grid point of *solution* is used; otherwise
    the profile is integrated from the origin to *h* at ``solution.mu``.
    """
    if h is None:
        h = float(solution.grid[1])
        phi, dphi = float(solution.phi[1]), float(solution.dphi[1])
    else:
        step, drift = _drift_table(problem, h, _LIMIT_STEPS)
        phi, dphi, _, _, _ = _integrate(solution.mu, step, drift)
    drift_h = float(weight_drift(problem.n, problem.kappa, h))
    ratio = (-drift_h * dphi - solution.mu * phi) / phi
    return ratio - ((problem.n - 1) * problem.kappa - solution.mu)


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def _fd_system(problem: SLProblem, cells: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, float]:
    """Assemble the symmetrised tridiagonal matrix of the conservative scheme.

    Cell centres carry the mass c_kappa^(n-1)(s_j); interior faces carry the
    flux weights w_(j+1/2).  Mirrored ghost cells make the two boundary fluxes
    vanish, which is the Neumann closure.

    Returns:
        ``(diagonal, offdiagonal, mass, centres, h)``.
    """
    D, n = problem.D, problem.n
    h = D / cells
    faces = -0.5 * D + h * np.arange(cells + 1)
    centres = faces[:-1] + 0.5 * h
    weights = np.clip(c_kappa(problem.kappa, faces), 0.0, None) ** (n - 1)
    weights[0] = weights[-1] = 0.0
    mass = np.clip(c_kappa(problem.kappa, centres), 0.0, None) ** (n - 1)

    diagonal = (weights[:-1] + weights[1:]) / (h * h) / mass
    offdiagonal = -weights[1:-1] / (h * h) / np.sqrt(mass[:-1] * mass[1:])
    return diagonal, offdiagonal, mass, centres, h


def _sturm_tolerance(diagonal: np.ndarray, offdiagonal: np.ndarray) -> float:
    rough = eigvalsh_tridiagonal(
        diagonal, offdiagonal, select="i", select_range=(1, 1), lapack_driver="stebz", check_finite=False
    )
    return 1e-12 * (1.0 + abs(float(rough[0])))


def _fd_eigenvalue(problem: SLProblem, cells: int) -> float:
    """Second-smallest eigenvalue of the discrete pencil on *cells* cells."""
    diagonal, offdiagonal, _, _, _ = _fd_system(problem, cells)
    tol = _sturm_tolerance(diagonal, offdiagonal)
    lowest = eigvalsh_tridiagonal(
        diagonal, offdiagonal, select="i", select_range=(0, 2), lapack_driver="stebz", tol=tol, check_finite=False
    )
    null, first, second = (float(v) for v in lowest)
    if first - null <= tol or second - first <= tol:
        raise GridTooCoarse(
            f"eigenvalues {null:.6g}, {first:.6g}, {second:.6g} of {problem} are not separated on {cells} cells"
        )
    return first


def full_interval_mode(problem: SLProblem, config: FDConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Fundamental mode of the finite-difference pencil on the full interval.

    Returns:
        ``(centres, u)`` with u the pencil eigenvector, scaled to max |u| = 1
        and oriented so that u > 0 on the right end.
    """
    config = config or FDConfig()
    validate_problem(problem)
    diagonal, offdiagonal, mass, centres, _ = _fd_system(problem, config.grid_points)
    tol = _sturm_tolerance(diagonal, offdiagonal)
    _, vectors = eigh_tridiagonal(
        diagonal,
        offdiagonal,
        select="i",
        select_range=(1, 1),
        lapack_driver="stebz",
        tol=tol,
        check_finite=False,
    )
    u = vectors[:, 0] / np.sqrt(mass)
    u /= np.max(np.abs(u))
    if u[-1] < 0:
        u = -u
    return centres, u


def solve_mu_fd(problem: SLProblem, config: FDConfig | None = None) -> ModelEigenSolution:
    """Compute mu(n, kappa, D) with the conservative finite-difference scheme.

    The scheme tolerates the degenerate weight of the sphere case
    D = pi/sqrt(kappa).  With ``config.richardson`` the values on N and 2N
    cells are combined as (4 mu_2N - mu_N)/3, assuming an O(h^2) error.

    Args:
        problem: A valid linear model problem.
        config: Finite-difference settings; defaults to ``FDConfig()``.

    Returns:
        The eigenvalue with a half-interval profile taken from the odd part of
        the finest grid's eigenvector, sampled on the cell faces of [0, D/2].

    Raises:
        GridTooCoarse: If the discrete eigenvalues are not separated.
    """
    config = config or FDConfig()
    validate_problem(problem)
    cells = config.grid_points
    coarse = _fd_eigenvalue(problem, cells)
    if config.richardson:
        cells *= 2
        fine = _fd_eigenvalue(problem, cells)
        mu = (4.0 * fine - coarse) / 3.0
        error = abs(fine - coarse) / 3.0
    else:
        mu = coarse
        # Leading error of the flat scheme, (pi h / D)^2 / 12 relative.
        error = mu * (math.pi / cells) ** 2 / 12.0

    centres, u = full_interval_mode(problem, FDConfig(grid_points=cells, richardson=False))
    odd = 0.5 * (u - u[::-1])
    h = problem.D / cells
    right = odd[cells // 2 :]
    phi = np.concatenate(([0.0], 0.5 * (right[:-1] + right[1:]), [right[-1]]))
    # The face at s = 0 sits between the two middle cells: Phi'(0) = (u_+ - u_-)/h.
    dphi = np.concatenate(([(right[0] - odd[cells // 2 - 1]) / h], np.diff(right) / h, [0.0]))
    scale = dphi[0]
    grid = centres[cells // 2 :] - 0.5 * h
    grid = np.append(grid, problem.half_length)

    log.info("mu%s = %.15g by finite differences (%d cells)", (problem.n, problem.kappa, problem.D), mu, cells)
    return ModelEigenSolution(
        mu=mu,
        grid=grid,
        phi=phi / scale,
        dphi=dphi / scale,
        method=Method.FINITE_DIFFERENCE,
        tolerance_achieved=error,
        details={"grid_points": cells, "richardson": config.richardson, "coarse_mu": coarse},
    )


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

def _shooting_applicable(problem: SLProblem) -> bool:
    if problem.kappa <= 0 or problem.n == 1:
        return True
    return float(c_kappa(problem.kappa, problem.half_length)) >= _AUTO_SHOOTING_MIN_C


def solve_mu(
    problem: SLProblem,
    method: str = "auto",
    shooting: ShootingConfig | None = None,
    fd: FDConfig | None = None,
) -> ModelEigenSolution:
    """Solve the linear model problem with the requested *method*.

    ``"auto"`` shoots unless the weight is near-singular at D/2, in which case
    only the finite-difference scheme is used.  When both methods apply they
    must agree within their combined error estimates.

    Raises:
        MethodDisagreement: If the two methods disagree in ``"auto"`` mode.
        ValueError: If *method* is not one of auto, shooting, fd.
    """
    validate_problem(problem)
    if method == "shooting":
        return solve_mu_shooting(problem, shooting)
    if method == "fd":
        return solve_mu_fd(problem, fd)
    if method != "auto":
        raise ValueError(f"unknown method {method!r}; expected auto, shooting or fd")

    if not _shooting_applicable(problem):
        log.info("Weight near-singular at D/2 for %s; using finite differences only", problem)
        return solve_mu_fd(problem, fd)

    shot = solve_mu_shooting(problem, shooting)
    grid = solve_mu_fd(problem, fd)
    allowed = shot.tolerance_achieved + grid.tolerance_achieved + 1e-12 * shot.mu
    if abs(shot.mu - grid.mu) > allowed:
        raise MethodDisagreement(
            f"shooting mu={shot.mu!r} and finite-difference mu={grid.mu!r} differ by "
            f"{abs(shot.mu - grid.mu):.3g} > {allowed:.3g} for {problem}"
        )
    return shot


def mu(problem: SLProblem, method: str = "auto") -> float:
    """Return mu(n, kappa, D), the sharp lower bound for the first Neumann eigenvalue."""
    return solve_mu(problem, method).mu
