"""End-to-end verification of the eigenvalue lower bounds on manifold instances."""

import dataclasses
import enum
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from eigenbound.errors import MissingCurvatureData, ProblemError
from eigenbound.manifold import (
    Manifold,
    SpectralConfig,
    assemble_laplacian,
    build_circle,
    build_flat_torus,
    build_icosphere,
    build_interval,
    first_nontrivial_eigenvalue,
    graph_diameter,
    load_mesh_off,
    mean_edge_length,
)
from eigenbound.model import PSLProblem, SLProblem, validate_problem
from eigenbound.plap import solve_mu_p
from eigenbound.sl_solver import FDConfig, ShootingConfig, solve_mu

log = logging.getLogger(__name__)

# Default discretisations of the built-in manifolds.
_DEFAULT_CHAIN_NODES = 1000
_DEFAULT_TORUS_NODES = 64
_DEFAULT_SUBDIVISIONS = 4

# Default slack is at least this fraction of mu.
_RELATIVE_SLACK = 0.05

# Relative change below which consecutive sweep values count as equal.
_FLAT_TOLERANCE = 1e-12

MANIFOLD_KINDS = ("circle", "interval", "torus", "icosphere", "off-file")
SWEEP_PARAMETERS = ("D", "kappa", "n", "p")


class Verdict(str, enum.Enum):
    HOLDS = "holds"
    SHARP = "sharp"
    VIOLATED_WITHIN_TOLERANCE = "violated_within_tolerance"
    VIOLATED = "violated"
    MODEL_ONLY = "model_only"


class DiameterSource(str, enum.Enum):
    ANALYTIC = "analytic"
    GRAPH = "graph"
    USER = "user"


@dataclass(frozen=True)
class Overrides:
    """Caller-supplied geometry that replaces or completes a manifold's metadata."""

    n: int | None = None
    kappa: float | None = None
    diameter: float | None = None


@dataclass(frozen=True)
class BoundReport:
    manifold_name: str
    n: int
    kappa: float
    diameter_used: float
    diameter_source: DiameterSource
    lambda_estimate: float | None
    lambda_exact: float | None
    mu_bound: float
    p: float | None
    margin: float | None
    verdict: Verdict
    slack_used: float | None
    solver_tolerances: dict = field(default_factory=dict)
    graph_diameter: float | None = None

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["diameter_source"] = self.diameter_source.value
        data["verdict"] = self.verdict.value
        return data


def build_manifold(
    kind: str,
    *,
    radius: float = 1.0,
    subdivisions: int = _DEFAULT_SUBDIVISIONS,
    a: float = 2.0 * math.pi,
    b: float = math.pi,
    length: float = 2.0 * math.pi,
    diameter: float = 1.0,
    grid: int | None = None,
    mesh: str | Path | None = None,
) -> Manifold:
    """Build one of the supported manifold kinds with default discretisations.

    ``grid`` is the node count of a circle or interval, and the node count
    along ``a`` for a torus (the count along ``b`` keeps cells square).
    """
    if kind == "circle":
        return build_circle(length, grid or _DEFAULT_CHAIN_NODES)
    if kind == "interval":
        return build_interval(diameter, grid or _DEFAULT_CHAIN_NODES)
    if kind == "icosphere":
        return build_icosphere(radius, subdivisions)
    if kind == "torus":
        n_a = grid or _DEFAULT_TORUS_NODES
        return build_flat_torus(a, b, n_a, max(8, round(n_a * b / a)))
    if kind == "off-file":
        if mesh is None:
            raise ProblemError("an OFF file path is required for manifold 'off-file'")
        return load_mesh_off(mesh)
    raise ProblemError(f"unknown manifold {kind!r}; expected one of {', '.join(MANIFOLD_KINDS)}")


def classify(margin: float, slack: float, lambda_exact: float | None = None, mu_bound: float | None = None) -> Verdict:
    """Turn a margin lambda - mu into a verdict.

    ``sharp`` when |margin| <= slack and ``holds`` above it.  A shortfall beyond
    the slack is ``violated_within_tolerance`` when the continuum eigenvalue is
    known and itself clears the bound within the slack; otherwise ``violated``.
    """
    if abs(margin) <= slack:
        return Verdict.SHARP
    if margin > slack:
        return Verdict.HOLDS
    if lambda_exact is not None and mu_bound is not None and lambda_exact - mu_bound >= -slack:
        return Verdict.VIOLATED_WITHIN_TOLERANCE
    return Verdict.VIOLATED


def resolve_geometry(manifold: Manifold, overrides: Overrides) -> tuple[int, float, float, DiameterSource, float]:
    """Resolve (n, kappa, diameter, source, graph diameter) for *manifold*."""
    metadata = manifold.metadata
    n = overrides.n if overrides.n is not None else (metadata.n if metadata else None)
    kappa = overrides.kappa if overrides.kappa is not None else (metadata.kappa_lower if metadata else None)
    if n is None or kappa is None:
        raise MissingCurvatureData(
            f"{manifold.name} carries no analytic metadata; supply both n and kappa (got n={n!r}, kappa={kappa!r})"
        )

    edge_diameter = graph_diameter(manifold)
    if overrides.diameter is not None:
        return n, kappa, overrides.diameter, DiameterSource.USER, edge_diameter
    if metadata is not None:
        return n, kappa, metadata.diameter, DiameterSource.ANALYTIC, edge_diameter
    return n, kappa, edge_diameter, DiameterSource.GRAPH, edge_diameter


def default_slack(mu_bound: float, solver_tolerance: float, edge_length: float, lambda_estimate: float) -> float:
    """``max(0.05 mu, 3 (solver tolerance + h^2 lambda))`` with h the mean edge length."""
    return max(_RELATIVE_SLACK * mu_bound, 3.0 * (solver_tolerance + edge_length**2 * lambda_estimate))


def verify_bound(
    manifold: Manifold,
    overrides: Overrides | None = None,
    slack: float | None = None,
    method: str = "auto",
    spectral: SpectralConfig | None = None,
    shooting: ShootingConfig | None = None,
    fd: FDConfig | None = None,
) -> BoundReport:
    """Check lambda_1 >= mu(n, kappa, D) on *manifold*.

    The diameter is the analytic one when the manifold carries metadata,
    otherwise its edge-path diameter; an explicit override wins over both.

    Args:
        manifold: A built or loaded manifold.
        overrides: Values replacing the manifold's metadata.
        slack: Tolerance on the margin; defaults to :func:`default_slack`.
        method: Model solver method passed to :func:`~eigenbound.sl_solver.solve_mu`.
        spectral: Settings of the discrete eigen-solve.

    Raises:
        MissingCurvatureData: If neither metadata nor overrides provide n and kappa.
    """
    overrides = overrides or Overrides()
    spectral = spectral or SpectralConfig()
    if slack is not None and not slack > 0:
        raise ProblemError(f"slack={slack!r} must be positive")
    n, kappa, diameter, source, edge_diameter = resolve_geometry(manifold, overrides)
    problem = validate_problem(SLProblem(n=n, kappa=kappa, D=diameter))

    stiffness, mass = assemble_laplacian(manifold)
    estimate = first_nontrivial_eigenvalue(stiffness, mass, config=spectral)
    solution = solve_mu(problem, method, shooting, fd)

    margin = estimate.lambda1 - solution.mu
    tolerance = estimate.residual + solution.tolerance_achieved
    slack_used = slack if slack is not None else default_slack(
        solution.mu, tolerance, mean_edge_length(manifold), estimate.lambda1
    )
    lambda_exact = manifold.metadata.lambda1_exact if manifold.metadata else None
    verdict = classify(margin, slack_used, lambda_exact, solution.mu)
    log.info("%s: lambda=%.12g mu=%.12g margin=%.3g -> %s", manifold.name, estimate.lambda1, solution.mu, margin, verdict.value)

    return BoundReport(
        manifold_name=manifold.name,
        n=n,
        kappa=kappa,
        diameter_used=diameter,
        diameter_source=source,
        lambda_estimate=estimate.lambda1,
        lambda_exact=lambda_exact,
        mu_bound=solution.mu,
        p=None,
        margin=margin,
        verdict=verdict,
        slack_used=slack_used,
        solver_tolerances={
            "mu_method": solution.method.value,
            "mu_tolerance": solution.tolerance_achieved,
            "lambda_residual": estimate.residual,
            "lambda_iterations": estimate.iterations,
            "spectral_tol": spectral.tol,
            "seed": spectral.seed,
            "grid_size": estimate.grid_size,
        },
        graph_diameter=edge_diameter,
    )


def verify_model_p(
    manifold: Manifold,
    p: float,
    overrides: Overrides | None = None,
    config: ShootingConfig | None = None,
) -> BoundReport:
    """Model side of the p-Laplacian bound: mu_p for the manifold's geometry.

    No discrete p-Laplacian eigenvalue is computed, so the lambda fields and
    the margin are ``None`` and the verdict is ``model_only``.
    """
    n, kappa, diameter, source, edge_diameter = resolve_geometry(manifold, overrides or Overrides())
    problem = PSLProblem(base=SLProblem(n=n, kappa=kappa, D=diameter), p=p)
    solution = solve_mu_p(problem, config)
    return BoundReport(
        manifold_name=manifold.name,
        n=n,
        kappa=kappa,
        diameter_used=diameter,
        diameter_source=source,
        lambda_estimate=None,
        lambda_exact=None,
        mu_bound=solution.mu,
        p=p,
        margin=None,
        verdict=Verdict.MODEL_ONLY,
        slack_used=None,
        solver_tolerances={"mu_method": solution.method.value, "mu_tolerance": solution.tolerance_achieved},
        graph_diameter=edge_diameter,
    )


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    """A one-parameter family of model problems.

    ``varying`` names the swept parameter; the others are held at ``n``,
    ``kappa``, ``diameter`` and ``p`` (``p=None`` selects the linear problem
    unless ``p`` itself is swept).
    """

    varying: str
    start: float
    stop: float
    steps: int
    n: int = 2
    kappa: float = 0.0
    diameter: float = 1.0
    p: float | None = None
    method: str = "auto"

    def __post_init__(self) -> None:
        if self.varying not in SWEEP_PARAMETERS:
            raise ProblemError(f"cannot vary {self.varying!r}; expected one of {', '.join(SWEEP_PARAMETERS)}")
        if self.steps < 2:
            raise ProblemError(f"steps={self.steps} must be at least 2")

    def values(self) -> list[float]:
        values = np.linspace(self.start, self.stop, self.steps)
        if self.varying == "n":
            return [int(v) for v in np.rint(values)]
        return [float(v) for v in values]

    def problem(self, value: float) -> SLProblem | PSLProblem:
        params = {"n": self.n, "kappa": self.kappa, "D": self.diameter}
        exponent = self.p
        if self.varying == "p":
            exponent = value
        else:
            params[self.varying] = value
        base = SLProblem(**params)
        return base if exponent is None else PSLProblem(base=base, p=exponent)


@dataclass(frozen=True)
class SweepRow:
    param: float
    mu: float
    monotone_direction: str


def _direction(previous: float | None, current: float) -> str:
    if previous is None:
        return "start"
    if abs(current - previous) <= _FLAT_TOLERANCE * max(abs(current), abs(previous)):
        return "flat"
    return "up" if current > previous else "down"


def sweep(spec: SweepSpec, shooting: ShootingConfig | None = None, fd: FDConfig | None = None) -> list[SweepRow]:
    """Evaluate mu (or mu_p) along *spec* in parameter order.

    Every point is validated before any solve.  A failing row re-raises the
    solver error with a note naming the row.
    """
    values = spec.values()
    problems = [validate_problem(spec.problem(value)) for value in values]

    rows: list[SweepRow] = []
    previous = None
    for index, (value, problem) in enumerate(zip(values, problems)):
        try:
            if isinstance(problem, PSLProblem):
                mu = solve_mu_p(problem, shooting).mu
            else:
                mu = solve_mu(problem, spec.method, shooting, fd).mu
        except Exception as exc:
            exc.add_note(f"sweep row {index} ({spec.varying}={value!r})")
            raise
        rows.append(SweepRow(param=value, mu=mu, monotone_direction=_direction(previous, mu)))
        previous = mu
    log.info("Sweep over %s: %d rows", spec.varying, len(rows))
    return rows


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------

def format_float(value: float) -> str:
    """17 significant digits, which round-trip every binary64 value."""
    return f"{value:.17g}"


def _json_value(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, enum.Enum):
        return _json_value(value.value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_float(value) if math.isfinite(value) else "null"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        items = ", ".join(f"{json.dumps(str(k))}: {_json_value(v)}" for k, v in value.items())
        return "{" + items + "}"
    if isinstance(value, list | tuple):
        return "[" + ", ".join(_json_value(v) for v in value) + "]"
    raise TypeError(f"cannot serialise {type(value).__name__}")


def render_json(payload: dict) -> str:
    """Render *payload* as one JSON object; non-finite numbers become null."""
    return _json_value(payload)


def render_report_json(report: BoundReport) -> str:
    return render_json(report.to_dict())


def render_sweep_csv(rows: list[SweepRow]) -> str:
    """CSV with header ``param,mu,monotone_direction``."""
    lines = ["param,mu,monotone_direction"]
    for row in rows:
        param = str(row.param) if isinstance(row.param, int) else format_float(row.param)
        lines.append(f"{param},{format_float(row.mu)},{row.monotone_direction}")
    return "\n".join(lines) + "\n"
