import argparse
import csv
import io
import logging
import os
import sys
from pathlib import Path

from eigenbound.errors import MeshError, ProblemError, SolverError
from eigenbound.manifold import (
    SpectralConfig,
    assemble_laplacian,
    first_nontrivial_eigenvalue,
    oscillation_quotient_max,
    uses_arc_distances,
)
from eigenbound.model import PSLProblem, SLProblem
from eigenbound.plap import solve_mu_p
from eigenbound.runner import (
    MANIFOLD_KINDS,
    SWEEP_PARAMETERS,
    BoundReport,
    Overrides,
    SweepSpec,
    build_manifold,
    format_float,
    render_json,
    render_report_json,
    render_sweep_csv,
    resolve_geometry,
    sweep,
    verify_bound,
    verify_model_p,
)
from eigenbound.sl_solver import ShootingConfig, solve_mu

_LOG_LEVEL_ENV = "EIGENBOUND_LOG_LEVEL"

# Exit codes: invalid input (including argparse usage errors) and solver failure.
_EXIT_INVALID = 2
_EXIT_SOLVER = 1

_FORMATS = ("human", "json", "csv")

log = logging.getLogger(__name__)


def main() -> None:
    """Entry point for the ``eigenbound`` command.

    Logging goes to stderr so that JSON and CSV output on stdout stays clean;
    the level comes from ``EIGENBOUND_LOG_LEVEL`` (default WARNING).
    """
    logging.basicConfig(
        level=os.environ.get(_LOG_LEVEL_ENV, "WARNING").upper(),
        format="%(asctime)s %(levelname)-8s %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        stream=sys.stderr,
    )
    sys.exit(run(sys.argv[1:]))


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_output(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--format",
        choices=_FORMATS,
        help="output format (default: from the --out suffix .json or .csv, otherwise human)",
    )
    parser.add_argument("--out", type=Path, help="write output to this file instead of stdout")


def _add_problem(parser: argparse.ArgumentParser, required: bool) -> None:
    parser.add_argument("--n", type=int, required=required, help="dimension n >= 1")
    parser.add_argument("--kappa", type=float, required=required, help="Ricci lower bound divided by (n-1), in 1/length^2")
    parser.add_argument("--diameter", type=float, required=required, help="diameter D > 0, in length units")


def _add_mu_tolerance(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tol", type=float, help="relative tolerance on mu, dimensionless (default 1e-10)")


def _add_method(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--method", choices=("shooting", "fd", "auto"), default="auto", help="model solver (default auto)"
    )


def _add_manifold(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifold", choices=MANIFOLD_KINDS, required=True, help="manifold instance to build or load")
    parser.add_argument("--radius", type=float, default=1.0, help="icosphere radius, in length units (default 1)")
    parser.add_argument("--subdiv", type=int, default=4, help="icosphere subdivision level 0..7 (default 4)")
    parser.add_argument("--a", type=float, default=None, help="torus side a, in length units (default 2*pi)")
    parser.add_argument("--b", type=float, default=None, help="torus side b, in length units (default pi)")
    parser.add_argument("--length", type=float, default=None, help="circle circumference, in length units (default 2*pi)")
    parser.add_argument("--grid", type=int, help="nodes of a circle or interval, or along side a of a torus")
    parser.add_argument("--mesh", type=Path, help="path of an ASCII OFF triangle mesh (manifold off-file)")
    parser.add_argument("--tol", type=float, default=1e-8, help="relative eigen-residual tolerance (default 1e-8)")
    parser.add_argument("--seed", type=int, default=0, help="seed of the start vector and pair sampling (default 0)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eigenbound",
        description="Sharp lower bounds for the first Neumann eigenvalue and their verification on meshes.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    mu = commands.add_parser("mu", help="first eigenvalue mu(n, kappa, D) of the linear model problem")
    _add_problem(mu, required=True)
    _add_method(mu)
    _add_mu_tolerance(mu)
    _add_output(mu)

    mu_p = commands.add_parser("mu-p", help="first eigenvalue mu_p(n, kappa, D) of the p-Laplacian model problem")
    _add_problem(mu_p, required=True)
    mu_p.add_argument("--p", type=float, required=True, help="exponent p > 1 (supported range 1.1..10)")
    _add_mu_tolerance(mu_p)
    _add_output(mu_p)

    verify = commands.add_parser("verify", help="check lambda_1 >= mu on a discretised manifold")
    _add_manifold(verify)
    _add_problem(verify, required=False)
    verify.add_argument("--p", type=float, help="report only the p-Laplacian model bound mu_p for this exponent")
    verify.add_argument("--slack", type=float, help="tolerance on the margin, in 1/length^2 (default from mesh size)")
    _add_method(verify)
    _add_output(verify)

    table = commands.add_parser("sweep", help="tabulate mu or mu_p along one parameter")
    table.add_argument("--vary", choices=SWEEP_PARAMETERS, required=True, help="parameter to sweep")
    table.add_argument("--from", dest="start", type=float, required=True, help="first parameter value")
    table.add_argument("--to", dest="stop", type=float, required=True, help="last parameter value")
    table.add_argument("--steps", type=int, required=True, help="number of values, at least 2")
    table.add_argument("--n", type=int, default=2, help="dimension n >= 1 (default 2)")
    table.add_argument("--kappa", type=float, default=0.0, help="curvature parameter, in 1/length^2 (default 0)")
    table.add_argument("--diameter", type=float, default=1.0, help="diameter D, in length units (default 1)")
    table.add_argument("--p", type=float, help="exponent p > 1; omitted for the linear problem")
    _add_method(table)
    _add_output(table)

    diagnostic = commands.add_parser("q-diagnostic", help="maximise the oscillation quotient of the first eigenvector")
    _add_manifold(diagnostic)
    _add_problem(diagnostic, required=False)
    _add_method(diagnostic)
    _add_output(diagnostic)
    return parser


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _flatten(payload: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in payload.items():
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{prefix}{key}."))
        else:
            flat[f"{prefix}{key}"] = value
    return flat


def _text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format_float(value)
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def _csv_record(payload: dict) -> str:
    flat = _flatten(payload)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(flat)
    writer.writerow(_text(value) for value in flat.values())
    return buffer.getvalue()


def _human_table(title: str, payload: dict) -> str:
    flat = _flatten(payload)
    width = max(len(key) for key in flat)
    rows = [f"  {key:<{width}}  {_text(value) or '-'}" for key, value in flat.items()]
    return "\n".join([title, *rows]) + "\n"


def _render(payload: dict, fmt: str, title: str) -> str:
    if fmt == "json":
        return render_json(payload) + "\n"
    if fmt == "csv":
        return _csv_record(payload)
    return _human_table(title, payload)


def _format_for(out: Path | None) -> str:
    suffix = out.suffix.lower().lstrip(".") if out is not None else ""
    return suffix if suffix in ("json", "csv") else "human"


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)
        log.info("Wrote %s", out)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _manifold_from(args: argparse.Namespace):
    options = {"radius": args.radius, "subdivisions": args.subdiv, "grid": args.grid, "mesh": args.mesh}
    for name in ("a", "b", "length"):
        if getattr(args, name) is not None:
            options[name] = getattr(args, name)
    if args.manifold == "interval" and args.diameter is not None:
        options["diameter"] = args.diameter
    return build_manifold(args.manifold, **options)


def _overrides_from(args: argparse.Namespace) -> Overrides:
    # On an interval --diameter sets its length, which is already the analytic diameter.
    diameter = None if args.manifold == "interval" else args.diameter
    return Overrides(n=args.n, kappa=args.kappa, diameter=diameter)


def _shooting_from(args: argparse.Namespace) -> ShootingConfig | None:
    return None if args.tol is None else ShootingConfig(mu_tolerance=args.tol)


def _run_mu(args: argparse.Namespace) -> str:
    solution = solve_mu(SLProblem(n=args.n, kappa=args.kappa, D=args.diameter), args.method, _shooting_from(args))
    payload = {
        "n": args.n,
        "kappa": args.kappa,
        "diameter": args.diameter,
        "mu": solution.mu,
        "method": solution.method.value,
        "tolerance_achieved": solution.tolerance_achieved,
    }
    return _render(payload, args.format, f"mu = {format_float(solution.mu)}")


def _run_mu_p(args: argparse.Namespace) -> str:
    problem = PSLProblem(base=SLProblem(n=args.n, kappa=args.kappa, D=args.diameter), p=args.p)
    solution = solve_mu_p(problem, _shooting_from(args))
    payload = {
        "n": args.n,
        "kappa": args.kappa,
        "diameter": args.diameter,
        "p": args.p,
        "mu_p": solution.mu,
        "tolerance_achieved": solution.tolerance_achieved,
    }
    return _render(payload, args.format, f"mu_p = {format_float(solution.mu)}")


def _report_title(report: BoundReport) -> str:
    if report.margin is None:
        return f"{report.manifold_name}: {report.verdict.value} (mu_p = {format_float(report.mu_bound)})"
    return f"{report.manifold_name}: {report.verdict.value} (margin {report.margin:+.6g}, slack {report.slack_used:.3g})"


def _run_verify(args: argparse.Namespace) -> str:
    manifold = _manifold_from(args)
    overrides = _overrides_from(args)
    if args.p is not None:
        report = verify_model_p(manifold, args.p, overrides)
    else:
        spectral = SpectralConfig(tol=args.tol, seed=args.seed)
        report = verify_bound(manifold, overrides, args.slack, args.method, spectral)
    if args.format == "json":
        return render_report_json(report) + "\n"
    return _render(report.to_dict(), args.format, _report_title(report))


def _run_sweep(args: argparse.Namespace) -> str:
    spec = SweepSpec(
        varying=args.vary,
        start=args.start,
        stop=args.stop,
        steps=args.steps,
        n=args.n,
        kappa=args.kappa,
        diameter=args.diameter,
        p=args.p,
        method=args.method,
    )
    rows = sweep(spec)
    if args.format == "csv":
        return render_sweep_csv(rows)
    if args.format == "json":
        return render_json({"varying": args.vary, "rows": [vars(row) for row in rows]}) + "\n"
    lines = [f"sweep over {args.vary}: {len(rows)} rows", f"  {'param':>24}  {'mu':>24}  direction"]
    lines += [f"  {format_float(float(r.param)):>24}  {format_float(r.mu):>24}  {r.monotone_direction}" for r in rows]
    return "\n".join(lines) + "\n"


def _run_q_diagnostic(args: argparse.Namespace) -> str:
    manifold = _manifold_from(args)
    n, kappa, diameter, source, edge_diameter = resolve_geometry(manifold, _overrides_from(args))
    stiffness, mass = assemble_laplacian(manifold)
    estimate = first_nontrivial_eigenvalue(stiffness, mass, config=SpectralConfig(tol=args.tol, seed=args.seed))
    # Arc distances never exceed the geodesic diameter; edge paths may.
    model_diameter = diameter if uses_arc_distances(manifold) else max(diameter, edge_diameter)
    model = solve_mu(SLProblem(n=n, kappa=kappa, D=model_diameter), args.method)
    report = oscillation_quotient_max(manifold, estimate.vector, model, seed=args.seed)
    payload = {
        "manifold_name": manifold.name,
        "lambda_estimate": estimate.lambda1,
        "model_diameter": model_diameter,
        "diameter_source": source.value,
        "max_q": report.max_q,
        "argmax": list(report.argmax) if isinstance(report.argmax, tuple) else report.argmax,
        "pair_max": report.pair_max,
        "pair_argmax": list(report.pair_argmax),
        "diagonal_max": report.diagonal_max,
        "diagonal_argmax": report.diagonal_argmax,
        "sampled": report.sampled,
        "sources": report.sources,
        "seed": report.seed,
    }
    return _render(payload, args.format, f"{manifold.name}: max Q = {format_float(report.max_q)}")


_COMMANDS = {
    "mu": _run_mu,
    "mu-p": _run_mu_p,
    "verify": _run_verify,
    "sweep": _run_sweep,
    "q-diagnostic": _run_q_diagnostic,
}


def run(argv: list[str]) -> int:
    """Parse *argv*, run one subcommand and return the process exit code.

    Returns 0 on success, 2 for rejected input (bad flags, invalid problems,
    malformed meshes) and 1 when a solver fails on valid input.
    """
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else _EXIT_INVALID
    if args.format is None:
        args.format = _format_for(args.out)

    try:
        text = _COMMANDS[args.command](args)
    except (ProblemError, MeshError) as exc:
        log.error("Invalid input (%s): %s", type(exc).__name__, exc)
        return _EXIT_INVALID
    except OSError as exc:
        log.error("Cannot read input: %s", exc)
        return _EXIT_INVALID
    except SolverError as exc:
        log.error("Solver failed (%s): %s", type(exc).__name__, exc)
        for note in getattr(exc, "__notes__", []):
            log.error("  %s", note)
        return _EXIT_SOLVER

    _emit(text, args.out)
    return 0
