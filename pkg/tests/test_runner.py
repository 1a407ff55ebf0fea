"""Tests for eigenbound.runner: bound verification, sweeps and rendering."""

import json
import math
from unittest.mock import MagicMock, patch

import pytest

from eigenbound.errors import (
    BracketNotFound,
    DiameterExceedsMyersRange,
    MissingCurvatureData,
    ProblemError,
)
from eigenbound.manifold import build_circle, build_flat_torus, build_icosphere, load_mesh_off
from eigenbound.model import PSLProblem, SLProblem, flat_mu_p
from eigenbound.runner import (
    DiameterSource,
    Overrides,
    SweepRow,
    SweepSpec,
    Verdict,
    build_manifold,
    classify,
    default_slack,
    render_json,
    render_report_json,
    render_sweep_csv,
    resolve_geometry,
    sweep,
    verify_bound,
    verify_model_p,
)

_TETRAHEDRON = "OFF\n4 4 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n"


def _make_off(tmp_path):
    path = tmp_path / "tetra.off"
    path.write_text(_TETRAHEDRON)
    return load_mesh_off(path)


# ---------------------------------------------------------------------------
# build_manifold
# ---------------------------------------------------------------------------

def test_build_manifold_torus_keeps_cells_square():
    torus = build_manifold("torus", grid=32)
    assert len(torus.vertices) == 32 * 16
    assert torus.periods == (2 * math.pi, math.pi)


def test_build_manifold_off_file_needs_path():
    with pytest.raises(ProblemError, match="OFF file path"):
        build_manifold("off-file")


def test_build_manifold_rejects_unknown_kind():
    with pytest.raises(ProblemError, match="unknown manifold"):
        build_manifold("klein-bottle")


# ---------------------------------------------------------------------------
# classify
# ---------------------------------------------------------------------------

def test_classify_sharp_and_holds():
    assert classify(0.01, 0.05) is Verdict.SHARP
    assert classify(-0.05, 0.05) is Verdict.SHARP
    assert classify(0.2, 0.05) is Verdict.HOLDS


def test_classify_violation_within_tolerance_needs_exact_eigenvalue():
    assert classify(-0.2, 0.05, lambda_exact=2.0, mu_bound=2.0) is Verdict.VIOLATED_WITHIN_TOLERANCE
    assert classify(-0.2, 0.05, lambda_exact=1.0, mu_bound=2.0) is Verdict.VIOLATED
    assert classify(-0.2, 0.05) is Verdict.VIOLATED


def test_default_slack_has_relative_floor():
    assert default_slack(2.0, 0.0, 0.01, 2.0) == pytest.approx(0.1)
    assert default_slack(2.0, 0.0, 1.0, 2.0) == pytest.approx(6.0)


# ---------------------------------------------------------------------------
# resolve_geometry
# ---------------------------------------------------------------------------

def test_resolve_geometry_uses_analytic_metadata():
    n, kappa, diameter, source, edge = resolve_geometry(build_circle(2 * math.pi, 100), Overrides())
    assert (n, kappa, source) == (1, 0.0, DiameterSource.ANALYTIC)
    assert diameter == pytest.approx(math.pi)
    assert edge == pytest.approx(math.pi)


def test_resolve_geometry_diameter_override_wins():
    *_, diameter, source, _ = resolve_geometry(build_circle(2 * math.pi, 100), Overrides(diameter=4.0))
    assert diameter == 4.0
    assert source is DiameterSource.USER


def test_resolve_geometry_requires_curvature_for_off_meshes(tmp_path):
    with pytest.raises(MissingCurvatureData, match="supply both n and kappa"):
        resolve_geometry(_make_off(tmp_path), Overrides(n=2))


def test_resolve_geometry_falls_back_to_graph_diameter(tmp_path):
    n, kappa, diameter, source, edge = resolve_geometry(_make_off(tmp_path), Overrides(n=2, kappa=0.0))
    assert source is DiameterSource.GRAPH
    assert diameter == edge == pytest.approx(math.sqrt(2.0))


# ---------------------------------------------------------------------------
# verify_bound
# ---------------------------------------------------------------------------

def test_verify_icosphere_is_sharp():
    report = verify_bound(build_icosphere(1.0, 3))
    assert report.verdict is Verdict.SHARP
    assert report.mu_bound == pytest.approx(2.0, rel=1e-6)
    assert report.lambda_exact == pytest.approx(2.0)
    assert report.diameter_source is DiameterSource.ANALYTIC
    assert report.solver_tolerances["mu_method"] == "finite_difference"


def test_verify_fine_icosphere_is_sharp_with_default_slack():
    report = verify_bound(build_icosphere(1.0, 4))
    assert report.verdict is Verdict.SHARP
    assert report.slack_used == pytest.approx(0.1)
    assert abs(report.margin) < 1e-3


def test_verify_torus_holds_with_margin():
    report = verify_bound(build_flat_torus(2 * math.pi, math.pi, 64, 32))
    expected_mu = math.pi**2 / (math.hypot(2 * math.pi, math.pi) / 2) ** 2
    assert report.verdict is Verdict.HOLDS
    assert report.mu_bound == pytest.approx(expected_mu, rel=1e-8)
    assert report.margin == pytest.approx(0.2, abs=0.02)


def test_verify_circle_is_sharp_with_tight_slack():
    report = verify_bound(build_circle(2 * math.pi, 1000), slack=0.01)
    assert report.verdict is Verdict.SHARP
    assert report.slack_used == 0.01
    assert abs(report.margin) < 1e-4


def test_verify_circle_is_sharp_with_default_slack():
    report = verify_bound(build_circle(2 * math.pi, 400))
    assert report.verdict is Verdict.SHARP
    assert report.slack_used == pytest.approx(0.05)


def test_verify_verdict_matches_classify():
    report = verify_bound(build_flat_torus(2 * math.pi, math.pi, 32, 16))
    assert report.verdict is classify(report.margin, report.slack_used, report.lambda_exact, report.mu_bound)
    assert report.margin == pytest.approx(report.lambda_estimate - report.mu_bound)


def test_verify_rejects_nonpositive_slack():
    with pytest.raises(ProblemError, match="slack"):
        verify_bound(build_circle(1.0, 20), slack=0.0)


def test_verify_off_mesh_without_curvature_fails(tmp_path):
    with pytest.raises(MissingCurvatureData):
        verify_bound(_make_off(tmp_path))


def test_verify_is_deterministic():
    first = verify_bound(build_icosphere(1.0, 2))
    second = verify_bound(build_icosphere(1.0, 2))
    assert render_report_json(first) == render_report_json(second)


def test_verify_model_p_reports_model_only():
    torus = build_flat_torus(2 * math.pi, math.pi, 16, 8)
    report = verify_model_p(torus, 3.0)
    assert report.verdict is Verdict.MODEL_ONLY
    assert report.p == 3.0
    assert report.lambda_estimate is None
    assert report.margin is None
    assert report.mu_bound == pytest.approx(flat_mu_p(3.0, torus.metadata.diameter), rel=1e-6)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def test_sweep_spec_rejects_unknown_parameter():
    with pytest.raises(ProblemError, match="cannot vary"):
        SweepSpec(varying="radius", start=0.0, stop=1.0, steps=3)


def test_sweep_spec_rounds_dimension():
    assert SweepSpec(varying="n", start=1, stop=4, steps=4).values() == [1, 2, 3, 4]


def test_sweep_spec_builds_p_problems():
    spec = SweepSpec(varying="p", start=1.5, stop=3.0, steps=2, n=3)
    problem = spec.problem(1.5)
    assert isinstance(problem, PSLProblem)
    assert problem.p == 1.5
    assert SweepSpec(varying="D", start=1.0, stop=2.0, steps=2).problem(2.0) == SLProblem(n=2, kappa=0.0, D=2.0)


def test_sweep_over_diameter_decreases():
    rows = sweep(SweepSpec(varying="D", start=0.5, stop=2.0, steps=4))
    assert [row.monotone_direction for row in rows] == ["start", "down", "down", "down"]
    for row in rows:
        assert row.mu == pytest.approx(math.pi**2 / row.param**2, rel=1e-8)


def test_sweep_over_kappa_increases():
    rows = sweep(SweepSpec(varying="kappa", start=-1.0, stop=1.0, steps=5, n=3, diameter=2.0))
    assert [row.monotone_direction for row in rows] == ["start", "up", "up", "up", "up"]


def test_sweep_over_kappa_is_constant_in_one_dimension():
    rows = sweep(SweepSpec(varying="kappa", start=-1.0, stop=1.0, steps=5, n=1, diameter=2.0))
    for row in rows:
        assert row.mu == pytest.approx(math.pi**2 / 4, rel=1e-8)


def test_sweep_over_dimension_is_flat_without_curvature():
    rows = sweep(SweepSpec(varying="n", start=1, stop=4, steps=4))
    assert [row.monotone_direction for row in rows] == ["start", "flat", "flat", "flat"]


def test_sweep_over_exponent_matches_closed_form():
    rows = sweep(SweepSpec(varying="p", start=1.5, stop=3.0, steps=3))
    for row in rows:
        assert row.mu == pytest.approx(flat_mu_p(row.param, 1.0), rel=1e-6)


def test_sweep_validates_every_point_before_solving():
    spec = SweepSpec(varying="D", start=1.0, stop=4.0, steps=4, kappa=1.0)
    with patch("eigenbound.runner.solve_mu") as solver:
        with pytest.raises(DiameterExceedsMyersRange):
            sweep(spec)
    solver.assert_not_called()


def test_sweep_failure_names_the_row():
    spec = SweepSpec(varying="D", start=1.0, stop=2.0, steps=3)
    outcomes = [MagicMock(mu=9.0), BracketNotFound("no sign change")]
    with patch("eigenbound.runner.solve_mu", side_effect=outcomes):
        with pytest.raises(BracketNotFound) as info:
            sweep(spec)
    assert info.value.__notes__ == ["sweep row 1 (D=1.5)"]


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def test_render_json_maps_non_finite_to_null():
    text = render_json({"x": math.inf, "y": [1.0, math.nan], "z": "ok", "flag": True})
    assert json.loads(text) == {"x": None, "y": [1.0, None], "z": "ok", "flag": True}


def test_render_json_round_trips_floats():
    value = 0.1 + 0.2
    assert json.loads(render_json({"v": value}))["v"] == value


def test_render_report_json_uses_enum_values():
    payload = json.loads(render_report_json(verify_bound(build_circle(2 * math.pi, 200))))
    assert payload["verdict"] in {"holds", "sharp"}
    assert payload["diameter_source"] == "analytic"
    assert payload["p"] is None


def test_render_sweep_csv():
    rows = [SweepRow(param=1, mu=2.5, monotone_direction="start"), SweepRow(param=2, mu=2.5, monotone_direction="flat")]
    assert render_sweep_csv(rows) == "param,mu,monotone_direction\n1,2.5,start\n2,2.5,flat\n"
