"""Tests for the eigenbound.main command-line entry point.

Each test drives ``run`` with an argv list and inspects stdout and the exit
code; ``main`` itself is only checked for logging setup and exit handling.
"""

import csv
import json
import logging
import math
from unittest.mock import patch

import pytest

from eigenbound.errors import NoConvergence
from eigenbound.main import main, run
from eigenbound.runner import build_manifold


def _run_json(capsys, argv):
    code = run(argv + ["--format", "json"])
    return code, json.loads(capsys.readouterr().out)


# ---------------------------------------------------------------------------
# mu / mu-p
# ---------------------------------------------------------------------------

def test_mu_sphere_json(capsys):
    code, payload = _run_json(capsys, ["mu", "--n", "3", "--kappa", "1", "--diameter", repr(math.pi)])
    assert code == 0
    assert payload["mu"] == pytest.approx(3.0, rel=1e-6)
    assert payload["method"] == "finite_difference"


def test_mu_flat_human_output(capsys):
    code = run(["mu", "--n", "2", "--kappa", "0", "--diameter", "1"])
    out = capsys.readouterr().out
    assert code == 0
    assert out.startswith("mu = 9.86960440")
    assert "method" in out


def test_mu_rejects_diameter_beyond_myers(capsys):
    assert run(["mu", "--n", "2", "--kappa", "1", "--diameter", "4"]) == 2
    assert capsys.readouterr().out == ""


def test_mu_rejects_negative_diameter():
    assert run(["mu", "--n", "2", "--kappa", "0", "--diameter", "-1"]) == 2


def test_unknown_flag_is_a_usage_error():
    assert run(["mu", "--n", "2", "--kappa", "0", "--diameter", "1", "--bogus"]) == 2


_HELP_FLAGS = {
    "mu": ("--n", "--kappa", "--diameter", "--method", "--tol", "--format", "--out"),
    "mu-p": ("--n", "--kappa", "--diameter", "--p", "--tol", "--format", "--out"),
    "verify": ("--manifold", "--subdiv", "--grid", "--mesh", "--tol", "--seed", "--slack", "--p", "--format", "--out"),
    "sweep": ("--vary", "--from", "--to", "--steps", "--n", "--kappa", "--diameter", "--p", "--method", "--format"),
    "q-diagnostic": ("--manifold", "--radius", "--subdiv", "--grid", "--mesh", "--tol", "--seed", "--method", "--out"),
}


@pytest.mark.parametrize("command", sorted(_HELP_FLAGS))
def test_help_lists_flags(capsys, monkeypatch, command):
    monkeypatch.setenv("COLUMNS", "200")
    assert run([command, "--help"]) == 0
    out = capsys.readouterr().out
    for flag in _HELP_FLAGS[command]:
        assert flag in out
    assert "length units" in out


def test_mu_accepts_tolerance(capsys):
    code, payload = _run_json(capsys, ["mu", "--n", "2", "--kappa", "0", "--diameter", "1", "--tol", "1e-8"])
    assert code == 0
    assert payload["mu"] == pytest.approx(math.pi**2, rel=1e-7)


def test_mu_rejects_nonpositive_tolerance():
    assert run(["mu", "--n", "2", "--kappa", "0", "--diameter", "1", "--tol", "0"]) == 2


def test_mu_format_follows_out_suffix(tmp_path):
    out = tmp_path / "mu.json"
    assert run(["mu", "--n", "1", "--kappa", "0", "--diameter", "1", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["mu"] == pytest.approx(math.pi**2, rel=1e-8)


def test_mu_p_json(capsys):
    code, payload = _run_json(capsys, ["mu-p", "--n", "1", "--kappa", "0", "--diameter", "1", "--p", "3"])
    assert code == 0
    assert payload["p"] == 3
    assert payload["mu_p"] > 0


def test_mu_p_rejects_unsupported_exponent():
    assert run(["mu-p", "--n", "2", "--kappa", "0", "--diameter", "1", "--p", "20"]) == 2


# ---------------------------------------------------------------------------
# verify / q-diagnostic
# ---------------------------------------------------------------------------

def test_verify_icosphere_json(capsys):
    code, payload = _run_json(capsys, ["verify", "--manifold", "icosphere", "--subdiv", "3"])
    assert code == 0
    assert payload["verdict"] == "sharp"
    assert payload["mu_bound"] == pytest.approx(2.0, rel=1e-6)
    assert payload["solver_tolerances"]["seed"] == 0


def test_verify_interval_uses_diameter_as_length(capsys):
    code, payload = _run_json(capsys, ["verify", "--manifold", "interval", "--diameter", "2", "--grid", "200"])
    assert code == 0
    assert payload["diameter_used"] == 2
    assert payload["diameter_source"] == "analytic"
    assert payload["mu_bound"] == pytest.approx(math.pi**2 / 4, rel=1e-8)


def test_verify_csv_round_trips(capsys):
    code = run(["verify", "--manifold", "torus", "--grid", "16", "--format", "csv"])
    assert code == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert len(rows) == 1
    assert rows[0]["manifold_name"] == build_manifold("torus", grid=16).name


def test_verify_with_exponent_reports_model_only(capsys):
    code, payload = _run_json(capsys, ["verify", "--manifold", "circle", "--grid", "64", "--p", "3"])
    assert code == 0
    assert payload["verdict"] == "model_only"
    assert payload["margin"] is None


def test_verify_off_without_curvature_is_invalid(tmp_path):
    mesh = tmp_path / "tetra.off"
    mesh.write_text("OFF\n4 4 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n")
    assert run(["verify", "--manifold", "off-file", "--mesh", str(mesh)]) == 2


def test_verify_missing_mesh_file_is_invalid(tmp_path):
    assert run(["verify", "--manifold", "off-file", "--mesh", str(tmp_path / "absent.off"), "--n", "2", "--kappa", "0"]) == 2


def test_solver_failure_exits_with_one():
    with patch("eigenbound.main.verify_bound", side_effect=NoConvergence("stalled", residual=1.0)):
        assert run(["verify", "--manifold", "circle", "--grid", "16"]) == 1


def test_q_diagnostic_on_circle(capsys):
    """A mass-normalised mode on the unit circle has amplitude 1/sqrt(pi)."""
    code, payload = _run_json(capsys, ["q-diagnostic", "--manifold", "circle", "--grid", "200"])
    assert code == 0
    assert payload["max_q"] == pytest.approx(2.0 / math.sqrt(math.pi), rel=1e-3)
    assert payload["sampled"] is False


def test_q_diagnostic_on_icosphere(capsys):
    code, payload = _run_json(capsys, ["q-diagnostic", "--manifold", "icosphere", "--subdiv", "2"])
    assert code == 0
    assert payload["model_diameter"] == pytest.approx(math.pi)
    assert payload["max_q"] > 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def test_sweep_writes_csv_file(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code = run(
        ["sweep", "--vary", "D", "--from", "0.5", "--to", "2", "--steps", "4", "--format", "csv", "--out", str(out)]
    )
    assert code == 0
    assert capsys.readouterr().out == ""
    lines = out.read_text().splitlines()
    assert lines[0] == "param,mu,monotone_direction"
    assert len(lines) == 5
    assert lines[1].endswith(",start")
    assert all(line.endswith(",down") for line in lines[2:])


def test_sweep_table_from_out_suffix(tmp_path, capsys):
    out = tmp_path / "table.csv"
    argv = "sweep --vary D --from 1 --to 3 --steps 9 --n 2 --kappa 0 --out".split() + [str(out)]
    assert run(argv) == 0
    assert capsys.readouterr().out == ""
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert len(rows) == 9
    assert rows[0]["monotone_direction"] == "start"
    for row in rows:
        diameter = float(row["param"])
        assert float(row["mu"]) == pytest.approx(math.pi**2 / diameter**2, rel=1e-8)


def test_sweep_json_rows(capsys):
    code, payload = _run_json(capsys, ["sweep", "--vary", "n", "--from", "1", "--to", "3", "--steps", "3"])
    assert code == 0
    assert [row["param"] for row in payload["rows"]] == [1, 2, 3]


# ---------------------------------------------------------------------------
# main
# ---------------------------------------------------------------------------

def test_main_exits_with_run_status(monkeypatch):
    monkeypatch.setenv("EIGENBOUND_LOG_LEVEL", "debug")
    with patch("eigenbound.main.run", return_value=2) as runner, \
         patch("eigenbound.main.sys.argv", ["eigenbound", "mu"]), \
         patch("eigenbound.main.logging.basicConfig") as basic_config:
        with pytest.raises(SystemExit) as info:
            main()

    assert info.value.code == 2
    runner.assert_called_once_with(["mu"])
    assert basic_config.call_args.kwargs["level"] == "DEBUG"


def test_main_defaults_to_warning_level(monkeypatch):
    monkeypatch.delenv("EIGENBOUND_LOG_LEVEL", raising=False)
    with patch("eigenbound.main.run", return_value=0), \
         patch("eigenbound.main.sys.argv", ["eigenbound"]), \
         patch("eigenbound.main.logging.basicConfig") as basic_config:
        with pytest.raises(SystemExit):
            main()
    assert basic_config.call_args.kwargs["level"] == logging.getLevelName(logging.WARNING)
