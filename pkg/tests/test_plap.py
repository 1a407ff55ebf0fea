"""Tests for eigenbound.plap: the p-Laplacian model eigenvalue."""

import itertools
import logging
import math

import numpy as np
import pytest

from eigenbound.errors import ExponentOutOfSupportedRange, NearSingularWeight
from eigenbound.model import Method, PSLProblem, SLProblem, flat_mu_p
from eigenbound.plap import (
    FluxState,
    _check_exponent,
    curvature_ratio_near_origin,
    first_flux_zero,
    flux_residual,
    solve_mu_p,
)
from eigenbound.sl_solver import ShootingConfig, mu

# Looser than the default; keeps the bisection short.
_FAST = ShootingConfig(mu_tolerance=1e-9)


def _make_problem(n=2, kappa=0.0, D=1.0, p=2.0) -> PSLProblem:
    return PSLProblem(base=SLProblem(n=n, kappa=kappa, D=D), p=p)


# ---------------------------------------------------------------------------
# FluxState
# ---------------------------------------------------------------------------

def test_flux_state_recovers_slope():
    state = FluxState(s=0.1, phi=0.1, psi=4.0)
    assert state.dphi(3.0) == pytest.approx(2.0)
    assert FluxState(s=0.1, phi=0.1, psi=-4.0).dphi(3.0) == pytest.approx(-2.0)


def test_flux_state_zero_flux_has_zero_slope():
    assert FluxState(s=0.5, phi=1.0, psi=0.0).dphi(1.5) == 0.0


# ---------------------------------------------------------------------------
# first_flux_zero
# ---------------------------------------------------------------------------

def test_first_flux_zero_flat_linear_case():
    assert first_flux_zero(_make_problem(n=1, kappa=0.0, D=2.0), 1.0) == pytest.approx(math.pi / 2, rel=1e-9)


def test_first_flux_zero_at_the_pole_of_the_sphere():
    """On the round sphere the flux of sin(s) vanishes exactly where c_kappa does."""
    zero = first_flux_zero(_make_problem(n=2, kappa=1.0, D=math.pi), 2.0)
    assert zero == pytest.approx(math.pi / 2, rel=1e-6)


def test_first_flux_zero_decreases_with_mu():
    problem = _make_problem(n=3, kappa=-1.0, D=2.0, p=3.0)
    zeros = [first_flux_zero(problem, value) for value in (0.5, 1.0, 2.0, 4.0, 8.0)]
    assert all(later < earlier for earlier, later in zip(zeros, zeros[1:]))


def test_first_flux_zero_reports_infinity_when_flux_stays_positive():
    """Below the sphere's eigenvalue the flux never vanishes before c_kappa does."""
    assert first_flux_zero(_make_problem(n=2, kappa=1.0, D=math.pi), 1.0) == math.inf


def test_first_flux_zero_rejects_nonpositive_mu():
    with pytest.raises(ValueError, match="mu"):
        first_flux_zero(_make_problem(), 0.0)


# ---------------------------------------------------------------------------
# solve_mu_p
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n, kappa, D", list(itertools.product([1, 2, 3], [-1.0, 0.0, 1.0], [1.0, 2.0])))
def test_solve_mu_p_reduces_to_linear_case_at_p_two(n, kappa, D):
    linear = mu(SLProblem(n=n, kappa=kappa, D=D))
    solution = solve_mu_p(_make_problem(n=n, kappa=kappa, D=D, p=2.0), _FAST)
    assert solution.mu == pytest.approx(linear, rel=1e-6)


@pytest.mark.parametrize("p, n, D", list(itertools.product([1.2, 1.5, 2.0, 3.0, 5.0], [1, 3], [1.0, 2.0])))
def test_solve_mu_p_flat_closed_form(p, n, D):
    solution = solve_mu_p(_make_problem(n=n, kappa=0.0, D=D, p=p), _FAST)
    assert solution.mu == pytest.approx(flat_mu_p(p, D), rel=1e-5)
    assert solution.p == p
    assert solution.method is Method.SHOOTING


def test_solve_mu_p_n_one_ignores_kappa():
    values = [solve_mu_p(_make_problem(n=1, kappa=kappa, D=1.0, p=3.0), _FAST).mu for kappa in (-2.0, 0.0, 2.0)]
    for value in values:
        assert value == pytest.approx(values[0], rel=1e-7)


@pytest.mark.parametrize("t", [0.5, 2.0])
def test_solve_mu_p_scaling_law(t):
    """mu_p(kappa/t^2, tD) t^p = mu_p(kappa, D); here p = 3."""
    base = solve_mu_p(_make_problem(n=3, kappa=-1.0, D=2.0, p=3.0), _FAST).mu
    scaled = solve_mu_p(_make_problem(n=3, kappa=-1.0 / t**2, D=2.0 * t, p=3.0), _FAST).mu
    assert scaled * t**3.0 == pytest.approx(base, rel=1e-6)


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_solve_mu_p_profile_shape(p):
    problem = _make_problem(n=3, kappa=-1.0, D=2.0, p=p)
    solution = solve_mu_p(problem, _FAST)

    assert solution.grid[0] == 0.0
    assert solution.grid[-1] == pytest.approx(problem.D / 2)
    assert solution.phi[0] == 0.0
    assert solution.dphi[0] == pytest.approx(1.0)
    assert np.all(solution.phi[1:] > 0)
    # Psi has the sign of Phi' and stays positive short of D/2.
    assert np.all(solution.dphi[:-1] > 0)
    assert abs(solution.dphi[-1]) < 1e-3
    assert solution.details["bisections"] > 0


def test_solve_mu_p_refuses_near_singular_weight():
    with pytest.raises(NearSingularWeight):
        solve_mu_p(_make_problem(n=2, kappa=1.0, D=math.pi, p=3.0))


def test_solve_mu_p_rejects_exponent_outside_range():
    with pytest.raises(ExponentOutOfSupportedRange, match="p=20"):
        solve_mu_p(_make_problem(p=20.0))


def test_solve_mu_p_warns_outside_default_range(caplog):
    config = ShootingConfig(p_range=(1.01, 10.0))
    with caplog.at_level(logging.WARNING, logger="eigenbound.plap"):
        _check_exponent(_make_problem(p=1.05), config)
    assert "outside the default range" in caplog.text


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("p", [1.5, 3.0])
def test_flux_residual_is_small(p):
    problem = _make_problem(n=3, kappa=-1.0, D=2.0, p=p)
    solution = solve_mu_p(problem, _FAST)
    bound = 1e-5 * solution.mu * np.max(np.abs(solution.phi)) ** (p - 1.0)
    assert flux_residual(solution, problem) < bound


def test_curvature_ratio_matches_linear_limit():
    """For the sphere profile sin(s) the ratio is (n-1) kappa - mu = -1 everywhere."""
    ratio = curvature_ratio_near_origin(_make_problem(n=2, kappa=1.0, D=math.pi, p=2.0), 2.0, 1e-3)
    assert ratio == pytest.approx(-1.0, rel=1e-6)


def test_curvature_ratio_diverges_for_p_below_two():
    problem = _make_problem(n=1, kappa=0.0, D=1.0, p=1.5)
    coarse = curvature_ratio_near_origin(problem, 1.0, 1e-2)
    fine = curvature_ratio_near_origin(problem, 1.0, 1e-4)
    assert fine < coarse < 0
    assert fine < -100.0
