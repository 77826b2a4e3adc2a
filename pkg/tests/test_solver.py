import numpy as np
import pytest

from finslerdp import (
    ConfigurationError,
    EuclideanNorm,
    FeFunction,
    SolverConfig,
    compute_thresholds,
    minimize,
    initial_guess,
    project_to_ball,
    verify,
    w1p0F_norm,
)
from conftest import default_exponents, make_spec, positive_bump


@pytest.fixture(scope="module")
def thresholds2(cube2):
    return compute_thresholds(
        cube2, EuclideanNorm(3), default_exponents(), gamma=0.5, c=1.0,
        g_constants=(1.0, 1.0, 3.0, 1.5),
    )


@pytest.fixture(scope="module")
def solved2(cube2, thresholds2):
    spec = make_spec(cube2, lam=0.5 * thresholds2.lambda_star)
    report = minimize(spec, SolverConfig(), thresholds=thresholds2)
    return spec, report


# ------------------------------------------------------------------ components

def test_solver_config_validation():
    SolverConfig()
    with pytest.raises(ConfigurationError):
        SolverConfig(epsilon_schedule=(1e-2, 1e-1))         # not decreasing
    with pytest.raises(ConfigurationError):
        SolverConfig(epsilon_schedule=(1e-1, 0.0))          # not positive
    with pytest.raises(ConfigurationError):
        SolverConfig(backtrack=1.5)


def test_project_to_ball(cube2):
    norm = EuclideanNorm(3)
    u = FeFunction(cube2, positive_bump(cube2))
    big = u * 100.0
    proj = project_to_ball(big, 0.7, norm, 2.0)
    assert w1p0F_norm(proj, norm, 2.0) == pytest.approx(0.7, rel=1e-12)
    small = project_to_ball(u, 1e9, norm, 2.0)
    assert np.array_equal(small.coeffs, u.coeffs)


def test_initial_guess_feasible(cube2):
    spec = make_spec(cube2, lam=1.0)
    cfg = SolverConfig()
    u0 = initial_guess(spec, cfg, sigma=1.5)
    assert w1p0F_norm(u0, spec.norm, 2.0) <= 1.5 + 1e-12
    assert np.all(u0.coeffs[~cube2.interior_mask] == 0.0)
    assert np.min(u0.coeffs[cube2.interior_mask]) > 0.0


def test_minimize_needs_a_radius(cube2):
    spec = make_spec(cube2, lam=1.0)
    with pytest.raises(ConfigurationError):
        minimize(spec, SolverConfig())


# ------------------------------------------------------------------ solve

def test_minimize_converges_small(solved2):
    spec, report = solved2
    assert report.converged and report.tolerance_reached
    assert report.energy.total < 0.0
    assert report.min_interior > 0.0
    assert report.interiority_ratio < 1.0
    assert report.weak.max_abs < 1e-10 * max(1.0, report.weak.rhs_max)
    assert report.nehari < 1e-10


def test_minimize_deterministic(cube2, thresholds2):
    spec = make_spec(cube2, lam=0.5 * thresholds2.lambda_star)
    a = minimize(spec, SolverConfig(), thresholds=thresholds2)
    b = minimize(spec, SolverConfig(), thresholds=thresholds2)
    assert np.array_equal(a.coeffs, b.coeffs)
    assert a.energy.total == b.energy.total


def test_minimize_trace_structure(solved2):
    _, report = solved2
    trace = np.asarray(report.trace)
    assert trace.shape[1] == 5
    assert np.all(np.diff(trace[:, 0]) == 1.0)          # global iteration count
    eps_seen = sorted(set(trace[:, 1]), reverse=True)
    assert eps_seen[0] == 1e-1 and eps_seen[-1] == 0.0  # schedule plus polish
    assert len(report.iterations) == len(report.epsilons)


def test_minimize_explicit_sigma(cube2):
    spec = make_spec(cube2, lam=1.0)
    report = minimize(spec, SolverConfig(sigma=1.2, max_iterations=200))
    assert report.sigma == 1.2
    assert report.energy.total < 0.0


def test_solution_within_ball(solved2):
    spec, report = solved2
    u = FeFunction(spec.mesh, report.coeffs)
    assert w1p0F_norm(u, spec.norm, 2.0) <= report.sigma * (1 + 1e-12)


# ------------------------------------------------------------------ verify

def test_verify_passes_on_solution(solved2):
    spec, report = solved2
    u = FeFunction(spec.mesh, report.coeffs)
    record = verify(u, spec, report.sigma)
    assert record.passed, record.checks
    payload = record.to_json_dict()
    assert payload["passed"] is True and "checks" in payload


def test_verify_flags_scaled_solution(solved2):
    spec, report = solved2
    u = FeFunction(spec.mesh, 1.5 * report.coeffs)
    record = verify(u, spec, report.sigma)
    assert not record.checks["weak_residual"]
    assert not record.passed


def test_verify_flags_nonpositive(solved2):
    spec, report = solved2
    u = FeFunction(spec.mesh, np.zeros(spec.mesh.n_vertices))
    record = verify(u, spec, report.sigma)
    assert not record.checks["positive_interior"]
    assert record.weak is None and record.nehari is None
    assert not record.passed
