"""Implicit-step root solves against an independent bisection/Brent oracle."""

import numpy as np
import pytest
from scipy import optimize

from levyem.errors import ConfigurationError, StepFailureError
from levyem.implicit import (
    ImplicitStepConfig,
    StepDiagnostics,
    bracket_halfwidth,
    implicit_residual,
    solvability_limit,
    solve_implicit_step,
    solve_implicit_steps,
)
from levyem.model import AssumptionConstants, SdeProblem
from levyem.noise import NoiseSpec
from levyem.problems import builtin_problem

ORACLE_PROBLEMS = ["paper-5.1a", "paper-5.1c", "paper-5.2", "paper-5.4"]


def _oracle_root(problem, t, c, dt):
    """Brent on the residual built directly from the drift (solver-independent)."""
    half = bracket_halfwidth(problem, t, c, dt)
    lo, hi = c - half, c + half
    func = lambda y: y - dt * float(problem.drift(t, np.array([y]))[0]) - c
    return optimize.brentq(func, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=300)


@pytest.mark.parametrize("name", ORACLE_PROBLEMS)
def test_solver_matches_brent_oracle(name):
    problem = builtin_problem(name)
    rng = np.random.default_rng(2024)
    limit = solvability_limit(problem)
    for _ in range(60):
        t = rng.uniform(0.0, problem.horizon)
        c = rng.normal(0.0, 3.0)
        dt = rng.uniform(1e-4, min(0.05, 0.5 * limit))
        y = solve_implicit_step(problem, t, c, dt)
        y_star = _oracle_root(problem, t, c, dt)
        assert abs(y - y_star) <= 1e-10 * max(1.0, abs(y_star)), (
            f"{name}: t={t:.4f} c={c:.4f} dt={dt:.6f}: {y} vs {y_star}"
        )
        r, _ = implicit_residual(problem, t, np.array([y]), np.array([c]), dt)
        assert abs(r[0]) <= 1e-12


def test_batch_equals_scalar():
    problem = builtin_problem("paper-5.4")
    rng = np.random.default_rng(5)
    t, dt = 0.37, 0.01
    c = rng.normal(0.0, 5.0, 256)
    batch = solve_implicit_steps(problem, t, c, dt)
    one_by_one = np.array([solve_implicit_step(problem, t, ci, dt) for ci in c])
    np.testing.assert_array_equal(batch, one_by_one)


def test_linear_drift_closed_form():
    # f = -2x: y = c / (1 + 2 dt), one Newton step suffices
    problem = builtin_problem("paper-5.3")
    c, dt = 7.0, 0.01
    y = solve_implicit_step(problem, 0.5, c, dt)
    assert y == pytest.approx(c / 1.02, rel=1e-14)


def test_residuals_small_across_batch():
    problem = builtin_problem("paper-5.1c")
    rng = np.random.default_rng(77)
    c = rng.normal(0.0, 4.0, 512)
    diag = StepDiagnostics()
    y = solve_implicit_steps(problem, 0.9, c, 2.0 ** -9, diagnostics=diag)
    r, _ = implicit_residual(problem, 0.9, y, c, 2.0 ** -9)
    assert np.max(np.abs(r)) <= 1e-12
    assert diag.solves == 512
    assert diag.worst_residual <= 1e-12


def test_extreme_state_accepted_at_machine_floor():
    # |r'(y*)| ~ 1e5 here, so residual 1e-12 is not representable; the
    # solver must still accept the double-precision root.
    problem = builtin_problem("paper-5.1a")
    c, dt = 1.0e6, 2.0 ** -9
    y = solve_implicit_step(problem, 0.5, c, dt)
    y_star = _oracle_root(problem, 0.5, c, dt)
    assert abs(y - y_star) <= 1e-10 * max(1.0, abs(y_star))


def test_solvability_gate():
    problem = builtin_problem("paper-5.1a")  # monotone_bound 0.7
    limit = solvability_limit(problem)
    assert limit == pytest.approx(1.0 / 0.7)
    with pytest.raises(ConfigurationError):
        solve_implicit_step(problem, 0.5, 1.0, 1.5 * limit)


def test_solvability_unbounded_for_dissipative_drift():
    problem = builtin_problem("paper-5.4")  # monotone_bound -5
    assert solvability_limit(problem) == np.inf


def test_rootless_equation_fails_loudly():
    constants = AssumptionConstants(
        H=1e9, sigma=3.0, q=10.0, M=1e9, K1=1.0, K2=1.0, gamma1=0.5, gamma2=0.5
    )
    problem = SdeProblem(
        name="no-root",
        drift=lambda t, x: x ** 2,
        x0=1000.0,
        horizon=1.0,
        noise=NoiseSpec(kind="none", brownian_dim=0),
        constants=constants,
        monotone_bound=0.0,  # wrong on purpose: x^2 is not monotone
    )
    with pytest.raises(StepFailureError):
        solve_implicit_step(problem, 0.0, 1000.0, 0.01)


def test_bracket_contains_root():
    problem = builtin_problem("paper-5.4")
    rng = np.random.default_rng(31)
    for _ in range(50):
        c = rng.normal(0.0, 20.0)
        dt = rng.uniform(1e-4, 0.1)
        half = bracket_halfwidth(problem, 1.0, c, dt)
        func = lambda y: y - dt * float(problem.drift(1.0, np.array([y]))[0]) - c
        assert func(c - half) < 0 < func(c + half)


def test_multidimensional_linear_solve():
    A = np.array([[-3.0, 1.0], [0.5, -2.0]])
    constants = AssumptionConstants(
        H=10.0, sigma=1.0, q=4.0, M=10.0, K1=4.0, K2=4.0, gamma1=0.5, gamma2=0.5
    )
    problem = SdeProblem(
        name="linear-2d",
        drift=lambda t, x: A @ x,
        x0=np.array([1.0, -1.0]),
        horizon=1.0,
        noise=NoiseSpec(kind="none", brownian_dim=0),
        constants=constants,
        monotone_bound=-1.0,
        dim=2,
        vectorized=False,
    )
    c = np.array([2.0, 3.0])
    dt = 0.05
    y = solve_implicit_step(problem, 0.0, c, dt)
    expect = np.linalg.solve(np.eye(2) - dt * A, c)
    np.testing.assert_allclose(y, expect, atol=1e-10)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        ImplicitStepConfig(abs_tol=0.0)
    with pytest.raises(ConfigurationError):
        ImplicitStepConfig(max_newton_iters=0)
