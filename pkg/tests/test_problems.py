"""Expression-grammar parsing and the built-in problem table."""

import numpy as np
import pytest

from levyem.errors import ConfigurationError
from levyem.problems import (
    builtin_problem,
    builtin_problem_names,
    problem_from_config,
    signed_power,
)


def test_signed_power_is_odd():
    u = np.array([-8.0, -1.0, 0.0, 1.0, 8.0])
    out = signed_power(u, 1.0 / 3.0)
    np.testing.assert_allclose(out, np.array([-2.0, -1.0, 0.0, 1.0, 2.0]), atol=1e-12)
    np.testing.assert_allclose(signed_power(-u, 0.5), -signed_power(u, 0.5))


def test_builtin_catalog():
    names = builtin_problem_names()
    assert names == [
        "paper-5.1a",
        "paper-5.1b",
        "paper-5.1c",
        "paper-5.2",
        "paper-5.3",
        "paper-5.4",
    ]
    for name in names:
        problem = builtin_problem(name)
        assert problem.name == name
        assert problem.source is not None


def test_quintic_drift_formula():
    # drift = w(t) * x**2 - 2 * x**5 with w(t) = sign(u)|u|^0.2, u = (t-1)(2-t)
    problem = builtin_problem("paper-5.1a")
    t, x = 0.3, 1.7
    u = (t - 1.0) * (2.0 - t)
    expect = np.sign(u) * abs(u) ** 0.2 * x ** 2 - 2.0 * x ** 5
    assert problem.drift(t, np.array([x]))[0] == pytest.approx(expect, rel=1e-12)
    # the window is negative left of t=1, so the x^2 term flips sign there
    assert problem.drift(0.3, np.array([1.0]))[0] < problem.drift(1.5, np.array([1.0]))[0]


def test_54_drift_formula():
    problem = builtin_problem("paper-5.4")
    x = np.array([-2.0, 0.0, 1.5])
    np.testing.assert_allclose(problem.drift(0.0, x), -x ** 3 - 5.0 * x + 5.0, rtol=1e-12)
    np.testing.assert_allclose(problem.diffusion(0.0, x), -x + 3.0, rtol=1e-12)


def test_jacobian_matches_finite_differences():
    problem = builtin_problem("paper-5.1c")
    t = 1.4
    x = np.linspace(-2.0, 2.0, 9)
    h = 1e-6
    fd = (problem.drift(t, x + h) - problem.drift(t, x - h)) / (2.0 * h)
    np.testing.assert_allclose(problem.drift_jacobian(t, x), fd, rtol=1e-6, atol=1e-6)


def test_config_round_trip():
    for name in builtin_problem_names():
        problem = builtin_problem(name)
        rebuilt = problem_from_config(problem.source)
        t, x = 1.25, np.array([0.7, -1.1])
        np.testing.assert_array_equal(problem.drift(t, x), rebuilt.drift(t, x))
        if problem.diffusion is not None:
            np.testing.assert_array_equal(problem.diffusion(t, x), rebuilt.diffusion(t, x))


def test_rejects_malformed_configs():
    base = dict(builtin_problem("paper-5.3").source)

    missing = {k: v for k, v in base.items() if k != "drift"}
    with pytest.raises(ConfigurationError, match="drift"):
        problem_from_config(missing)

    bad_power = dict(base)
    bad_power["drift"] = [{"coeff": 1.0, "x_power": -1}]
    with pytest.raises(ConfigurationError):
        problem_from_config(bad_power)

    bad_window = dict(base)
    bad_window["drift"] = [
        {"coeff": 1.0, "x_power": 1, "time_factor": {"a": 0.0, "b": 1.0, "power": 1.5}}
    ]
    with pytest.raises(ConfigurationError):
        problem_from_config(bad_window)

    bad_dim = dict(base)
    bad_dim["dim"] = 2
    with pytest.raises(ConfigurationError):
        problem_from_config(bad_dim)

    bad_terms = dict(base)
    bad_terms["drift"] = "not-a-list"
    with pytest.raises(ConfigurationError):
        problem_from_config(bad_terms)


def test_tempering_lambda_alias():
    cfg = dict(builtin_problem("paper-5.4").source)
    noise = dict(cfg["noise"])
    noise["lambda"] = noise.pop("tempering")
    cfg["noise"] = noise
    problem = problem_from_config(cfg)
    assert problem.noise.tempering == 1.0


def test_unknown_builtin_name():
    with pytest.raises(ConfigurationError, match="paper-9.9"):
        builtin_problem("paper-9.9")
