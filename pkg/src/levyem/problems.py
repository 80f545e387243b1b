"""Restricted coefficient grammar and the built-in example problems.

Custom one-dimensional problems are described by JSON-friendly dictionaries.
Each coefficient (drift, diffusion) is a sum of terms

    coeff * w(t) * x**x_power,     w(t) = signed_power((t - a) * (b - t), p),

where ``signed_power(u, p) = sign(u) * |u|**p`` is the real odd-root style
extension (the window polynomial is negative on parts of the time domain, and
fractional powers of it must stay real for every exponent in (0, 1]).  A term
without a ``time_factor`` has ``w(t) = 1``.  This covers polynomial drifts with
Hoelder-in-time prefactors, which is exactly the shape of every built-in model.

Built-in problems (keys of :data:`BUILTIN_PROBLEMS`):

=============  ==============================================================
paper-5.1a     quintic drift with rough time prefactor (exponent 1/5),
               multiplicative Brownian noise (exponent 2/5), tempered stable
               jumps with activity index 1.3
paper-5.1b     same model, jump activity index 1.5
paper-5.1c     smoother time prefactors (4/5 and 3/5), jump index 1.3
paper-5.2      quintic drift (time exponent 9/10), no Brownian term, jump
               index 1.3
paper-5.3      Ornstein-Uhlenbeck with additive symmetric 1.5-stable noise
paper-5.4      cubic dissipative drift, affine Brownian noise, additive
               tempered stable jumps; used for long-time experiments
=============  ==============================================================
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigurationError
from .model import PROBE_NAMES, AssumptionConstants, SdeProblem
from .noise import JumpLaw, NoiseSpec

__all__ = [
    "signed_power",
    "compile_terms",
    "problem_from_config",
    "builtin_problem",
    "builtin_problem_names",
    "BUILTIN_PROBLEMS",
]


def signed_power(u, p: float):
    """sign(u) * |u|**p, the real-valued odd-root extension of u**p."""
    return np.sign(u) * np.abs(u) ** p


def _parse_time_factor(spec) -> tuple[float, float, float] | None:
    if spec is None:
        return None
    try:
        a, b, p = float(spec["a"]), float(spec["b"]), float(spec["power"])
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"time_factor needs keys a, b, power: {spec!r}") from exc
    if not 0.0 < p <= 1.0:
        raise ConfigurationError(f"time_factor power must lie in (0, 1], got {p}")
    return a, b, p


def _parse_terms(terms, label: str) -> list[tuple[float, int, tuple | None]]:
    if not isinstance(terms, (list, tuple)):
        raise ConfigurationError(f"{label} must be a list of terms, got {type(terms).__name__}")
    parsed = []
    for term in terms:
        try:
            coeff = float(term["coeff"])
            x_power = int(term.get("x_power", 0))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad {label} term {term!r}") from exc
        if x_power < 0:
            raise ConfigurationError(f"{label} x_power must be >= 0, got {x_power}")
        parsed.append((coeff, x_power, _parse_time_factor(term.get("time_factor"))))
    return parsed


def compile_terms(terms, label: str = "drift"):
    """Compile a term list into broadcastable (value, derivative-in-x) callables."""
    parsed = _parse_terms(terms, label)

    def value(t, x):
        total = 0.0
        for coeff, x_power, tf in parsed:
            piece = coeff * np.power(x, x_power) if x_power else coeff * np.ones_like(np.asarray(x, dtype=float))
            if tf is not None:
                a, b, p = tf
                piece = piece * signed_power((t - a) * (b - t), p)
            total = total + piece
        return total

    def derivative(t, x):
        total = 0.0
        for coeff, x_power, tf in parsed:
            if x_power == 0:
                continue
            piece = coeff * x_power * np.power(x, x_power - 1)
            if tf is not None:
                a, b, p = tf
                piece = piece * signed_power((t - a) * (b - t), p)
            total = total + piece
        if np.isscalar(total) and not np.isscalar(x):
            return np.full_like(np.asarray(x, dtype=float), float(total))
        return total

    return value, derivative


def _parse_noise(spec: dict) -> NoiseSpec:
    if not isinstance(spec, dict):
        raise ConfigurationError("noise must be a mapping")
    spec = dict(spec)
    if "lambda" in spec:  # accept the usual name for the tempering rate
        spec["tempering"] = spec.pop("lambda")
    jump_law = spec.pop("jump_law", None)
    if jump_law is not None:
        jump_law = JumpLaw(**jump_law)
    try:
        return NoiseSpec(jump_law=jump_law, **spec)
    except TypeError as exc:
        raise ConfigurationError(f"bad noise spec: {exc}") from exc


def _parse_constants(spec: dict) -> AssumptionConstants:
    try:
        return AssumptionConstants(**spec)
    except TypeError as exc:
        raise ConfigurationError(f"bad constants block: {exc}") from exc


def problem_from_config(config: dict) -> SdeProblem:
    """Build an SdeProblem from its grammar dictionary (see module docstring)."""
    if not isinstance(config, dict):
        raise ConfigurationError("problem config must be a mapping")
    missing = {"drift", "x0", "horizon", "noise", "constants", "monotone_bound"} - set(config)
    if missing:
        raise ConfigurationError(f"problem config missing keys: {sorted(missing)}")
    dim = int(config.get("dim", 1))
    if dim != 1:
        raise ConfigurationError("the coefficient grammar only covers dim == 1")
    drift, drift_jac = compile_terms(config["drift"], "drift")
    diffusion_terms = config.get("diffusion") or []
    diffusion = compile_terms(diffusion_terms, "diffusion")[0] if diffusion_terms else None
    noise = _parse_noise(config["noise"])
    return SdeProblem(
        name=str(config.get("name", "custom")),
        drift=drift,
        drift_jacobian=drift_jac,
        diffusion=diffusion,
        x0=float(config["x0"]),
        horizon=float(config["horizon"]),
        noise=noise,
        constants=_parse_constants(config["constants"]),
        monotone_bound=float(config["monotone_bound"]),
        dim=1,
        vectorized=True,
        declared_probes=tuple(config.get("declared_probes", PROBE_NAMES)),
        source=config,
    )


def _window(power: float) -> dict:
    return {"a": 1.0, "b": 2.0, "power": power}


def _quintic_problem(name, drift_power, diff_power, jump_alpha, k1, k2, k4, bound) -> dict:
    config = {
        "name": name,
        "dim": 1,
        "drift": [
            {"coeff": 1.0, "x_power": 2, "time_factor": _window(drift_power)},
            {"coeff": -2.0, "x_power": 5},
        ],
        "x0": 1.0,
        "horizon": 1.0,
        "monotone_bound": bound,
        "constants": {
            "H": 150.0,
            "sigma": 8.0,
            "q": 18.0,
            "M": 600.0,
            "K1": k1,
            "K2": k2,
            "gamma1": drift_power,
            "gamma2": diff_power if diff_power else 0.5,
        },
        "noise": {
            "kind": "tempered_stable",
            "alpha": jump_alpha,
            "tempering": 1.0,
            "scale": 1.0,
            "brownian_dim": 1 if diff_power else 0,
            "gamma0": jump_alpha,
            "gamma_inf": 4.0,
        },
    }
    if diff_power:
        config["diffusion"] = [{"coeff": 2.0, "x_power": 1, "time_factor": _window(diff_power)}]
        config["constants"]["K4"] = k4
    return config


BUILTIN_PROBLEMS: dict[str, dict] = {
    "paper-5.1a": _quintic_problem("paper-5.1a", 0.2, 0.4, 1.3, k1=2.5, k2=5.0, k4=7.0, bound=0.7),
    "paper-5.1b": _quintic_problem("paper-5.1b", 0.2, 0.4, 1.5, k1=2.5, k2=5.0, k4=7.0, bound=0.7),
    "paper-5.1c": _quintic_problem("paper-5.1c", 0.8, 0.6, 1.3, k1=3.0, k2=5.5, k4=9.5, bound=1.2),
    "paper-5.2": _quintic_problem("paper-5.2", 0.9, None, 1.3, k1=3.0, k2=1.0, k4=None, bound=1.3),
    "paper-5.3": {
        "name": "paper-5.3",
        "dim": 1,
        "drift": [{"coeff": -2.0, "x_power": 1}],
        "x0": 10.0,
        "horizon": 2.0,
        "monotone_bound": -2.0,
        "constants": {
            "H": 4.0,
            "sigma": 1.0,
            "q": 4.0,
            "M": 1.0,
            "K1": 1.0,
            "K2": 1.0,
            "gamma1": 0.5,
            "gamma2": 0.5,
            "K3": -2.0,
            "K4": 0.5,
        },
        "noise": {
            "kind": "alpha_stable",
            "alpha": 1.5,
            "scale": 2.0,
            "brownian_dim": 0,
            "gamma0": 1.6,
            "gamma_inf": 2.0,
        },
    },
    "paper-5.4": {
        "name": "paper-5.4",
        "dim": 1,
        "drift": [
            {"coeff": -1.0, "x_power": 3},
            {"coeff": -5.0, "x_power": 1},
            {"coeff": 5.0, "x_power": 0},
        ],
        "diffusion": [
            {"coeff": -1.0, "x_power": 1},
            {"coeff": 3.0, "x_power": 0},
        ],
        "x0": 10.0,
        "horizon": 10.0,
        "monotone_bound": -5.0,
        "constants": {
            "H": 50.0,
            "sigma": 4.0,
            "q": 10.0,
            "M": 60.0,
            "K1": 1.0,
            "K2": 1.0,
            "gamma1": 0.5,
            "gamma2": 0.5,
            "K3": -5.0,
            "K4": 1.0,
        },
        "noise": {
            "kind": "tempered_stable",
            "alpha": 1.3,
            "tempering": 1.0,
            "scale": 2.0,
            "brownian_dim": 1,
            "gamma0": 1.3,
            "gamma_inf": 4.0,
        },
    },
}


def builtin_problem_names() -> list[str]:
    return sorted(BUILTIN_PROBLEMS)


def builtin_problem(name: str) -> SdeProblem:
    try:
        config = BUILTIN_PROBLEMS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown built-in problem {name!r}; available: {builtin_problem_names()}"
        ) from None
    return problem_from_config(config)
