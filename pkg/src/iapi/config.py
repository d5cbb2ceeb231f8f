"""Problem configuration files: schema, validation, and construction.

A problem is a strict JSON document; unknown keys are rejected everywhere
so typos fail loudly.  Expressions are parsed at load time and reported
with their JSON path on error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import exprparse
from .errors import ConfigError, DimensionMismatchError, ExprSyntaxError, IapiError
from .model import (
    Ball,
    Box,
    ExpressionPolicy,
    Region,
    cost_from_expressions,
    dynamics_from_expressions,
    monomial_basis,
)
from .policy_iteration import REGION_MODES, PIConfig
from .serialize import canonical_fingerprint
from .settings import IntegratorSettings, Tolerances

_TOP_KEYS = {
    "state_dim", "input_dim", "f", "g", "Q", "R", "mu0", "omega0",
    "basis", "pi", "integrator", "tolerances",
}
_PI_KEYS = {"epsilon", "max_iterations", "spacing", "region_mode", "upsilon"}
_INTEGRATOR_KEYS = {"h", "t_max", "delta_origin", "divergence_bound"}
_TOLERANCE_KEYS = {
    "tau_inv", "tau_lyap", "tau_mono", "tau_val", "tau_hjb",
    "tail_rel", "c_floor", "boundary_tol", "golden_tol",
}


@dataclass(frozen=True)
class ProblemConfig:
    """Validated problem document plus its canonical fingerprint."""

    raw: dict
    fingerprint: str

    def build(self) -> PIConfig:
        return _build_pi_config(self.raw)


def _reject_unknown(mapping: dict, allowed: set[str], path: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} at {path}")


def _require(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ConfigError(f"missing required key {key!r} at {path}")
    return mapping[key]


def _as_positive_number(value, path: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0:
        raise ConfigError(f"{path} must be a positive number, got {value!r}")
    return float(value)


def _as_positive_int(value, path: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ConfigError(f"{path} must be a positive integer, got {value!r}")
    return value


def _parse_expression(text, dim: int, path: str) -> None:
    if not isinstance(text, str):
        raise ConfigError(f"{path} must be an expression string, got {type(text).__name__}")
    try:
        exprparse.parse(text, dim)
    except ExprSyntaxError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _region_from(doc, dim: int, path: str) -> Region:
    if not isinstance(doc, dict):
        raise ConfigError(f"{path} must be an object")
    _reject_unknown(doc, {"box", "ball"}, path)
    if ("box" in doc) == ("ball" in doc):
        raise ConfigError(f"{path} must contain exactly one of 'box' or 'ball'")
    if "box" in doc:
        bounds = doc["box"]
        if (
            not isinstance(bounds, list)
            or len(bounds) != dim
            or any(not isinstance(b, list) or len(b) != 2 for b in bounds)
        ):
            raise ConfigError(f"{path}.box must be a list of {dim} [lower, upper] pairs")
        try:
            return Box(np.array([b[0] for b in bounds], dtype=float),
                       np.array([b[1] for b in bounds], dtype=float))
        except DimensionMismatchError as exc:
            raise ConfigError(f"{path}.box: {exc}") from exc
    ball = doc["ball"]
    if not isinstance(ball, dict):
        raise ConfigError(f"{path}.ball must be an object")
    _reject_unknown(ball, {"radius", "norm"}, f"{path}.ball")
    radius = _as_positive_number(_require(ball, "radius", f"{path}.ball"), f"{path}.ball.radius")
    norm = ball.get("norm", "inf")
    try:
        return Ball(radius, dim, norm)
    except DimensionMismatchError as exc:
        raise ConfigError(f"{path}.ball: {exc}") from exc


def validate_config(doc: dict) -> ProblemConfig:
    if not isinstance(doc, dict):
        raise ConfigError("top-level config must be a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "top level")
    n = _as_positive_int(_require(doc, "state_dim", "top level"), "state_dim")
    m = _as_positive_int(_require(doc, "input_dim", "top level"), "input_dim")

    drift = _require(doc, "f", "top level")
    if not isinstance(drift, list) or len(drift) != n:
        raise ConfigError(f"f must be a list of {n} expression strings")
    for i, text in enumerate(drift):
        _parse_expression(text, n, f"f[{i}]")

    gain = _require(doc, "g", "top level")
    if not isinstance(gain, list) or len(gain) != n or any(
        not isinstance(row, list) or len(row) != m for row in gain
    ):
        raise ConfigError(f"g must be a {n}x{m} grid of expression strings")
    for i, row in enumerate(gain):
        for j, text in enumerate(row):
            _parse_expression(text, n, f"g[{i}][{j}]")

    _parse_expression(_require(doc, "Q", "top level"), n, "Q")

    weight = _require(doc, "R", "top level")
    if not isinstance(weight, list) or len(weight) != m or any(
        not isinstance(row, list) or len(row) != m for row in weight
    ):
        raise ConfigError(f"R must be a {m}x{m} matrix of numbers")

    policy = _require(doc, "mu0", "top level")
    if not isinstance(policy, list) or len(policy) != m:
        raise ConfigError(f"mu0 must be a list of {m} expression strings")
    for i, text in enumerate(policy):
        _parse_expression(text, n, f"mu0[{i}]")

    _region_from(_require(doc, "omega0", "top level"), n, "omega0")

    basis = _require(doc, "basis", "top level")
    if not isinstance(basis, dict):
        raise ConfigError("basis must be an object")
    _reject_unknown(basis, {"monomials"}, "basis")
    monomials = _require(basis, "monomials", "basis")
    if not isinstance(monomials, dict):
        raise ConfigError("basis.monomials must be an object")
    _reject_unknown(monomials, {"min_degree", "max_degree"}, "basis.monomials")
    min_degree = _as_positive_int(monomials.get("min_degree", 2), "basis.monomials.min_degree")
    max_degree = _as_positive_int(monomials.get("max_degree", 2), "basis.monomials.max_degree")
    if min_degree < 2 or max_degree < min_degree:
        raise ConfigError("basis.monomials needs 2 <= min_degree <= max_degree")

    pi = doc.get("pi", {})
    if not isinstance(pi, dict):
        raise ConfigError("pi must be an object")
    _reject_unknown(pi, _PI_KEYS, "pi")
    if "epsilon" in pi:
        _as_positive_number(pi["epsilon"], "pi.epsilon")
    if "max_iterations" in pi:
        _as_positive_int(pi["max_iterations"], "pi.max_iterations")
    if "spacing" in pi:
        _as_positive_number(pi["spacing"], "pi.spacing")
    mode = pi.get("region_mode", "standard")
    if mode not in REGION_MODES:
        raise ConfigError(f"pi.region_mode must be one of {REGION_MODES}, got {mode!r}")
    if "upsilon" in pi:
        _region_from(pi["upsilon"], n, "pi.upsilon")
    elif mode == "enlarge":
        raise ConfigError("pi.region_mode 'enlarge' requires pi.upsilon")

    integ = doc.get("integrator", {})
    if not isinstance(integ, dict):
        raise ConfigError("integrator must be an object")
    _reject_unknown(integ, _INTEGRATOR_KEYS, "integrator")
    for key in integ:
        _as_positive_number(integ[key], f"integrator.{key}")

    tols = doc.get("tolerances", {})
    if not isinstance(tols, dict):
        raise ConfigError("tolerances must be an object")
    _reject_unknown(tols, _TOLERANCE_KEYS, "tolerances")
    for key in tols:
        _as_positive_number(tols[key], f"tolerances.{key}")

    return ProblemConfig(raw=doc, fingerprint=canonical_fingerprint(doc))


def load_config(path) -> ProblemConfig:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return validate_config(doc)


def _build_pi_config(doc: dict) -> PIConfig:
    n = doc["state_dim"]
    m = doc["input_dim"]
    try:
        model = dynamics_from_expressions(doc["f"], doc["g"], n, m)
        cost = cost_from_expressions(doc["Q"], np.asarray(doc["R"], dtype=float), n)
        initial_policy = ExpressionPolicy(doc["mu0"], n)
    except IapiError as exc:
        raise ConfigError(str(exc)) from exc
    omega0 = _region_from(doc["omega0"], n, "omega0")
    monomials = doc["basis"]["monomials"]
    basis = monomial_basis(n, monomials.get("min_degree", 2), monomials.get("max_degree", 2))

    # positive definiteness of the state cost, checked numerically on a grid
    lower, upper = omega0.bounding_box()
    axes = [np.linspace(lower[i], upper[i], 9) for i in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m_.ravel() for m_ in mesh], axis=-1)
    q_vals = np.asarray(cost.state_cost(points))
    nonzero = np.any(points != 0.0, axis=1)
    if np.any(q_vals[nonzero] <= 0.0):
        raise ConfigError("Q must be positive at nonzero sample points")

    pi = doc.get("pi", {})
    upsilon = _region_from(pi["upsilon"], n, "pi.upsilon") if "upsilon" in pi else None
    integ = doc.get("integrator", {})
    tols = doc.get("tolerances", {})
    return PIConfig(
        model=model,
        cost=cost,
        basis=basis,
        initial_policy=initial_policy,
        initial_region=omega0,
        epsilon=float(pi.get("epsilon", 1e-4)),
        max_iterations=int(pi.get("max_iterations", 50)),
        spacing=float(pi.get("spacing", 1e-2)),
        region_mode=pi.get("region_mode", "standard"),
        upsilon=upsilon,
        integrator=IntegratorSettings(**{k: float(v) for k, v in integ.items()}),
        tolerances=Tolerances(**{k: float(v) for k, v in tols.items()}),
    )


# ---------------------------------------------------------------------------
# Bundled demo problems
# ---------------------------------------------------------------------------

PAPER_EXAMPLE = {
    "state_dim": 2,
    "input_dim": 1,
    "f": ["-x1 + x2", "-(x1 + x2)/2 + x2*sin(x1)^2/2"],
    "g": [["0"], ["sin(x1)"]],
    "Q": "x1^2 + x2^2",
    "R": [[1.0]],
    "mu0": ["0"],
    "omega0": {"box": [[-1.0, 1.0], [-1.0, 1.0]]},
    "basis": {"monomials": {"min_degree": 2, "max_degree": 2}},
    "pi": {"epsilon": 1e-4, "max_iterations": 10, "spacing": 0.01, "region_mode": "standard"},
    "integrator": {"h": 1e-3, "t_max": 50.0, "delta_origin": 1e-4},
}

LQR_SCALAR = {
    "state_dim": 1,
    "input_dim": 1,
    "f": ["x1"],
    "g": [["1"]],
    "Q": "x1^2",
    "R": [[1.0]],
    "mu0": ["-2*x1"],
    "omega0": {"box": [[-1.0, 1.0]]},
    "basis": {"monomials": {"min_degree": 2, "max_degree": 2}},
    "pi": {"epsilon": 1e-9, "max_iterations": 8, "spacing": 0.01, "region_mode": "standard"},
    "integrator": {"h": 1e-3, "t_max": 50.0, "delta_origin": 1e-4},
}

DEMOS = {
    "paper-example": ("paper_example.json", PAPER_EXAMPLE),
    "lqr-scalar": ("lqr_scalar.json", LQR_SCALAR),
}
