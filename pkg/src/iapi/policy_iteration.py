"""Policy iteration with invariant admissible region updates.

Each iteration: fit the value function of the current policy by
least-squares collocation of the Lyapunov equation over a region grid,
improve the policy from the fitted gradient, shrink (or enlarge) the
region to the largest sublevel set the theory certifies, and test
convergence by the sup distance between consecutive policies on the new
region.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AdmissibilityCheckFailedError,
    DimensionMismatchError,
    NotPositiveDefiniteWarning,
)
from .model import (
    BasisSet,
    CostSpec,
    DynamicsModel,
    Policy,
    Region,
    ValueFunction,
    ValueGradientPolicy,
    closed_loop_field,
    stage_cost,
)
from .numerics import SampleGrid, grid_sample, solve_least_squares
from .region_update import enlarge_region, update_region
from .settings import IntegratorSettings, Tolerances
from .validation import is_batch

Array = np.ndarray

REGION_MODES = ("standard", "enlarge", "frozen")


# ---------------------------------------------------------------------------
# Configuration and history
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PIConfig:
    model: DynamicsModel
    cost: CostSpec
    basis: BasisSet
    initial_policy: Policy
    initial_region: Region
    epsilon: float = 1e-4
    max_iterations: int = 50
    spacing: float = 1e-2
    region_mode: str = "standard"
    upsilon: Region | None = None
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)
    tolerances: Tolerances = field(default_factory=Tolerances)
    boundary_count: int = 720
    gate_samples: int = 128

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise DimensionMismatchError("epsilon must be positive")
        if self.max_iterations < 1:
            raise DimensionMismatchError("max_iterations must be >= 1")
        if self.spacing <= 0.0:
            raise DimensionMismatchError("spacing must be positive")
        if self.region_mode not in REGION_MODES:
            raise DimensionMismatchError(f"region_mode must be one of {REGION_MODES}")
        if self.region_mode == "enlarge" and self.upsilon is None:
            raise DimensionMismatchError("enlarge mode needs an upsilon region")
        if self.basis.dim != self.model.state_dim:
            raise DimensionMismatchError("basis dimension must match the state dimension")
        if self.cost.input_dim != self.model.input_dim:
            raise DimensionMismatchError("cost weight size must match the input dimension")
        lower, _ = self.initial_region.bounding_box()
        if len(lower) != self.model.state_dim:
            raise DimensionMismatchError("initial region dimension must match the state dimension")


@dataclass(frozen=True)
class IterationRecord:
    index: int
    weights: Array
    radius: float | None          # sublevel radius; None in frozen mode
    region: Region                # the region the NEXT evaluation runs on
    policy_distance: float
    eval_rms: float               # collocation residual RMS of the fit
    hjb_rms: float                # HJB residual RMS on the next region grid
    grid_size: int
    flags: dict[str, bool]


@dataclass(frozen=True)
class PIHistory:
    basis: BasisSet
    initial_region: Region
    region_mode: str
    iterations: list[IterationRecord]
    converged: bool
    gate_passed: bool

    def value_functions(self) -> list[ValueFunction]:
        return [ValueFunction(self.basis, rec.weights) for rec in self.iterations]

    def radii(self) -> list[float | None]:
        return [rec.radius for rec in self.iterations]

    @property
    def final_weights(self) -> Array:
        return self.iterations[-1].weights

    def regions(self) -> list[Region]:
        """Region sequence: the initial region followed by each update."""
        return [self.initial_region] + [rec.region for rec in self.iterations]


# ---------------------------------------------------------------------------
# Single steps
# ---------------------------------------------------------------------------

def evaluate_policy_lsq(
    model: DynamicsModel,
    cost: CostSpec,
    basis: BasisSet,
    policy: Policy,
    grid: SampleGrid,
) -> tuple[ValueFunction, float]:
    """Least-squares collocation of the policy's Lyapunov equation.

    Minimizes sum_x (grad V(x) . closed_loop(x) + r(x, mu(x)))^2 over the
    basis weights; exact whenever the true value function lies in the
    span.  Returns the fitted value function and the residual RMS.
    """
    points = grid.points
    if points.shape[0] < basis.size:
        raise DimensionMismatchError(
            f"grid has {points.shape[0]} points but the basis needs at least {basis.size}"
        )
    actions = np.asarray(policy(points), dtype=float)
    flow = closed_loop_field(model, policy, points)
    grads = basis.feature_gradients(points)
    regressors = np.einsum("nkd,nd->nk", grads, flow)
    rhs = -np.asarray(stage_cost(cost, points, actions), dtype=float)
    solution = solve_least_squares(regressors, rhs)
    value = ValueFunction(basis, solution.weights)
    fitted = np.asarray(value(points))
    nonzero = np.any(points != 0.0, axis=1)
    if np.any(fitted[nonzero] <= 0.0):
        warnings.warn(
            "fitted value function is nonpositive at a nonzero grid point",
            NotPositiveDefiniteWarning,
            stacklevel=2,
        )
    rms = solution.residual_norm / np.sqrt(points.shape[0])
    return value, float(rms)


def improve_policy(model: DynamicsModel, cost: CostSpec, value: ValueFunction) -> ValueGradientPolicy:
    """Pointwise Hamiltonian minimizer u = -1/2 R^-1 g(x)^T grad V(x)."""
    return ValueGradientPolicy(model, cost, value)


def policy_distance(policy_a: Policy, policy_b: Policy, grid: SampleGrid) -> float:
    """sup over the grid of the Euclidean distance between the two actions."""
    ua = np.asarray(policy_a(grid.points), dtype=float)
    ub = np.asarray(policy_b(grid.points), dtype=float)
    return float(np.max(np.sqrt(np.sum((ua - ub) ** 2, axis=-1))))


def hamiltonian(model: DynamicsModel, cost: CostSpec, x, u, costate) -> float:
    """H(x, u, p) = r(x, u) + p . (drift(x) + input_matrix(x) u)."""
    p = np.asarray(costate, dtype=float)
    flow = np.asarray(model.drift(x), dtype=float) + np.asarray(model.input_matrix(x), dtype=float) @ np.asarray(u, dtype=float)
    return float(stage_cost(cost, x, u)) + float(p @ flow)


def hjb_residual(model: DynamicsModel, cost: CostSpec, value: ValueFunction, x) -> float | Array:
    """Residual of the optimality PDE at x for the candidate value function:
    Q(x) + grad V . f - 1/4 grad V . g R^-1 g^T grad V."""
    grad = value.gradient(x)
    f = np.asarray(model.drift(x), dtype=float)
    g = np.asarray(model.input_matrix(x), dtype=float)
    q = cost.state_cost(x)
    if is_batch(x):
        lin = np.einsum("nd,nd->n", grad, f)
        gtg = np.einsum("ndm,nd->nm", g, grad)
        quad = np.einsum("nm,mk,nk->n", gtg, cost.weight_inverse, gtg)
        return np.asarray(q) + lin - 0.25 * quad
    gtg = g.T @ grad
    return float(q) + float(grad @ f) - 0.25 * float(gtg @ cost.weight_inverse @ gtg)


def _lyapunov_decrease_ok(
    model: DynamicsModel,
    cost: CostSpec,
    value: ValueFunction,
    policy_next: Policy,
    points: Array,
    tau: float,
) -> bool:
    actions = np.asarray(policy_next(points), dtype=float)
    flow = closed_loop_field(model, policy_next, points)
    running = np.asarray(stage_cost(cost, points, actions), dtype=float)
    lhs = np.einsum("nd,nd->n", value.gradient(points), flow) + running
    return bool(np.all(lhs <= tau * np.maximum(1.0, running)))


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

def run_pi(config: PIConfig) -> PIHistory:
    """Run the full loop: gate the initial policy, then iterate policy
    evaluation, improvement, region update, and the convergence test."""
    from .verify import check_admissible  # circularity: verify consumes model/numerics only

    gate = check_admissible(
        config.model,
        config.cost,
        config.initial_policy,
        config.initial_region,
        n_samples=config.gate_samples,
        integrator=config.integrator,
        tolerances=config.tolerances,
    )
    if not gate.passed and config.region_mode != "frozen":
        raise AdmissibilityCheckFailedError(
            f"initial policy failed the admissibility gate: {gate.summary()}", gate
        )

    tol = config.tolerances
    policy = config.initial_policy
    region = config.initial_region
    previous_value: ValueFunction | None = None
    records: list[IterationRecord] = []
    converged = False

    for index in range(config.max_iterations):
        grid = grid_sample(region, config.spacing)
        value, eval_rms = evaluate_policy_lsq(config.model, config.cost, config.basis, policy, grid)
        policy_next = improve_policy(config.model, config.cost, value)

        if config.region_mode == "standard":
            region_next, radius = update_region(
                value, region, config.boundary_count,
                tol.boundary_tol, tol.c_floor, tol.golden_tol,
            )
        elif config.region_mode == "enlarge":
            region_next, radius = enlarge_region(
                value, region, config.upsilon, config.boundary_count,
                tol.boundary_tol, tol.c_floor, tol.golden_tol,
            )
        else:
            region_next, radius = region, None

        next_grid = grid_sample(region_next, config.spacing)
        distance = policy_distance(policy_next, policy, next_grid)
        residuals = np.asarray(hjb_residual(config.model, config.cost, value, next_grid.points))
        hjb_rms = float(np.sqrt(np.mean(residuals**2)))

        fitted = np.asarray(value(grid.points))
        nonzero = np.any(grid.points != 0.0, axis=1)
        flags = {
            "value_positive_definite": bool(np.all(fitted[nonzero] > 0.0)),
            "lyapunov_decrease": _lyapunov_decrease_ok(
                config.model, config.cost, value, policy_next, next_grid.points, tol.tau_lyap
            ),
            "admissibility_gate": bool(gate.passed),
        }
        if previous_value is None:
            flags["monotone_vs_previous"] = True
        else:
            prev = np.asarray(previous_value(next_grid.points))
            cur = np.asarray(value(next_grid.points))
            flags["monotone_vs_previous"] = bool(
                np.all(cur <= prev + tol.tau_mono * np.maximum(1.0, prev))
            )

        records.append(
            IterationRecord(
                index=index,
                weights=value.weights,
                radius=radius,
                region=region_next,
                policy_distance=distance,
                eval_rms=eval_rms,
                hjb_rms=hjb_rms,
                grid_size=len(grid),
                flags=flags,
            )
        )

        if distance < config.epsilon:
            converged = True
            break
        policy, region, previous_value = policy_next, region_next, value

    return PIHistory(
        basis=config.basis,
        initial_region=config.initial_region,
        region_mode=config.region_mode,
        iterations=records,
        converged=converged,
        gate_passed=bool(gate.passed),
    )
