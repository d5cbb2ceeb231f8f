"""Policy iteration for input-affine nonlinear optimal control with
invariant admissible region updates, plus simulation-based verification."""

from .errors import IapiError
from .estimator import InvariantAdmissiblePI
from .model import (
    Ball,
    BasisSet,
    Box,
    CallablePolicy,
    CostSpec,
    DynamicsModel,
    ExpressionPolicy,
    Region,
    SublevelSet,
    ValueFunction,
    ValueGradientPolicy,
    closed_loop_field,
    cost_from_expressions,
    dynamics_from_expressions,
    evaluate_value,
    evaluate_value_gradient,
    monomial_basis,
    region_contains,
    stage_cost,
)
from .numerics import (
    SampleGrid,
    StopRule,
    Termination,
    Trajectory,
    bisect_level_crossing,
    grid_sample,
    rk4_integrate,
    solve_least_squares,
    trajectory_quadrature,
)
from .policy_iteration import (
    PIConfig,
    PIHistory,
    evaluate_policy_lsq,
    hamiltonian,
    hjb_residual,
    improve_policy,
    policy_distance,
    run_pi,
)
from .region_update import (
    BoundarySampleSet,
    boundary_polyline,
    boundary_samples,
    enlarge_region,
    min_on_boundary,
    update_region,
)
from .settings import IntegratorSettings, Tolerances
from .verify import (
    CheckReport,
    Witness,
    check_admissible,
    check_invariance,
    check_lyapunov_decrease,
    check_monotone_values,
    check_value_against_cost,
    probe_states,
)

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "BasisSet",
    "BoundarySampleSet",
    "Box",
    "CallablePolicy",
    "CheckReport",
    "CostSpec",
    "DynamicsModel",
    "ExpressionPolicy",
    "IapiError",
    "IntegratorSettings",
    "InvariantAdmissiblePI",
    "PIConfig",
    "PIHistory",
    "Region",
    "SampleGrid",
    "StopRule",
    "SublevelSet",
    "Termination",
    "Tolerances",
    "Trajectory",
    "ValueFunction",
    "ValueGradientPolicy",
    "Witness",
    "bisect_level_crossing",
    "boundary_polyline",
    "boundary_samples",
    "check_admissible",
    "check_invariance",
    "check_lyapunov_decrease",
    "check_monotone_values",
    "check_value_against_cost",
    "closed_loop_field",
    "cost_from_expressions",
    "dynamics_from_expressions",
    "enlarge_region",
    "evaluate_policy_lsq",
    "evaluate_value",
    "evaluate_value_gradient",
    "grid_sample",
    "hamiltonian",
    "hjb_residual",
    "improve_policy",
    "min_on_boundary",
    "monomial_basis",
    "policy_distance",
    "probe_states",
    "region_contains",
    "rk4_integrate",
    "run_pi",
    "solve_least_squares",
    "stage_cost",
    "trajectory_quadrature",
    "update_region",
]
