import math

import numpy as np
import pytest

from iapi import (
    Box,
    ExpressionPolicy,
    PIConfig,
    ValueFunction,
    cost_from_expressions,
    dynamics_from_expressions,
    evaluate_policy_lsq,
    grid_sample,
    hamiltonian,
    hjb_residual,
    improve_policy,
    monomial_basis,
    policy_distance,
    run_pi,
)
from iapi.errors import AdmissibilityCheckFailedError, DimensionMismatchError

UNIT_BOX = Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
UNIT_INTERVAL = Box(np.array([-1.0]), np.array([1.0]))


@pytest.fixture(scope="module")
def benchmark():
    model = dynamics_from_expressions(
        ["-x1 + x2", "-(x1 + x2)/2 + x2*sin(x1)^2/2"],
        [["0"], ["sin(x1)"]],
        2,
        1,
    )
    cost = cost_from_expressions("x1^2 + x2^2", [[1.0]], 2)
    return model, cost, monomial_basis(2)


@pytest.fixture(scope="module")
def scalar_lqr():
    model = dynamics_from_expressions(["x1"], [["1"]], 1, 1)
    cost = cost_from_expressions("x1^2", [[1.0]], 1)
    return model, cost, monomial_basis(1)


def newton_kleinman_sequence(p0: float, steps: int) -> list[float]:
    """Hand-rolled oracle for a=b=q=r=1: value of the policy u = -p x is
    w x^2 with 2 w (1 - p) = -(1 + p^2); the improved policy gain is w."""
    weights = []
    p = p0
    for _ in range(steps):
        w = (1.0 + p * p) / (2.0 * (p - 1.0))
        weights.append(w)
        p = w
    return weights


# ---------------------------------------------------------------------------
# policy evaluation
# ---------------------------------------------------------------------------

def test_evaluate_optimal_policy_recovers_optimal_value(benchmark):
    model, cost, basis = benchmark
    mu_star = ExpressionPolicy(["-x2*sin(x1)"], 2)
    grid = grid_sample(UNIT_BOX, 0.05)
    value, rms = evaluate_policy_lsq(model, cost, basis, mu_star, grid)
    assert np.max(np.abs(value.weights - [0.5, 0.0, 1.0])) <= 1e-8
    assert rms <= 1e-10


def test_evaluate_scalar_lqr_closed_form(scalar_lqr):
    model, cost, basis = scalar_lqr
    mu = ExpressionPolicy(["-2*x1"], 1)
    grid = grid_sample(UNIT_INTERVAL, 0.01)
    value, rms = evaluate_policy_lsq(model, cost, basis, mu, grid)
    assert value.weights[0] == pytest.approx(2.5, abs=1e-12)
    assert rms <= 1e-12


def test_evaluate_requires_enough_points(scalar_lqr):
    model, cost, basis = scalar_lqr
    mu = ExpressionPolicy(["-2*x1"], 1)

    class EmptyGrid:
        points = np.zeros((0, 1))

    with pytest.raises(DimensionMismatchError):
        evaluate_policy_lsq(model, cost, basis, mu, EmptyGrid())


# ---------------------------------------------------------------------------
# policy improvement
# ---------------------------------------------------------------------------

def test_improved_policy_vanishes_at_origin(benchmark):
    model, cost, basis = benchmark
    value = ValueFunction(basis, np.array([0.37, -0.81, 2.2]))
    mu = improve_policy(model, cost, value)
    assert np.all(mu(np.zeros(2)) == 0.0)


def test_improved_policy_recovers_optimal_feedback(benchmark):
    model, cost, basis = benchmark
    value = ValueFunction(basis, np.array([0.5, 0.0, 1.0]))
    mu = improve_policy(model, cost, value)
    x = np.array([math.pi / 2, 1.0])
    # g^T grad V = sin(pi/2) * 2 x2 = 2, so u = -1; symbolically u = -x2 sin x1
    assert mu(x) == pytest.approx([-1.0], abs=1e-15)
    for point in [(0.3, -0.7), (1.0, 1.0), (-0.2, 0.5)]:
        arr = np.array(point)
        assert mu(arr) == pytest.approx([-arr[1] * math.sin(arr[0])], abs=1e-14)


def test_improvement_then_evaluation_is_newton_step(scalar_lqr):
    model, cost, basis = scalar_lqr
    value = ValueFunction(basis, np.array([2.5]))
    mu = improve_policy(model, cost, value)
    assert mu(np.array([1.0])) == pytest.approx([-2.5], abs=1e-15)
    grid = grid_sample(UNIT_INTERVAL, 0.01)
    next_value, _ = evaluate_policy_lsq(model, cost, basis, mu, grid)
    assert next_value.weights[0] == pytest.approx(29.0 / 12.0, abs=1e-12)


# ---------------------------------------------------------------------------
# policy distance
# ---------------------------------------------------------------------------

def test_distance_identical_policies(benchmark):
    model, cost, basis = benchmark
    mu = ExpressionPolicy(["-x2*sin(x1)"], 2)
    grid = grid_sample(UNIT_BOX, 0.25)
    assert policy_distance(mu, mu, grid) == 0.0


def test_distance_zero_vs_optimal_attained_at_corner(benchmark):
    grid = grid_sample(UNIT_BOX, 0.25)
    zero = ExpressionPolicy(["0"], 2)
    mu_star = ExpressionPolicy(["-x2*sin(x1)"], 2)
    # max |x2 sin x1| over the lattice sits at the exact corners (+-1, +-1)
    assert policy_distance(zero, mu_star, grid) == pytest.approx(math.sin(1.0), abs=1e-15)


def test_distance_on_origin_only_grid(benchmark):
    class OriginGrid:
        points = np.zeros((1, 2))

    zero = ExpressionPolicy(["0"], 2)
    mu_star = ExpressionPolicy(["-x2*sin(x1)"], 2)
    assert policy_distance(zero, mu_star, OriginGrid()) == 0.0


# ---------------------------------------------------------------------------
# Hamiltonian and optimality residual
# ---------------------------------------------------------------------------

def test_hamiltonian_zero_costate_is_stage_cost(benchmark):
    model, cost, _ = benchmark
    x = np.array([0.3, -0.4])
    u = np.array([0.2])
    assert hamiltonian(model, cost, x, u, np.zeros(2)) == pytest.approx(
        0.3**2 + 0.4**2 + 0.2**2, abs=1e-15
    )


def test_hamiltonian_zero_at_equilibrium(benchmark):
    model, cost, _ = benchmark
    assert hamiltonian(model, cost, np.zeros(2), np.zeros(1), np.array([3.0, -7.0])) == 0.0


def test_hamiltonian_benchmark_point(benchmark):
    model, cost, _ = benchmark
    x = np.array([0.5, 0.5])
    value = hamiltonian(model, cost, x, np.zeros(1), np.array([1.0, 1.0]))
    # r = 0.5; f = (0, -0.5 + 0.25 sin^2 0.5); H = 0.5 + f1 + f2
    expected = 0.5 + 0.0 + (-0.5 + 0.25 * math.sin(0.5) ** 2)
    assert value == pytest.approx(expected, abs=1e-15)
    assert value == pytest.approx(0.25 * math.sin(0.5) ** 2, abs=1e-15)


def test_hjb_residual_zero_at_origin(benchmark):
    model, cost, basis = benchmark
    value = ValueFunction(basis, np.array([1.3, 0.4, 0.9]))
    assert hjb_residual(model, cost, value, np.zeros(2)) == 0.0


def test_hjb_residual_vanishes_for_optimal_value(benchmark):
    model, cost, basis = benchmark
    v_star = ValueFunction(basis, np.array([0.5, 0.0, 1.0]))
    rng = np.random.default_rng(5)
    pts = rng.uniform(-1.0, 1.0, size=(100, 2))
    residuals = np.asarray(hjb_residual(model, cost, v_star, pts))
    assert np.max(np.abs(residuals)) <= 1e-12


def test_hjb_residual_nonoptimal_value_by_direct_formula(benchmark):
    model, cost, basis = benchmark
    v = ValueFunction(basis, np.array([1.0, 0.0, 1.0]))
    x = np.array([1.0, 0.0])
    # grad V = (2, 0); f = (-1, -0.5); Q = 1; g^T grad V = 0
    assert hjb_residual(model, cost, v, x) == pytest.approx(1.0 - 2.0, abs=1e-15)


# ---------------------------------------------------------------------------
# the driver
# ---------------------------------------------------------------------------

def test_run_pi_scalar_lqr_matches_newton_kleinman(scalar_lqr):
    model, cost, basis = scalar_lqr
    config = PIConfig(
        model=model,
        cost=cost,
        basis=basis,
        initial_policy=ExpressionPolicy(["-2*x1"], 1),
        initial_region=UNIT_INTERVAL,
        epsilon=1e-9,
        max_iterations=8,
        spacing=0.01,
    )
    history = run_pi(config)
    assert history.converged
    assert len(history.iterations) <= 8
    optimum = 1.0 + math.sqrt(2.0)
    assert abs(history.final_weights[0] - optimum) <= 1e-8
    oracle = newton_kleinman_sequence(2.0, len(history.iterations))
    for rec, expected in zip(history.iterations, oracle):
        assert abs(rec.weights[0] - expected) <= 1e-10
    # radii equal the weights here: the box boundary {-1, 1} has V = w
    for rec in history.iterations:
        assert rec.radius == pytest.approx(rec.weights[0], abs=1e-9)
    radii = [rec.radius for rec in history.iterations]
    assert all(b <= a + 1e-12 for a, b in zip(radii, radii[1:]))


def test_run_pi_epsilon_inf_stops_after_one_iteration(scalar_lqr):
    model, cost, basis = scalar_lqr
    config = PIConfig(
        model=model,
        cost=cost,
        basis=basis,
        initial_policy=ExpressionPolicy(["-2*x1"], 1),
        initial_region=UNIT_INTERVAL,
        epsilon=math.inf,
        max_iterations=50,
        spacing=0.01,
    )
    history = run_pi(config)
    assert history.converged
    assert len(history.iterations) == 1


def test_run_pi_rejects_inadmissible_initial_policy(scalar_lqr):
    model, cost, basis = scalar_lqr
    destabilizing = ExpressionPolicy(["x1"], 1)  # u = x makes xdot = 2x
    config = PIConfig(
        model=model,
        cost=cost,
        basis=basis,
        initial_policy=destabilizing,
        initial_region=UNIT_INTERVAL,
        spacing=0.01,
    )
    with pytest.raises(AdmissibilityCheckFailedError):
        run_pi(config)


def test_run_pi_frozen_mode_keeps_region(scalar_lqr):
    model, cost, basis = scalar_lqr
    config = PIConfig(
        model=model,
        cost=cost,
        basis=basis,
        initial_policy=ExpressionPolicy(["-2*x1"], 1),
        initial_region=UNIT_INTERVAL,
        epsilon=1e-9,
        max_iterations=6,
        spacing=0.01,
        region_mode="frozen",
    )
    history = run_pi(config)
    assert history.converged
    assert all(rec.radius is None for rec in history.iterations)
    assert all(rec.region is UNIT_INTERVAL for rec in history.iterations)


def test_run_pi_fixed_point_has_small_hjb_residual(scalar_lqr):
    model, cost, basis = scalar_lqr
    config = PIConfig(
        model=model,
        cost=cost,
        basis=basis,
        initial_policy=ExpressionPolicy(["-2*x1"], 1),
        initial_region=UNIT_INTERVAL,
        epsilon=1e-12,
        max_iterations=12,
        spacing=0.01,
    )
    history = run_pi(config)
    assert history.converged
    assert history.iterations[-1].hjb_rms <= 1e-6


def test_run_pi_enlarge_mode(scalar_lqr):
    model, cost, basis = scalar_lqr
    wide = Box(np.array([-2.0]), np.array([2.0]))
    config = PIConfig(
        model=model,
        cost=cost,
        basis=basis,
        initial_policy=ExpressionPolicy(["-2*x1"], 1),
        initial_region=UNIT_INTERVAL,
        epsilon=1e-9,
        max_iterations=8,
        spacing=0.01,
        region_mode="enlarge",
        upsilon=wide,
    )
    history = run_pi(config)
    assert history.converged
    # alpha* = min over {-2, 2} of w x^2 = 4 w, four times the standard radius
    first = history.iterations[0]
    assert first.radius == pytest.approx(4.0 * first.weights[0], abs=1e-8)


def test_run_pi_monotone_flags_on_benchmark(benchmark):
    model, cost, basis = benchmark
    config = PIConfig(
        model=model,
        cost=cost,
        basis=basis,
        initial_policy=ExpressionPolicy(["0"], 2),
        initial_region=UNIT_BOX,
        epsilon=1e-4,
        max_iterations=10,
        spacing=0.05,
    )
    history = run_pi(config)
    assert history.converged
    for rec in history.iterations:
        assert rec.flags["value_positive_definite"]
        assert rec.flags["monotone_vs_previous"]
        assert rec.flags["lyapunov_decrease"]


def test_config_validation():
    model = dynamics_from_expressions(["x1"], [["1"]], 1, 1)
    cost = cost_from_expressions("x1^2", [[1.0]], 1)
    with pytest.raises(DimensionMismatchError):
        PIConfig(model, cost, monomial_basis(1), ExpressionPolicy(["0"], 1), UNIT_INTERVAL, epsilon=0.0)
    with pytest.raises(DimensionMismatchError):
        PIConfig(model, cost, monomial_basis(2), ExpressionPolicy(["0"], 1), UNIT_INTERVAL)
    with pytest.raises(DimensionMismatchError):
        PIConfig(model, cost, monomial_basis(1), ExpressionPolicy(["0"], 1), UNIT_INTERVAL, region_mode="enlarge")
