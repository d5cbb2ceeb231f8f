import math

import numpy as np
import pytest

from iapi import (
    Box,
    StopRule,
    Termination,
    ValueFunction,
    bisect_level_crossing,
    grid_sample,
    monomial_basis,
    rk4_integrate,
    solve_least_squares,
    trajectory_quadrature,
)
from iapi.errors import (
    DimensionMismatchError,
    EmptyGridError,
    NoBracketError,
    NonFiniteStateError,
    RankDeficientError,
    TailNotNegligibleError,
)
from iapi.numerics import Trajectory

UNIT_BOX = Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))


# ---------------------------------------------------------------------------
# least squares
# ---------------------------------------------------------------------------

def test_lsq_identity():
    sol = solve_least_squares(np.eye(2), np.array([1.0, 2.0]))
    assert np.allclose(sol.weights, [1.0, 2.0], atol=1e-15)
    assert sol.residual_norm == pytest.approx(0.0, abs=1e-15)


def test_lsq_mean_of_two_points():
    sol = solve_least_squares(np.array([[1.0], [1.0]]), np.array([0.0, 2.0]))
    assert sol.weights == pytest.approx([1.0], abs=1e-15)
    assert sol.residual_norm == pytest.approx(math.sqrt(2.0), rel=1e-14)


def test_lsq_exact_recovery_of_in_span_quadratic():
    basis = monomial_basis(2)
    coords = np.linspace(-1.0, 1.0, 21)
    mesh = np.meshgrid(coords, coords, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    regressors = basis.features(pts)
    target = 0.5 * pts[:, 0] ** 2 + 1.0 * pts[:, 1] ** 2
    sol = solve_least_squares(regressors, target)
    assert np.max(np.abs(sol.weights - [0.5, 0.0, 1.0])) <= 1e-12
    assert sol.residual_norm <= 1e-12


def test_lsq_normal_equations_hold():
    rng = np.random.default_rng(11)
    A = rng.normal(size=(50, 4))
    b = rng.normal(size=50)
    sol = solve_least_squares(A, b)
    lhs = A.T @ A @ sol.weights
    rhs = A.T @ b
    assert np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(rhs))) <= 1e-8


def test_lsq_rank_deficient():
    A = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    with pytest.raises(RankDeficientError):
        solve_least_squares(A, np.array([1.0, 2.0, 3.0]))


def test_lsq_underdetermined_rejected():
    with pytest.raises(DimensionMismatchError):
        solve_least_squares(np.ones((1, 2)), np.array([1.0]))


# ---------------------------------------------------------------------------
# RK4
# ---------------------------------------------------------------------------

def decay(x):
    return -x


def test_rk4_exponential_decay():
    stop = StopRule(t_max=1.0, origin_tol=1e-12)
    traj = rk4_integrate(decay, np.array([1.0]), 0.01, stop)
    assert traj.termination is Termination.MAX_TIME
    assert traj.states[-1, 0] == pytest.approx(math.exp(-1.0), abs=1e-8)


def test_rk4_constant_field():
    stop = StopRule(t_max=0.5, origin_tol=1e-12)
    traj = rk4_integrate(lambda x: np.zeros_like(x), np.array([3.0, -2.0]), 0.01, stop)
    assert np.all(traj.states == traj.states[0])


def test_rk4_fourth_order_convergence():
    stop = StopRule(t_max=1.0, origin_tol=1e-15)
    exact = math.exp(-1.0)
    errors = {}
    for h in (0.02, 0.01):
        traj = rk4_integrate(decay, np.array([1.0]), h, stop)
        errors[h] = abs(traj.states[-1, 0] - exact)
    ratio = errors[0.02] / errors[0.01]
    assert ratio >= 14.0
    assert 12.0 <= ratio <= 20.0


def test_rk4_reaches_origin():
    stop = StopRule(t_max=50.0, origin_tol=1e-4)
    traj = rk4_integrate(decay, np.array([1.0]), 1e-3, stop)
    assert traj.termination is Termination.REACHED_ORIGIN
    assert np.max(np.abs(traj.states[-1])) <= 1e-4
    # analytic reach time of e^{-t}: ln(1e4)
    assert traj.times[-1] == pytest.approx(math.log(1e4), abs=1e-2)


def test_rk4_divergence_stop():
    stop = StopRule(t_max=50.0, divergence_bound=1e3)
    traj = rk4_integrate(lambda x: x, np.array([1.0]), 1e-2, stop)
    assert traj.termination is Termination.DIVERGED


def test_rk4_domain_exit():
    stop = StopRule(t_max=50.0, domain=Box(np.array([-2.0]), np.array([2.0])))
    traj = rk4_integrate(lambda x: x, np.array([1.0]), 1e-2, stop)
    assert traj.termination is Termination.LEFT_DOMAIN
    assert abs(traj.states[-1, 0]) > 2.0


def test_rk4_non_finite_field():
    def bad(x):
        return x * np.inf

    with pytest.raises(NonFiniteStateError):
        rk4_integrate(bad, np.array([1.0]), 1e-2, StopRule(t_max=1.0))


def test_rk4_times_strictly_increasing():
    stop = StopRule(t_max=0.1, origin_tol=1e-12)
    traj = rk4_integrate(decay, np.array([1.0]), 1e-3, stop)
    assert np.all(np.diff(traj.times) > 0)
    assert len(traj.times) == len(traj.states)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def test_quadrature_zero_integrand():
    stop = StopRule(t_max=1.0, origin_tol=1e-12)
    traj = rk4_integrate(decay, np.array([1.0]), 0.01, stop)
    result = trajectory_quadrature(traj, lambda x, u: 0.0)
    assert result.value == 0.0
    assert result.tail == 0.0


def test_quadrature_scalar_lqr_closed_form():
    # xdot = x + u, u = -(1+sqrt 2) x, r = x^2 + u^2; J(1) = 1 + sqrt 2
    gain = 1.0 + math.sqrt(2.0)

    def field(x):
        return x - gain * x

    stop = StopRule(t_max=50.0, origin_tol=1e-4)
    traj = rk4_integrate(field, np.array([1.0]), 1e-3, stop, input_fn=lambda x: -gain * x)
    result = trajectory_quadrature(traj, lambda x, u: float(x @ x + u @ u))
    assert result.value == pytest.approx(gain, abs=1e-4)
    assert result.tail <= 1e-6 * result.value


def test_quadrature_benchmark_probe_matches_optimal_value():
    # closed loop under the optimal policy from (0.5, 0.5); J = V*(x0) = 0.375
    def field(x):
        x1, x2 = x
        u = -x2 * math.sin(x1)
        return np.array([-x1 + x2, -(x1 + x2) / 2 + x2 * math.sin(x1) ** 2 / 2 + math.sin(x1) * u])

    def input_fn(x):
        return np.array([-x[1] * math.sin(x[0])])

    stop = StopRule(t_max=50.0, origin_tol=1e-4)
    traj = rk4_integrate(field, np.array([0.5, 0.5]), 1e-3, stop, input_fn=input_fn)
    result = trajectory_quadrature(traj, lambda x, u: float(x @ x + u @ u))
    assert result.value == pytest.approx(0.375, abs=1e-3)


def test_quadrature_rejects_maxtime_with_large_integrand():
    stop = StopRule(t_max=0.5, origin_tol=1e-12)
    traj = rk4_integrate(decay, np.array([1.0]), 0.01, stop)
    with pytest.raises(TailNotNegligibleError):
        trajectory_quadrature(traj, lambda x, u: float(x @ x))


def test_quadrature_nonnegative_and_monotone_in_prefix():
    stop = StopRule(t_max=2.0, origin_tol=1e-12)
    traj = rk4_integrate(decay, np.array([1.0]), 0.01, stop)
    integrand = lambda x, u: float(x @ x)
    values = [0.5 * 0.01 * sum(
        float(traj.states[k] @ traj.states[k]) + float(traj.states[k + 1] @ traj.states[k + 1])
        for k in range(m)
    ) for m in (50, 100, 150)]
    assert values[0] <= values[1] <= values[2]
    assert all(v >= 0 for v in values)


def test_quadrature_tail_bound_used():
    stop = StopRule(t_max=50.0, origin_tol=1e-2)
    traj = rk4_integrate(decay, np.array([1.0]), 1e-3, stop)
    # remaining cost of x^2 after reaching a: a^2/2; the bound callable supplies it
    result = trajectory_quadrature(
        traj, lambda x, u: float(x @ x), tail_bound=lambda x: float(x @ x) / 2.0, tail_rel=1e-3
    )
    assert result.value == pytest.approx(0.5, abs=1e-4)
    assert result.tail == pytest.approx(1e-4 / 2.0, rel=1e-2)


def test_quadrature_requires_terminated_trajectory():
    times = np.array([0.0, 0.1])
    states = np.zeros((2, 1))
    inputs = np.zeros((2, 0))
    traj = Trajectory(times, states, inputs, Termination.DIVERGED)
    with pytest.raises(DimensionMismatchError):
        trajectory_quadrature(traj, lambda x, u: 0.0)


# ---------------------------------------------------------------------------
# bisection
# ---------------------------------------------------------------------------

def test_bisect_square_root():
    r = bisect_level_crossing(lambda r: r * r, 0.0, 1.0, 0.25, 1e-10)
    assert r == pytest.approx(0.5, abs=1e-5)


def test_bisect_ellipse_semi_axis():
    # V = x1^2/2 + x2^2 along the ray (0, 1); level 0.5 crossed at sqrt(0.5)
    value_along = lambda r: r * r
    r = bisect_level_crossing(value_along, 0.0, 2.0, 0.5, 1e-12)
    assert r == pytest.approx(math.sqrt(0.5), abs=1e-8)


def test_bisect_no_bracket():
    with pytest.raises(NoBracketError):
        bisect_level_crossing(lambda r: 1.0, 0.0, 1.0, 2.0, 1e-10)


def test_bisect_endpoint_hit():
    assert bisect_level_crossing(lambda r: r, 0.5, 1.0, 0.5, 1e-12) == 0.5


# ---------------------------------------------------------------------------
# grid sampling
# ---------------------------------------------------------------------------

def test_grid_coarse_lattice_count():
    grid = grid_sample(UNIT_BOX, 1.0)
    assert len(grid) == 9


def test_grid_benchmark_resolution_count():
    grid = grid_sample(UNIT_BOX, 0.01)
    assert len(grid) == 201 * 201


def test_grid_contains_origin_exactly():
    grid = grid_sample(UNIT_BOX, 0.37)
    assert any(np.all(p == 0.0) for p in grid.points)


def test_grid_corners_exact():
    grid = grid_sample(UNIT_BOX, 0.01)
    corners = {(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)}
    present = {tuple(p) for p in grid.points if np.max(np.abs(p)) == 1.0 and np.min(np.abs(p)) == 1.0}
    assert corners <= present


def test_grid_sublevel_filter():
    from iapi import SublevelSet

    v = ValueFunction(monomial_basis(2), np.array([0.5, 0.0, 1.0]))
    sub = SublevelSet(v, 0.5, parent=UNIT_BOX)
    grid = grid_sample(sub, 0.01)
    assert np.all(np.asarray(v(grid.points)) <= 0.5)
    assert len(grid) > 0


def test_grid_deterministic_order():
    a = grid_sample(UNIT_BOX, 0.1)
    b = grid_sample(UNIT_BOX, 0.1)
    assert a.points.shape == b.points.shape
    assert np.all(a.points == b.points)


def test_grid_rejects_nonpositive_spacing():
    with pytest.raises(DimensionMismatchError):
        grid_sample(UNIT_BOX, 0.0)


def test_grid_empty_unreachable_but_guarded():
    # the origin is always a lattice point inside every valid region,
    # so EmptyGridError only fires for malformed regions; simulate one
    class Hollow:
        def bounding_box(self):
            return np.array([-1.0]), np.array([1.0])

        def contains(self, x):
            x = np.atleast_2d(x)
            return np.zeros(x.shape[0], dtype=bool)

    with pytest.raises(EmptyGridError):
        grid_sample(Hollow(), 0.5)
