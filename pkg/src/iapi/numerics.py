"""Shared dense numerical kernels.

Least squares by SVD, fixed-step classical RK4 with explicit stop
conditions, trapezoidal trajectory quadrature with an explicit truncation
tail, scalar bisection for level crossings, and deterministic lattice
sampling of regions.  Everything here is pure and deterministic: identical
inputs give bitwise identical outputs regardless of thread settings.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyGridError,
    NoBracketError,
    NonFiniteStateError,
    NumericsError,
    RankDeficientError,
    TailNotNegligibleError,
)
from .model import Region

Array = np.ndarray

RANK_TOLERANCE = 1e-10  # sigma_min/sigma_max below this is rank deficient


# ---------------------------------------------------------------------------
# Least squares
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LeastSquaresSolution:
    weights: Array
    residual_norm: float


def solve_least_squares(A, b) -> LeastSquaresSolution:
    """Minimize ||A w - b||_2 by SVD; raises RankDeficientError when
    sigma_min/sigma_max < 1e-10."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2:
        raise DimensionMismatchError(f"matrix must be 2-D, got shape {A.shape}")
    n_rows, n_cols = A.shape
    if b.shape != (n_rows,):
        raise DimensionMismatchError(f"vector must have shape ({n_rows},), got {b.shape}")
    if n_rows < n_cols:
        raise DimensionMismatchError(f"need at least {n_cols} rows, got {n_rows}")
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    if s[0] == 0.0 or s[-1] / s[0] < RANK_TOLERANCE:
        raise RankDeficientError(
            f"regressors are rank deficient (sigma ratio {0.0 if s[0] == 0.0 else s[-1] / s[0]:.3e})"
        )
    w = vt.T @ ((u.T @ b) / s)
    residual = float(np.linalg.norm(A @ w - b))
    return LeastSquaresSolution(w, residual)


# ---------------------------------------------------------------------------
# Fixed-step RK4 integration
# ---------------------------------------------------------------------------

class Termination(enum.Enum):
    REACHED_ORIGIN = "reached_origin"
    MAX_TIME = "max_time"
    LEFT_DOMAIN = "left_domain"
    DIVERGED = "diverged"


@dataclass(frozen=True)
class StopRule:
    """Stop conditions checked in priority order after every step."""

    t_max: float = 50.0
    origin_tol: float = 1e-4
    divergence_bound: float = 1e6
    domain: Region | None = None

    def __post_init__(self):
        if self.t_max <= 0.0:
            raise DimensionMismatchError("t_max must be positive")

    def classify(self, x: Array, t: float) -> Termination | None:
        if np.max(np.abs(x)) <= self.origin_tol:
            return Termination.REACHED_ORIGIN
        if t >= self.t_max - 1e-12:
            return Termination.MAX_TIME
        if self.domain is not None and not self.domain.contains(x):
            return Termination.LEFT_DOMAIN
        if np.max(np.abs(x)) > self.divergence_bound:
            return Termination.DIVERGED
        return None


@dataclass(frozen=True)
class Trajectory:
    times: Array       # (T+1,) strictly increasing, seconds
    states: Array      # (T+1, n)
    inputs: Array      # (T+1, m); m = 0 when no input recorder was given
    termination: Termination

    def __post_init__(self):
        if len(self.times) != len(self.states) or len(self.times) != len(self.inputs):
            raise DimensionMismatchError("times, states, inputs must have equal length")
        if np.any(np.diff(self.times) <= 0.0):
            raise DimensionMismatchError("times must be strictly increasing")


def rk4_step(field: Callable[[Array], Array], x: Array, h: float) -> Array:
    k1 = np.asarray(field(x), dtype=float)
    k2 = np.asarray(field(x + 0.5 * h * k1), dtype=float)
    k3 = np.asarray(field(x + 0.5 * h * k2), dtype=float)
    k4 = np.asarray(field(x + h * k3), dtype=float)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(
    field: Callable[[Array], Array],
    x0,
    h: float,
    stop: StopRule,
    input_fn: Callable[[Array], Array] | None = None,
) -> Trajectory:
    """Classical 4th-order Runge-Kutta with fixed step ``h``.

    Integrates until the first satisfied stop condition among: reached the
    origin ball, exceeded t_max, left the domain, exceeded the divergence
    bound.  ``input_fn``, when given, records the applied input at every
    stored sample.
    """
    if h <= 0.0:
        raise DimensionMismatchError("step size must be positive")
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    if x.ndim != 1 or not np.all(np.isfinite(x)):
        raise DimensionMismatchError("initial state must be a finite vector")
    states = [x.copy()]
    inputs = [np.asarray(input_fn(x), dtype=float)] if input_fn is not None else None
    steps = [0]
    term = stop.classify(x, 0.0)
    k = 0
    while term is None:
        x = rk4_step(field, x, h)
        if not np.all(np.isfinite(x)):
            raise NonFiniteStateError(f"state became non-finite at t={k * h:.6g}")
        k += 1
        states.append(x.copy())
        if inputs is not None:
            inputs.append(np.asarray(input_fn(x), dtype=float))
        steps.append(k)
        term = stop.classify(x, k * h)
    times = h * np.asarray(steps, dtype=float)
    states_arr = np.asarray(states)
    if inputs is None:
        inputs_arr = np.zeros((len(states), 0))
    else:
        inputs_arr = np.asarray(inputs)
    return Trajectory(times, states_arr, inputs_arr, term)


# ---------------------------------------------------------------------------
# Trajectory quadrature with explicit truncation tail
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureResult:
    value: float  # trapezoid integral plus the accepted tail
    tail: float   # estimated remaining cost past the stored horizon


def estimate_tail(times: Array, integrand: Array) -> float:
    """Exponentially extrapolated tail from the last decade of samples.

    Fits the decay rate between a sample ~10% of the elapsed time back and
    the final sample; raises TailNotNegligibleError when no decay can be
    certified.
    """
    t_end = float(times[-1])
    r_end = float(integrand[-1])
    if r_end == 0.0:
        return 0.0
    lag_idx = int(np.searchsorted(times, 0.9 * t_end))
    lag_idx = min(lag_idx, len(times) - 2)
    t_lag, r_lag = float(times[lag_idx]), float(integrand[lag_idx])
    if r_lag <= r_end or r_end < 0.0 or t_lag >= t_end:
        raise TailNotNegligibleError("integrand shows no certified decay for extrapolation")
    rate = math.log(r_lag / r_end) / (t_end - t_lag)
    return r_end / rate


def trajectory_quadrature(
    traj: Trajectory,
    integrand: Callable[[Array, Array], float],
    tail_bound: Callable[[Array], float] | None = None,
    tail_rel: float = 1e-6,
) -> QuadratureResult:
    """Composite trapezoid of ``integrand(x, u)`` along the trajectory.

    For a trajectory that reached the origin ball the remaining cost is
    bounded by ``tail_bound`` (a fitted value estimate) when available,
    else by exponential extrapolation; the tail must stay below
    ``tail_rel`` times the integral or TailNotNegligibleError is raised.
    """
    if traj.termination not in (Termination.REACHED_ORIGIN, Termination.MAX_TIME):
        raise DimensionMismatchError(
            f"quadrature needs a ReachedOrigin or MaxTime trajectory, got {traj.termination}"
        )
    try:
        values = np.asarray(integrand(traj.states, traj.inputs), dtype=float)
        if values.shape != (len(traj.times),):
            raise TypeError
    except Exception:
        values = np.array(
            [float(integrand(x, u)) for x, u in zip(traj.states, traj.inputs)]
        )
    total = float(np.trapezoid(values, traj.times))
    floor = max(abs(total), 1e-300)
    if traj.termination is Termination.MAX_TIME:
        if values[-1] > tail_rel * floor:
            raise TailNotNegligibleError(
                f"horizon ended at t_max with integrand {values[-1]:.3e} > {tail_rel:g} * integral"
            )
        return QuadratureResult(total, 0.0)
    if tail_bound is not None:
        tail = float(tail_bound(traj.states[-1]))
    else:
        tail = estimate_tail(traj.times, values)
    if tail > tail_rel * floor:
        raise TailNotNegligibleError(
            f"truncation tail {tail:.3e} exceeds {tail_rel:g} * integral {total:.3e}"
        )
    return QuadratureResult(total + tail, tail)


# ---------------------------------------------------------------------------
# Scalar bisection
# ---------------------------------------------------------------------------

def bisect_level_crossing(
    scalar: Callable[[float], float],
    lo: float,
    hi: float,
    target: float,
    tol: float,
) -> float:
    """Locate r with |scalar(r) - target| <= tol between a sign-changing pair.

    Plain interval halving; needs roughly log2((hi-lo)/tol) iterations for
    unit-slope functions and is capped well above that.
    """
    f_lo = scalar(lo) - target
    f_hi = scalar(hi) - target
    if abs(f_lo) <= tol:
        return lo
    if abs(f_hi) <= tol:
        return hi
    if f_lo * f_hi > 0.0:
        raise NoBracketError(
            f"no bracket: f(lo)-target={f_lo:.3e} and f(hi)-target={f_hi:.3e} share a sign"
        )
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = scalar(mid) - target
        if abs(f_mid) <= tol:
            return mid
        if f_lo * f_mid < 0.0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
    raise NumericsError(f"bisection stalled; residual {scalar(mid) - target:.3e} after 200 iterations")


# ---------------------------------------------------------------------------
# Lattice sampling of regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleGrid:
    """Origin-anchored lattice points inside a region, in index order."""

    points: Array  # (N, n)
    spacing: float
    region: Region = field(repr=False)

    def __len__(self) -> int:
        return self.points.shape[0]


def _axis_coords(lower: float, upper: float, spacing: float) -> Array:
    """Multiples of ``spacing`` within [lower, upper], clipped at the ends.

    Anchoring the lattice at the origin keeps 0 an exact sample and makes
    nested regions reuse the same lattice, so shrinking a region simply
    filters the previous grid.
    """
    k_neg = int(np.floor(-lower / spacing + 1e-9))
    k_pos = int(np.floor(upper / spacing + 1e-9))
    coords = spacing * np.arange(-k_neg, k_pos + 1, dtype=float)
    return np.clip(coords, lower, upper)


def grid_sample(region: Region, spacing: float) -> SampleGrid:
    """Axis-aligned lattice over the region bounding box, membership filtered.

    Deterministic: identical region and spacing give identical points in
    identical (row-major index) order.  The origin is always included.
    """
    if spacing <= 0.0:
        raise DimensionMismatchError("spacing must be positive")
    lower, upper = region.bounding_box()
    axes = [_axis_coords(lower[i], upper[i], spacing) for i in range(len(lower))]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    mask = np.asarray(region.contains(points))
    points = points[mask]
    if points.shape[0] == 0:
        raise EmptyGridError("no lattice point lies inside the region")
    return SampleGrid(points, spacing, region)
