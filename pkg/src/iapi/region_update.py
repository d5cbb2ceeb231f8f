"""Invariant admissible region update: boundary geometry and sublevel radii.

The next region is the largest sublevel set of the fitted value function
that stays inside the current region: its radius is the minimum of the
value function over the current boundary.  Boundaries are sampled along
box edges or along rays from the origin located by bisection; the minimum
is refined by one golden-section pass along the boundary parameterization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._threads import ordered_map
from .errors import (
    ContainmentViolatedError,
    DimensionMismatchError,
    NonPositiveMinimumError,
    RayEscapedParentError,
    RegionCollapsedError,
    UnsupportedDimensionError,
)
from .model import Ball, Box, Region, SublevelSet, ValueFunction
from .numerics import bisect_level_crossing

Array = np.ndarray

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0

DEFAULT_RAYS = 720
DEFAULT_BOUNDARY_TOL = 1e-8
DEFAULT_GOLDEN_TOL = 1e-10
DEFAULT_RADIUS_FLOOR = 1e-6


@dataclass(frozen=True)
class BoundarySampleSet:
    """Points on a region boundary with their 1-D parameterization.

    ``point_at`` maps a parameter in [0, period) back onto the boundary,
    which lets the minimizer refine between discrete samples.  For state
    dimension >= 3 there is no 1-D parameterization and ``point_at`` is
    None (discrete minimum only).
    """

    points: Array                                # (N, n)
    params: Array                                # (N,)
    period: float
    method: str                                  # "box-edges" | "radial-bisection"
    tol: float
    point_at: Callable[[float], Array] | None = field(repr=False, default=None)

    def __len__(self) -> int:
        return self.points.shape[0]


# ---------------------------------------------------------------------------
# Direction sets for radial sampling
# ---------------------------------------------------------------------------

def _halton(index: int, base: int) -> float:
    out, f = 0.0, 1.0
    while index > 0:
        f /= base
        out += f * (index % base)
        index //= base
    return out


_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29)


def ray_directions(dim: int, count: int) -> Array:
    """Deterministic unit directions: signs (1-D), uniform angles (2-D),
    normalized Halton points otherwise."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        theta = 2.0 * np.pi * np.arange(count) / count
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    dirs = []
    index = 1
    while len(dirs) < count:
        point = np.array([2.0 * _halton(index, _PRIMES[i % len(_PRIMES)]) - 1.0 for i in range(dim)])
        norm = np.linalg.norm(point)
        if norm > 1e-3:
            dirs.append(point / norm)
        index += 1
    return np.asarray(dirs)


# ---------------------------------------------------------------------------
# Boundary sampling
# ---------------------------------------------------------------------------

def _box_bounds(region: Box | Ball) -> tuple[Array, Array]:
    lower, upper = region.bounding_box()
    return np.asarray(lower, dtype=float), np.asarray(upper, dtype=float)


def _box_perimeter_point(lower: Array, upper: Array, t: float) -> Array:
    """2-D box perimeter, counterclockwise from (lower, lower), arc length t."""
    w = upper[0] - lower[0]
    h = upper[1] - lower[1]
    perimeter = 2.0 * (w + h)
    t = t % perimeter
    if t < w:
        return np.array([lower[0] + t, lower[1]])
    t -= w
    if t < h:
        return np.array([upper[0], lower[1] + t])
    t -= h
    if t < w:
        return np.array([upper[0] - t, upper[1]])
    t -= w
    return np.array([lower[0], upper[1] - t])


def _box_boundary(region: Box | Ball, count: int, tol: float) -> BoundarySampleSet:
    lower, upper = _box_bounds(region)
    dim = len(lower)
    if dim == 1:
        points = np.array([[lower[0]], [upper[0]]])
        return BoundarySampleSet(points, np.array([0.0, 1.0]), 2.0, "box-edges", tol)
    if dim == 2:
        w = upper[0] - lower[0]
        h = upper[1] - lower[1]
        perimeter = 2.0 * (w + h)
        # count points per edge, half-open so corners appear exactly once
        params = np.concatenate(
            [
                np.arange(count) / count * w,
                w + np.arange(count) / count * h,
                w + h + np.arange(count) / count * w,
                2 * w + h + np.arange(count) / count * h,
            ]
        )
        points = np.array([_box_perimeter_point(lower, upper, t) for t in params])
        return BoundarySampleSet(
            points,
            params,
            perimeter,
            "box-edges",
            tol,
            point_at=lambda t: _box_perimeter_point(lower, upper, t),
        )
    # n >= 3: lattice on each face, no 1-D parameterization
    per_axis = max(2, int(np.ceil(count ** (1.0 / (dim - 1)))))
    face_points = []
    for axis in range(dim):
        others = [i for i in range(dim) if i != axis]
        axes = [np.linspace(lower[i], upper[i], per_axis, endpoint=False) for i in others]
        mesh = np.meshgrid(*axes, indexing="ij")
        flat = np.stack([m.ravel() for m in mesh], axis=-1)
        for bound in (lower[axis], upper[axis]):
            pts = np.empty((flat.shape[0], dim))
            pts[:, others] = flat
            pts[:, axis] = bound
            face_points.append(pts)
    points = np.concatenate(face_points, axis=0)
    return BoundarySampleSet(points, np.arange(len(points), dtype=float), float(len(points)), "box-edges", tol)


def _root_box_exit(region: Region, direction: Array) -> float:
    """Radius where a ray from the origin exits the root bounding box."""
    lower, upper = region.bounding_box()
    r = np.inf
    for i, d in enumerate(direction):
        if d > 0.0:
            r = min(r, upper[i] / d)
        elif d < 0.0:
            r = min(r, lower[i] / d)
    return float(r)


def _ray_crossing(region: SublevelSet, direction: Array, tol: float) -> Array:
    """Boundary point where V(r * direction) = level, inside the parent."""
    value, level = region.value, region.level
    r_exit = _root_box_exit(region, direction)

    def along(r: float) -> float:
        return float(value(r * direction))

    hi = min(0.1, r_exit)
    while along(hi) < level:
        if hi >= r_exit:
            raise RayEscapedParentError(
                f"level {level:g} not reached inside the bounding box along direction {direction}"
            )
        hi = min(2.0 * hi, r_exit)
    r_star = bisect_level_crossing(along, 0.0, hi, level, tol)
    point = r_star * direction
    if not region.parent.contains(point):
        raise RayEscapedParentError(
            f"boundary point {point} escapes the parent region (non-star-shaped or ill-fitted value)"
        )
    return point


def boundary_samples(region: Region, count: int, tol: float = DEFAULT_BOUNDARY_TOL) -> BoundarySampleSet:
    """Sample the region boundary.

    Boxes and inf-norm balls: ``count`` points per edge (2-D) or per-face
    lattices (n >= 3).  Sublevel sets and 2-norm balls: ``count`` rays from
    the origin; sublevel crossings are located by bisection to ``tol``.
    """
    if count < 8:
        raise DimensionMismatchError("count must be >= 8")
    return _boundary_samples(region, count, tol)


def _boundary_samples(region: Region, count: int, tol: float) -> BoundarySampleSet:
    if isinstance(region, Box) or (isinstance(region, Ball) and region.norm == "inf"):
        return _box_boundary(region, count, tol)
    if isinstance(region, Ball):
        dirs = ray_directions(region.dim, count)
        points = region.radius * dirs
        params = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False) if region.dim == 2 else np.arange(len(dirs), dtype=float)
        point_at = None
        if region.dim == 2:
            point_at = lambda t: region.radius * np.array([np.cos(t), np.sin(t)])
        return BoundarySampleSet(points, params, 2.0 * np.pi if region.dim == 2 else float(len(dirs)), "radial-bisection", tol, point_at=point_at)
    dirs = ray_directions(region.dim, count)
    rows = ordered_map(lambda d: _ray_crossing(region, d, tol), list(dirs))
    points = np.asarray(rows)
    if region.dim == 2:
        params = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
        point_at = lambda t: _ray_crossing(region, np.array([np.cos(t), np.sin(t)]), tol)
        period = 2.0 * np.pi
    else:
        params = np.arange(len(dirs), dtype=float)
        point_at = None
        period = float(len(dirs))
    return BoundarySampleSet(points, params, period, "radial-bisection", tol, point_at=point_at)


# ---------------------------------------------------------------------------
# Boundary minimization
# ---------------------------------------------------------------------------

def _golden_minimize(fn: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while (b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    return min(fc, fd)


def min_on_boundary(
    value: ValueFunction,
    boundary: BoundarySampleSet,
    floor: float = DEFAULT_RADIUS_FLOOR,
    golden_tol: float = DEFAULT_GOLDEN_TOL,
) -> float:
    """Minimum of the value function over the boundary samples, refined by
    one golden-section pass around the discrete minimizer."""
    if len(boundary) == 0:
        raise DimensionMismatchError("boundary sample set is empty")
    values = np.asarray(value(boundary.points))
    k = int(np.argmin(values))
    best = float(values[k])
    if boundary.point_at is not None and len(boundary) >= 3:
        t = boundary.params
        t_prev = t[k - 1] if k > 0 else t[-1] - boundary.period
        t_next = t[(k + 1) % len(t)] if k + 1 < len(t) else t[0] + boundary.period
        refined = _golden_minimize(
            lambda s: float(value(boundary.point_at(s))), float(t_prev), float(t_next), golden_tol
        )
        best = min(best, refined)
    if best <= floor:
        raise NonPositiveMinimumError(
            f"boundary minimum {best:.3e} is at or below the floor {floor:g}"
        )
    return best


# ---------------------------------------------------------------------------
# Region update rules
# ---------------------------------------------------------------------------

def update_region(
    value: ValueFunction,
    omega: Region,
    count: int = DEFAULT_RAYS,
    tol: float = DEFAULT_BOUNDARY_TOL,
    floor: float = DEFAULT_RADIUS_FLOOR,
    golden_tol: float = DEFAULT_GOLDEN_TOL,
) -> tuple[SublevelSet, float]:
    """Largest sublevel set of ``value`` inside ``omega``.

    The radius is the boundary minimum of the value function, so every
    member point satisfies value <= radius and parent membership; nesting
    inside ``omega`` holds by construction.
    """
    boundary = boundary_samples(omega, count, tol)
    try:
        radius = min_on_boundary(value, boundary, floor, golden_tol)
    except NonPositiveMinimumError as exc:
        raise RegionCollapsedError(str(exc)) from exc
    return SublevelSet(value, radius, parent=omega), radius


def enlarge_region(
    value: ValueFunction,
    omega: Region,
    upsilon: Region,
    count: int = DEFAULT_RAYS,
    tol: float = DEFAULT_BOUNDARY_TOL,
    floor: float = DEFAULT_RADIUS_FLOOR,
    golden_tol: float = DEFAULT_GOLDEN_TOL,
) -> tuple[SublevelSet, float]:
    """Sublevel update over a user-claimed feasible superset ``upsilon``.

    Containment of ``omega`` in ``upsilon`` is checked on boundary samples,
    and the enlarged radius is verified to be at least the standard one.
    """
    omega_boundary = boundary_samples(omega, count, tol)
    inside = np.asarray(upsilon.contains(omega_boundary.points))
    if not np.all(inside):
        witness = omega_boundary.points[int(np.argmin(inside))]
        raise ContainmentViolatedError(
            f"current region is not contained in the enlargement set (witness {witness})"
        )
    try:
        radius = min_on_boundary(value, boundary_samples(upsilon, count, tol), floor, golden_tol)
    except NonPositiveMinimumError as exc:
        raise RegionCollapsedError(str(exc)) from exc
    standard = min_on_boundary(value, omega_boundary, floor, golden_tol)
    if radius < standard - 2.0 * (golden_tol + tol):
        raise ContainmentViolatedError(
            f"enlarged radius {radius:.6g} fell below the standard radius {standard:.6g}; "
            "the claimed superset does not contain the current region"
        )
    return SublevelSet(value, radius, parent=upsilon), radius


# ---------------------------------------------------------------------------
# Plot-ready outlines
# ---------------------------------------------------------------------------

def boundary_polyline(region: Region, count: int) -> Array:
    """Counterclockwise closed outline of a 2-D region: (M, 2) with the
    first point repeated last."""
    lower, upper = region.bounding_box()
    if len(lower) != 2:
        raise UnsupportedDimensionError("polylines are only defined for 2-D regions")
    samples = _boundary_samples(region, count, DEFAULT_BOUNDARY_TOL)
    points = samples.points
    if samples.method == "radial-bisection":
        order = np.argsort(samples.params, kind="stable")
        points = points[order]
    return np.vstack([points, points[:1]])
