"""Core domain types: dynamics, costs, bases, value functions, policies, regions.

States are plain numpy arrays.  Every evaluation accepts either a single
state of shape (n,) or a batch of shape (N, n); batch results keep the
leading axis.  All types are immutable after construction and every
operation is pure, so concurrent evaluation is safe.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from . import exprparse
from .errors import DimensionMismatchError
from .validation import as_input, check_spd, is_batch

Array = np.ndarray


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    """Axis-aligned box containing the origin strictly in its interior."""

    lower: Array
    upper: Array

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise DimensionMismatchError("box bounds must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise DimensionMismatchError("box bounds must be finite")
        if not np.all((lower < 0.0) & (upper > 0.0)):
            raise DimensionMismatchError("box must contain the origin strictly inside")

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, x) -> bool | Array:
        arr = np.asarray(x, dtype=float)
        inside = np.all((arr >= self.lower) & (arr <= self.upper), axis=-1)
        return inside if is_batch(x) else bool(inside)

    def bounding_box(self) -> tuple[Array, Array]:
        return self.lower, self.upper


@dataclass(frozen=True)
class Ball:
    """Closed ball at the origin; norm is 'inf' (default) or '2'."""

    radius: float
    dim: int
    norm: str = "inf"

    def __post_init__(self):
        if not (np.isfinite(self.radius) and self.radius > 0.0):
            raise DimensionMismatchError("ball radius must be positive and finite")
        if self.norm not in ("inf", "2"):
            raise DimensionMismatchError(f"unsupported norm {self.norm!r}")
        if self.dim < 1:
            raise DimensionMismatchError("ball dimension must be >= 1")

    def contains(self, x) -> bool | Array:
        arr = np.asarray(x, dtype=float)
        if self.norm == "inf":
            size = np.max(np.abs(arr), axis=-1)
        else:
            size = np.sqrt(np.sum(arr * arr, axis=-1))
        inside = size <= self.radius
        return inside if is_batch(x) else bool(inside)

    def bounding_box(self) -> tuple[Array, Array]:
        half = np.full(self.dim, self.radius)
        return -half, half


@dataclass(frozen=True)
class SublevelSet:
    """Origin component of {x : V(x) <= level}, clipped to its parent region.

    Membership requires the whole parent chain, which excludes any spurious
    outer components of the raw sublevel set.
    """

    value: "ValueFunction"
    level: float
    parent: "Region"

    def __post_init__(self):
        if not (np.isfinite(self.level) and self.level > 0.0):
            raise DimensionMismatchError("sublevel threshold must be positive and finite")

    @property
    def dim(self) -> int:
        return self.value.basis.dim

    def contains(self, x) -> bool | Array:
        values = self.value(x)
        inside = np.asarray(values <= self.level) & np.asarray(self.parent.contains(x))
        return inside if is_batch(x) else bool(inside)

    def bounding_box(self) -> tuple[Array, Array]:
        return self.parent.bounding_box()


Region = Union[Box, Ball, SublevelSet]


def region_contains(region: Region, x) -> bool | Array:
    """Membership test; batch-aware like every other evaluation."""
    return region.contains(x)


# ---------------------------------------------------------------------------
# Basis and value function
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BasisSet:
    """Monomial features with analytic gradients.

    Every exponent row must have total degree >= 2, which makes each
    feature and its gradient vanish at the origin exactly; improved
    policies then satisfy mu(0) = 0 by construction.
    """

    dim: int
    exponents: Array  # (K, dim) nonnegative integers

    def __post_init__(self):
        exps = np.asarray(self.exponents, dtype=int)
        object.__setattr__(self, "exponents", exps)
        if exps.ndim != 2 or exps.shape[1] != self.dim:
            raise DimensionMismatchError(f"exponents must have shape (K, {self.dim})")
        if exps.shape[0] == 0:
            raise DimensionMismatchError("basis must contain at least one feature")
        if np.any(exps < 0):
            raise DimensionMismatchError("exponents must be nonnegative")
        if np.any(exps.sum(axis=1) < 2):
            raise DimensionMismatchError(
                "every feature needs total degree >= 2 so that it and its "
                "gradient vanish at the origin"
            )

    @property
    def size(self) -> int:
        return self.exponents.shape[0]

    def features(self, x) -> Array:
        """Feature matrix: (K,) for one state, (N, K) for a batch."""
        single = not is_batch(x)
        arr = np.atleast_2d(np.asarray(x, dtype=float))
        if arr.shape[-1] != self.dim:
            raise DimensionMismatchError(f"expected states of dimension {self.dim}, got {arr.shape[-1]}")
        out = np.ones((arr.shape[0], self.size))
        for j, row in enumerate(self.exponents):
            for i, p in enumerate(row):
                if p:
                    out[:, j] *= arr[:, i] ** int(p)
        return out[0] if single else out

    def feature_gradients(self, x) -> Array:
        """Gradients: (K, n) for one state, (N, K, n) for a batch."""
        single = not is_batch(x)
        arr = np.atleast_2d(np.asarray(x, dtype=float))
        if arr.shape[-1] != self.dim:
            raise DimensionMismatchError(f"expected states of dimension {self.dim}, got {arr.shape[-1]}")
        n_pts = arr.shape[0]
        out = np.zeros((n_pts, self.size, self.dim))
        for j, row in enumerate(self.exponents):
            for i, p in enumerate(row):
                if not p:
                    continue
                g = float(p) * arr[:, i] ** int(p - 1)
                for l, q in enumerate(row):
                    if l != i and q:
                        g = g * arr[:, l] ** int(q)
                out[:, j, i] = g
        return out[0] if single else out


def monomial_basis(dim: int, min_degree: int = 2, max_degree: int = 2) -> BasisSet:
    """All monomials of total degree min_degree..max_degree, graded order.

    Within a degree, exponent tuples are ordered with earlier variables
    taking the highest powers first, e.g. for dim 2 and degree 2:
    x1^2, x1*x2, x2^2.
    """
    if min_degree < 2:
        raise DimensionMismatchError("min_degree must be >= 2 (origin invariants)")
    if max_degree < min_degree:
        raise DimensionMismatchError("max_degree must be >= min_degree")
    rows = []
    for total in range(min_degree, max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(dim), total):
            e = [0] * dim
            for i in combo:
                e[i] += 1
            rows.append(e)
    return BasisSet(dim, np.array(rows, dtype=int))


@dataclass(frozen=True)
class ValueFunction:
    """Weighted basis expansion V(x) = sum_j w_j phi_j(x)."""

    basis: BasisSet
    weights: Array

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if w.shape != (self.basis.size,):
            raise DimensionMismatchError(
                f"expected {self.basis.size} weights, got shape {w.shape}"
            )

    def __call__(self, x) -> float | Array:
        feats = self.basis.features(x)
        out = feats @ self.weights
        return out if is_batch(x) else float(out)

    def gradient(self, x) -> Array:
        grads = self.basis.feature_gradients(x)
        if is_batch(x):
            return np.einsum("k,nkd->nd", self.weights, grads)
        return self.weights @ grads


def evaluate_value(v: ValueFunction, x) -> float | Array:
    return v(x)


def evaluate_value_gradient(v: ValueFunction, x) -> Array:
    return v.gradient(x)


# ---------------------------------------------------------------------------
# Dynamics and cost
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DynamicsModel:
    """Input-affine dynamics xdot = drift(x) + input_matrix(x) u on a domain.

    ``drift`` maps (n,) -> (n,) and (N, n) -> (N, n); ``input_matrix`` maps
    (n,) -> (n, m) and (N, n) -> (N, n, m).  ``domain`` of None means the
    whole space.
    """

    state_dim: int
    input_dim: int
    drift: Callable[[Array], Array]
    input_matrix: Callable[[Array], Array]
    domain: Region | None = None

    def __post_init__(self):
        origin = np.zeros(self.state_dim)
        f0 = np.asarray(self.drift(origin), dtype=float)
        if f0.shape != (self.state_dim,):
            raise DimensionMismatchError(
                f"drift must map (n,) to (n,), got shape {f0.shape} at the origin"
            )
        if np.any(f0 != 0.0):
            raise DimensionMismatchError("drift must vanish at the origin exactly")
        g0 = np.asarray(self.input_matrix(origin), dtype=float)
        if g0.shape != (self.state_dim, self.input_dim):
            raise DimensionMismatchError(
                f"input_matrix must map (n,) to (n, m), got shape {g0.shape}"
            )


@dataclass(frozen=True)
class CostSpec:
    """Stage cost r(x, u) = state_cost(x) + u^T weight u with SPD weight.

    The weight inverse is computed once at construction by a dense
    symmetric solve and reused by every policy improvement.
    """

    state_cost: Callable[[Array], float | Array]
    weight: Array
    weight_inverse: Array = field(init=False, repr=False)

    def __post_init__(self):
        w = check_spd(self.weight, "cost weight")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "weight_inverse", np.linalg.solve(w, np.eye(w.shape[0])))

    @property
    def input_dim(self) -> int:
        return self.weight.shape[0]


def stage_cost(cost: CostSpec, x, u) -> float | Array:
    """r(x, u) = Q(x) + u^T R u; nonnegative, zero only at (0, 0)."""
    q = cost.state_cost(x)
    if is_batch(x):
        uu = np.asarray(u, dtype=float)
        if uu.ndim != 2 or uu.shape[1] != cost.input_dim:
            raise DimensionMismatchError(
                f"expected inputs of shape (N, {cost.input_dim}), got {np.shape(u)}"
            )
        return np.asarray(q) + np.einsum("ni,ij,nj->n", uu, cost.weight, uu)
    uu = as_input(u, cost.input_dim)
    return float(q) + float(uu @ cost.weight @ uu)


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------

class ExpressionPolicy:
    """Feedback policy whose m components are parsed expressions."""

    def __init__(self, expressions: list[str], state_dim: int):
        self.state_dim = state_dim
        self.input_dim = len(expressions)
        self.texts = list(expressions)
        self.asts = [exprparse.parse(s, state_dim) for s in expressions]
        origin = np.zeros(state_dim)
        u0 = np.array([exprparse.evaluate(a, origin) for a in self.asts])
        if np.any(u0 != 0.0):
            raise DimensionMismatchError("policy must vanish at the origin exactly")

    def __call__(self, x) -> Array:
        if is_batch(x):
            out = np.empty((np.shape(x)[0], self.input_dim))
            for j, a in enumerate(self.asts):
                out[:, j] = exprparse.evaluate(a, x)
            return out
        return np.array([exprparse.evaluate(a, x) for a in self.asts])


class ValueGradientPolicy:
    """Greedy policy u = -1/2 R^-1 g(x)^T grad V(x) from a fitted value.

    Exactly zero at the origin because every basis gradient vanishes there.
    """

    def __init__(self, model: DynamicsModel, cost: CostSpec, value: ValueFunction):
        if cost.input_dim != model.input_dim:
            raise DimensionMismatchError("cost weight size must match the input dimension")
        self.model = model
        self.cost = cost
        self.value = value
        self.state_dim = model.state_dim
        self.input_dim = model.input_dim

    def __call__(self, x) -> Array:
        g = np.asarray(self.model.input_matrix(x), dtype=float)
        grad = self.value.gradient(x)
        if is_batch(x):
            return -0.5 * np.einsum("ij,ndj,nd->ni", self.cost.weight_inverse, g, grad)
        return -0.5 * self.cost.weight_inverse @ (g.T @ grad)


class CallablePolicy:
    """Adapter for an arbitrary batch-aware feedback function."""

    def __init__(self, fn: Callable[[Array], Array], state_dim: int, input_dim: int):
        self.fn = fn
        self.state_dim = state_dim
        self.input_dim = input_dim
        u0 = self(np.zeros(state_dim))
        if u0.shape != (input_dim,) or np.any(u0 != 0.0):
            raise DimensionMismatchError("policy must vanish at the origin exactly")

    def __call__(self, x) -> Array:
        out = np.asarray(self.fn(x), dtype=float)
        if is_batch(x) and out.ndim == 1 and self.input_dim == 1:
            out = out[:, None]  # scalar-input convenience
        return out


Policy = Union[ExpressionPolicy, ValueGradientPolicy, CallablePolicy]


def closed_loop_field(model: DynamicsModel, policy: Policy, x) -> Array:
    """Closed-loop vector field drift(x) + input_matrix(x) policy(x)."""
    f = np.asarray(model.drift(x), dtype=float)
    g = np.asarray(model.input_matrix(x), dtype=float)
    u = np.asarray(policy(x), dtype=float)
    if is_batch(x):
        return f + np.einsum("ndm,nm->nd", g, u)
    return f + g @ u


# ---------------------------------------------------------------------------
# Expression-backed model factories
# ---------------------------------------------------------------------------

def dynamics_from_expressions(
    drift_exprs: list[str],
    input_exprs: list[list[str]],
    state_dim: int,
    input_dim: int,
    domain: Region | None = None,
) -> DynamicsModel:
    """Build a DynamicsModel whose fields evaluate parsed expressions."""
    if len(drift_exprs) != state_dim:
        raise DimensionMismatchError(f"need {state_dim} drift expressions, got {len(drift_exprs)}")
    if len(input_exprs) != state_dim or any(len(row) != input_dim for row in input_exprs):
        raise DimensionMismatchError(
            f"input matrix expressions must form a {state_dim}x{input_dim} grid"
        )
    drift_asts = [exprparse.parse(s, state_dim) for s in drift_exprs]
    input_asts = [[exprparse.parse(s, state_dim) for s in row] for row in input_exprs]

    def drift(x):
        if is_batch(x):
            out = np.empty((np.shape(x)[0], state_dim))
            for i, a in enumerate(drift_asts):
                out[:, i] = exprparse.evaluate(a, x)  # scalar assignment broadcasts
            return out
        return np.array([exprparse.evaluate(a, x) for a in drift_asts])

    def input_matrix(x):
        if is_batch(x):
            out = np.empty((np.shape(x)[0], state_dim, input_dim))
            for i, row in enumerate(input_asts):
                for j, a in enumerate(row):
                    out[:, i, j] = exprparse.evaluate(a, x)
            return out
        return np.array(
            [[exprparse.evaluate(a, x) for a in row] for row in input_asts]
        )

    return DynamicsModel(state_dim, input_dim, drift, input_matrix, domain)


def cost_from_expressions(q_expr: str, weight, state_dim: int) -> CostSpec:
    """Build a CostSpec whose state cost evaluates a parsed expression."""
    ast = exprparse.parse(q_expr, state_dim)

    def state_cost(x):
        return exprparse.evaluate(ast, x)

    q0 = state_cost(np.zeros(state_dim))
    if q0 != 0.0:
        raise DimensionMismatchError("state cost must vanish at the origin")
    return CostSpec(state_cost, np.asarray(weight, dtype=float))
