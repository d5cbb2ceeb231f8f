"""Simulation-based checks of the solver's claims.

Each check simulates the closed loop (or scans a grid) independently of
the iteration that produced the artifact and reports a pass/fail verdict
with a concrete worst-case witness.  Trajectory batches are integrated
vectorized across initial conditions in fixed-size partitions, so results
are bitwise identical for any thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from typing import Callable

import numpy as np

from ._threads import chunk_slices, ordered_map
from .errors import DimensionMismatchError, EvalError, TailNotNegligibleError
from .model import (
    Ball,
    Box,
    CostSpec,
    DynamicsModel,
    Policy,
    Region,
    SublevelSet,
    ValueFunction,
    closed_loop_field,
    stage_cost,
)
from .numerics import (
    SampleGrid,
    StopRule,
    Termination,
    Trajectory,
    grid_sample,
    rk4_step,
    trajectory_quadrature,
)
from .region_update import boundary_samples
from .settings import IntegratorSettings, Tolerances

Array = np.ndarray


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Witness:
    state: Array
    measured: float
    threshold: float
    note: str = ""


@dataclass(frozen=True)
class CheckReport:
    name: str
    passed: bool
    tested: int
    witness: Witness | None = None
    details: dict = dataclass_field(default_factory=dict)

    def __post_init__(self):
        if not self.passed and self.witness is None:
            raise DimensionMismatchError("a failing report must carry a witness")

    def summary(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        extra = ""
        if self.witness is not None:
            extra = (
                f" witness state={np.array2string(np.asarray(self.witness.state), precision=6)}"
                f" measured={self.witness.measured:.6g} threshold={self.witness.threshold:.6g}"
                f" ({self.witness.note})"
            )
        return f"{self.name}: {verdict} over {self.tested} samples{extra}"


# ---------------------------------------------------------------------------
# Batch closed-loop simulation
# ---------------------------------------------------------------------------

@dataclass
class _BatchOutcome:
    termination: list[Termination]
    end_times: Array
    end_states: Array
    costs: Array
    tails: Array          # NaN where not applicable, inf where uncertifiable
    max_levels: Array | None
    states: Array | None  # (T+1, C, n) when recorded
    end_steps: Array


def _simulate_chunk(
    model: DynamicsModel,
    policy: Policy,
    x0: Array,
    integrator: IntegratorSettings,
    cost: CostSpec | None,
    level_fn: Callable[[Array], Array] | None,
    stop_domain: Region | None,
    value_bound: ValueFunction | None,
    record: bool,
) -> _BatchOutcome:
    h = integrator.h
    count = x0.shape[0]
    x = np.array(x0, dtype=float)
    # 0 alive, then one code per Termination member; enums materialize at the end
    ALIVE, REACHED, MAXTIME, LEFT, DIVERGED = 0, 1, 2, 3, 4
    codes = np.zeros(count, dtype=int)
    end_steps = np.zeros(count, dtype=int)
    costs = np.zeros(count)
    tails = np.full(count, np.nan)

    def field(states):
        return closed_loop_field(model, policy, states)

    def running_cost(states):
        if cost is None:
            return np.zeros(states.shape[0])
        actions = np.asarray(policy(states), dtype=float)
        return np.asarray(stage_cost(cost, states, actions), dtype=float)

    def classify(states) -> Array:
        norms = np.max(np.abs(np.atleast_2d(states)), axis=-1)
        out = np.where(norms <= integrator.delta_origin, REACHED, ALIVE)
        if stop_domain is not None:
            inside = np.asarray(stop_domain.contains(np.atleast_2d(states)))
            out = np.where((out == ALIVE) & ~inside, LEFT, out)
        return np.where((out == ALIVE) & (norms > integrator.divergence_bound), DIVERGED, out)

    r_prev = running_cost(x)
    max_levels = None
    if level_fn is not None:
        max_levels = np.asarray(level_fn(x), dtype=float).copy()
    # two trailing checkpoints give the decay-rate window for the tail
    cp_prev_t = np.zeros(count)
    cp_prev_r = r_prev.copy()
    cp_cur_t = np.zeros(count)
    cp_cur_r = r_prev.copy()
    history = [x.copy()] if record else None

    codes = classify(x)
    tails[codes == REACHED] = 0.0

    n_steps = int(math.ceil(integrator.t_max / h - 1e-9))
    k = 0
    while k < n_steps:
        idx = np.flatnonzero(codes == ALIVE)
        if idx.size == 0:
            break
        xa = x[idx]
        bad_rows = np.zeros(len(idx), dtype=bool)
        try:
            with np.errstate(all="ignore"):
                xn = rk4_step(field, xa, h)
        except EvalError:
            xn = np.array(xa)
            for j in range(len(idx)):
                try:
                    with np.errstate(all="ignore"):
                        xn[j] = rk4_step(field, xa[j][None, :], h)[0]
                except EvalError:
                    bad_rows[j] = True
        finite = np.all(np.isfinite(xn), axis=-1) & ~bad_rows
        dead = idx[~finite]
        codes[dead] = DIVERGED
        end_steps[dead] = k
        if max_levels is not None:
            max_levels[dead] = np.inf
        k += 1
        t_now = k * h
        gidx = idx[finite]
        if gidx.size:
            xg = xn[finite]
            x[gidx] = xg
            with np.errstate(all="ignore"):  # pre-divergence rows may overflow
                r_new = running_cost(xg)
                costs[gidx] += 0.5 * h * (r_prev[gidx] + r_new)
                r_prev[gidx] = r_new
                if max_levels is not None:
                    max_levels[gidx] = np.maximum(max_levels[gidx], np.asarray(level_fn(xg), dtype=float))
            shift = cp_cur_t[gidx] < 0.9 * t_now
            rows = gidx[shift]
            cp_prev_t[rows] = cp_cur_t[rows]
            cp_prev_r[rows] = cp_cur_r[rows]
            cp_cur_t[rows] = t_now
            cp_cur_r[rows] = r_prev[rows]
            fate = classify(xg)
            stopped = gidx[fate != ALIVE]
            codes[stopped] = fate[fate != ALIVE]
            end_steps[stopped] = k
        if record:
            history.append(x.copy())

    still = codes == ALIVE
    codes[still] = MAXTIME
    end_steps[still] = k

    # truncation tails for the trajectories that reached the origin ball
    for i in np.flatnonzero((codes == REACHED) & ~(tails == 0.0)):
        if value_bound is not None:
            tails[i] = float(value_bound(x[i]))
        else:
            r_end = r_prev[i]
            if r_end <= 0.0:
                tails[i] = 0.0
            elif cp_prev_r[i] > r_end and end_steps[i] * h > cp_prev_t[i]:
                rate = math.log(cp_prev_r[i] / r_end) / (end_steps[i] * h - cp_prev_t[i])
                tails[i] = r_end / rate
            else:
                tails[i] = np.inf

    members = {
        REACHED: Termination.REACHED_ORIGIN,
        MAXTIME: Termination.MAX_TIME,
        LEFT: Termination.LEFT_DOMAIN,
        DIVERGED: Termination.DIVERGED,
    }
    return _BatchOutcome(
        termination=[members[c] for c in codes],
        end_times=end_steps * h,
        end_states=x,
        costs=costs,
        tails=tails,
        max_levels=max_levels,
        states=np.asarray(history) if record else None,
        end_steps=end_steps,
    )


def _simulate_batch(
    model: DynamicsModel,
    policy: Policy,
    x0: Array,
    integrator: IntegratorSettings,
    cost: CostSpec | None = None,
    level_fn: Callable[[Array], Array] | None = None,
    stop_domain: Region | None = None,
    value_bound: ValueFunction | None = None,
    record: bool = False,
) -> _BatchOutcome:
    """Simulate many initial conditions; fixed partitioning keeps results
    independent of the thread count."""
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    slices = chunk_slices(x0.shape[0])
    outcomes = ordered_map(
        lambda sl: _simulate_chunk(
            model, policy, x0[sl], integrator, cost, level_fn, stop_domain, value_bound, record
        ),
        slices,
    )
    if len(outcomes) == 1:
        return outcomes[0]
    states = None
    if record:
        depth = max(o.states.shape[0] for o in outcomes)
        padded = []
        for o in outcomes:
            pad = np.repeat(o.states[-1:], depth - o.states.shape[0], axis=0)
            padded.append(np.concatenate([o.states, pad], axis=0) if pad.size else o.states)
        states = np.concatenate(padded, axis=1)
    return _BatchOutcome(
        termination=[t for o in outcomes for t in o.termination],
        end_times=np.concatenate([o.end_times for o in outcomes]),
        end_states=np.concatenate([o.end_states for o in outcomes]),
        costs=np.concatenate([o.costs for o in outcomes]),
        tails=np.concatenate([o.tails for o in outcomes]),
        max_levels=None if level_fn is None else np.concatenate([o.max_levels for o in outcomes]),
        states=states,
        end_steps=np.concatenate([o.end_steps for o in outcomes]),
    )


# ---------------------------------------------------------------------------
# Sample selection
# ---------------------------------------------------------------------------

def _boundary_count_for(region: Region, target: int) -> int:
    if isinstance(region, Box) or (isinstance(region, Ball) and region.norm == "inf"):
        lower, _ = region.bounding_box()
        if len(lower) == 2:
            return max(8, target // 4)
    return max(8, target)


def _interior_probes(region: Region, target: int) -> Array:
    lower, upper = region.bounding_box()
    dim = len(lower)
    per_axis = max(2, int(math.ceil(target ** (1.0 / dim))))
    spacing = float(np.max(upper - lower)) / per_axis
    grid = grid_sample(region, spacing)
    stride = max(1, len(grid) // max(target, 1))
    return grid.points[::stride]


def probe_states(region: Region, count: int, scales: tuple[float, ...] = (0.5, 0.9)) -> Array:
    """Deterministic states inside the region: boundary samples pulled
    toward the origin by each scale factor."""
    per_scale = max(1, -(-count // len(scales)))
    samples = boundary_samples(region, _boundary_count_for(region, per_scale))
    points = np.concatenate([s * samples.points for s in scales], axis=0)
    return points[:count]


def _excursion_level(region: Region) -> tuple[Callable[[Array], Array], float, str]:
    """Level function whose sublevel-1 (or sublevel-c) set is the region."""
    if isinstance(region, SublevelSet):
        return (lambda X: np.asarray(region.value(X))), region.level, "value level"
    if isinstance(region, Box):
        lower, upper = region.bounding_box()

        def ratio(X):
            X = np.atleast_2d(X)
            return np.max(np.maximum(X / upper, X / lower), axis=-1)

        return ratio, 1.0, "box excursion ratio"
    if isinstance(region, Ball):
        if region.norm == "inf":
            return (lambda X: np.max(np.abs(np.atleast_2d(X)), axis=-1) / region.radius), 1.0, "ball excursion ratio"
        return (lambda X: np.linalg.norm(np.atleast_2d(X), axis=-1) / region.radius), 1.0, "ball excursion ratio"
    raise DimensionMismatchError(f"unsupported region type {type(region).__name__}")


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def check_admissible(
    model: DynamicsModel,
    cost: CostSpec,
    policy: Policy,
    region: Region,
    n_samples: int = 128,
    integrator: IntegratorSettings = IntegratorSettings(),
    tolerances: Tolerances = Tolerances(),
    value_bound: ValueFunction | None = None,
) -> CheckReport:
    """Simulate from boundary plus coarse interior states; admissible means
    every trajectory stays in the model domain, reaches the origin ball
    before the horizon, and accrues finite cost with a negligible tail."""
    if n_samples < 1:
        raise DimensionMismatchError("n_samples must be >= 1")
    boundary = boundary_samples(region, _boundary_count_for(region, max(8, n_samples // 2)))
    interior = _interior_probes(region, max(1, n_samples // 2))
    starts = np.concatenate([boundary.points, interior], axis=0)
    out = _simulate_batch(
        model, policy, starts, integrator,
        cost=cost, stop_domain=model.domain, value_bound=value_bound,
    )
    witness = None
    # "negligible" is judged against the region's cost scale: trajectories
    # starting near the origin have J -> 0 while the truncation tail has a
    # floor set by delta_origin, so a per-trajectory relative test cannot hold.
    cost_scale = max(float(np.max(out.costs)), 1e-300)
    for i, t in enumerate(out.termination):
        if t is Termination.LEFT_DOMAIN:
            witness = Witness(starts[i], out.end_times[i], integrator.t_max, "trajectory left the model domain")
            break
        if t in (Termination.DIVERGED, Termination.MAX_TIME):
            witness = Witness(
                starts[i], float(np.max(np.abs(out.end_states[i]))), integrator.delta_origin,
                f"never reached the origin ball ({t.value})",
            )
            break
        if not np.isfinite(out.costs[i]) or out.tails[i] > tolerances.tail_rel * cost_scale:
            witness = Witness(
                starts[i], float(out.tails[i]), tolerances.tail_rel * cost_scale,
                "cost tail not negligible",
            )
            break
    n_reached = sum(t is Termination.REACHED_ORIGIN for t in out.termination)
    return CheckReport(
        name="admissible",
        passed=witness is None,
        tested=len(starts),
        witness=witness,
        details={
            "n_reached_origin": int(n_reached),
            "max_cost": float(np.max(out.costs)),
            "max_reach_time": float(np.max(out.end_times)),
        },
    )


def check_invariance(
    model: DynamicsModel,
    policy: Policy,
    region: Region,
    n_trajectories: int = 720,
    integrator: IntegratorSettings = IntegratorSettings(),
    tau_inv: float = 1e-3,
) -> CheckReport:
    """Simulate from boundary samples; invariant means no trajectory climbs
    above the region level by more than the relative slack."""
    boundary = boundary_samples(region, _boundary_count_for(region, n_trajectories))
    level_fn, level, kind = _excursion_level(region)
    out = _simulate_batch(model, policy, boundary.points, integrator, level_fn=level_fn)
    ratios = out.max_levels / level
    worst = int(np.argmax(ratios))
    passed = bool(ratios[worst] <= 1.0 + tau_inv)
    witness = None
    if not passed:
        witness = Witness(
            boundary.points[worst], float(ratios[worst]), 1.0 + tau_inv,
            f"{kind} exceeded the region level",
        )
    n_reached = sum(t is Termination.REACHED_ORIGIN for t in out.termination)
    return CheckReport(
        name="invariance",
        passed=passed,
        tested=len(boundary.points),
        witness=witness,
        details={
            "max_excursion_ratio": float(ratios[worst]),
            "n_reached_origin": int(n_reached),
            "max_reach_time": float(np.max(out.end_times)),
        },
    )


def check_lyapunov_decrease(
    model: DynamicsModel,
    cost: CostSpec,
    value: ValueFunction,
    policy_next: Policy,
    grid: SampleGrid,
    tau_lyap: float = 1e-6,
) -> CheckReport:
    """Grid scan of grad V . closed_loop + r(x, mu_next) <= slack."""
    points = grid.points
    actions = np.asarray(policy_next(points), dtype=float)
    flow = closed_loop_field(model, policy_next, points)
    running = np.asarray(stage_cost(cost, points, actions), dtype=float)
    lhs = np.einsum("nd,nd->n", value.gradient(points), flow) + running
    slack = tau_lyap * np.maximum(1.0, running)
    margin = lhs - slack
    worst = int(np.argmax(margin))
    passed = bool(margin[worst] <= 0.0)
    witness = None
    if not passed:
        witness = Witness(points[worst], float(lhs[worst]), float(slack[worst]), "decrease inequality violated")
    return CheckReport(
        name="lyapunov_decrease",
        passed=passed,
        tested=len(points),
        witness=witness,
        details={"max_lhs": float(lhs[worst]), "max_margin": float(margin[worst])},
    )


def check_value_against_cost(
    model: DynamicsModel,
    cost: CostSpec,
    value: ValueFunction,
    policy: Policy,
    probes: Array,
    integrator: IntegratorSettings = IntegratorSettings(),
    tau_val: float = 1e-2,
    tail_rel: float = 1e-6,
) -> CheckReport:
    """Compare the fitted value against the trajectory-cost oracle.

    Each probe is simulated to the origin ball; the accumulated stage cost
    (trapezoid quadrature along the stored trajectory plus the reported
    tail) must match the fitted value to the relative tolerance.
    """
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    out = _simulate_batch(model, policy, probes, integrator, cost=cost, record=True)

    def integrand(x, u):
        return stage_cost(cost, x, u)

    worst_err = -1.0
    witness = None
    errors = []
    for i in range(len(probes)):
        note = None
        if out.termination[i] is not Termination.REACHED_ORIGIN:
            note = f"trajectory did not reach the origin ({out.termination[i].value})"
            measured = float("nan")
        else:
            end = int(out.end_steps[i])
            times = integrator.h * np.arange(end + 1)
            states = out.states[: end + 1, i, :]
            actions = np.asarray(policy(states), dtype=float)
            traj = Trajectory(times, states, actions, Termination.REACHED_ORIGIN)
            try:
                quad = trajectory_quadrature(traj, integrand, tail_bound=value, tail_rel=tail_rel)
            except TailNotNegligibleError as exc:
                note = str(exc)
                quad = None
            if quad is not None:
                predicted = float(value(probes[i]))
                measured = abs(predicted - quad.value) / max(abs(quad.value), 1e-12)
                errors.append(measured)
                if measured > tau_val and measured > worst_err:
                    worst_err = measured
                    witness = Witness(probes[i], measured, tau_val, "value/cost relative error too large")
                continue
        if witness is None:
            witness = Witness(probes[i], float("nan"), tau_val, note)
        break
    passed = witness is None
    return CheckReport(
        name="value_vs_cost",
        passed=passed,
        tested=len(probes),
        witness=witness,
        details={
            "max_relative_error": float(max(errors)) if errors else float("nan"),
            "n_compared": len(errors),
        },
    )


def check_monotone_values(history, grid: SampleGrid, tau_mono: float = 1e-6) -> CheckReport:
    """Consecutive fitted values must not increase (to slack) and must stay
    positive away from the origin, on a grid drawn from the final region.

    ``history`` is a PIHistory or any sequence of fitted value functions.
    """
    values = history.value_functions() if hasattr(history, "value_functions") else list(history)
    points = grid.points
    nonzero = np.any(points != 0.0, axis=1)
    witness = None
    evaluated = [np.asarray(v(points)) for v in values]
    for cur in evaluated:
        if witness is None and np.any(cur[nonzero] <= 0.0):
            bad = int(np.flatnonzero(nonzero)[np.argmin(cur[nonzero])])
            witness = Witness(points[bad], float(cur[bad]), 0.0, "fitted value nonpositive away from the origin")
    for i in range(len(evaluated) - 1):
        if witness is not None:
            break
        gap = evaluated[i + 1] - evaluated[i] - tau_mono * np.maximum(1.0, evaluated[i])
        worst = int(np.argmax(gap))
        if gap[worst] > 0.0:
            witness = Witness(
                points[worst], float(evaluated[i + 1][worst]), float(evaluated[i][worst]),
                f"value increased between iterations {i} and {i + 1}",
            )
    return CheckReport(
        name="monotone_values",
        passed=witness is None,
        tested=len(points) * max(1, len(evaluated) - 1),
        witness=witness,
        details={"n_iterations": len(evaluated)},
    )
