"""Numeric settings shared by the iteration driver and the verifier."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DimensionMismatchError


@dataclass(frozen=True)
class IntegratorSettings:
    """Fixed-step closed-loop simulation parameters."""

    h: float = 1e-3
    t_max: float = 50.0
    delta_origin: float = 1e-4
    divergence_bound: float = 1e6

    def __post_init__(self):
        if self.h <= 0.0 or self.t_max <= 0.0:
            raise DimensionMismatchError("step size and horizon must be positive")
        if self.delta_origin <= 0.0 or self.divergence_bound <= self.delta_origin:
            raise DimensionMismatchError("need 0 < delta_origin < divergence_bound")


@dataclass(frozen=True)
class Tolerances:
    """Slacks turning the exact inequalities into checkable float tests."""

    tau_inv: float = 1e-3    # sublevel excursion allowance, relative
    tau_lyap: float = 1e-6   # decrease inequality slack, scaled by max(1, r)
    tau_mono: float = 1e-6   # value monotonicity slack, scaled by max(1, V)
    tau_val: float = 1e-2    # value vs trajectory-cost relative error
    tau_hjb: float = 1e-6    # fixed-point residual threshold
    tail_rel: float = 1e-6   # max truncation tail relative to the integral
    c_floor: float = 1e-6    # region collapse floor
    boundary_tol: float = 1e-8
    golden_tol: float = 1e-10

    def __post_init__(self):
        for name in (
            "tau_inv", "tau_lyap", "tau_mono", "tau_val", "tau_hjb",
            "tail_rel", "c_floor", "boundary_tol", "golden_tol",
        ):
            if getattr(self, name) <= 0.0:
                raise DimensionMismatchError(f"{name} must be positive")
