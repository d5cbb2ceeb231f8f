"""Estimator-style front end for the solver.

``InvariantAdmissiblePI`` follows the scikit-learn contract (constructor
stores parameters verbatim, ``fit`` runs the algorithm and sets trailing-
underscore attributes, ``get_params``/``set_params`` support cloning and
grid search) without importing scikit-learn.  ``fit`` consumes no data
matrix: the problem is the constructor's dynamics/cost/region parameters,
and the collocation samples are drawn internally from the evolving
region.  ``predict`` maps states to control actions under the fitted
policy.
"""

from __future__ import annotations

import inspect

import numpy as np

from .errors import NotFittedError
from .model import BasisSet, CostSpec, DynamicsModel, Policy, Region, monomial_basis
from .numerics import grid_sample
from .policy_iteration import PIConfig, hjb_residual, improve_policy, run_pi
from .settings import IntegratorSettings, Tolerances
from .validation import as_state_batch

Array = np.ndarray


class InvariantAdmissiblePI:
    """Fit an optimal-control policy with certified stability regions.

    Parameters mirror :class:`PIConfig`; ``basis`` of None selects the
    quadratic monomial basis.  After ``fit``: ``weights_`` (fitted value
    weights), ``value_``, ``policy_``, ``region_`` (final invariant
    admissible region), ``history_``, ``n_iter_``, ``converged_``.
    """

    def __init__(
        self,
        dynamics: DynamicsModel | None = None,
        cost: CostSpec | None = None,
        initial_policy: Policy | None = None,
        initial_region: Region | None = None,
        basis: BasisSet | None = None,
        epsilon: float = 1e-4,
        max_iterations: int = 50,
        spacing: float = 1e-2,
        region_mode: str = "standard",
        upsilon: Region | None = None,
        integrator: IntegratorSettings | None = None,
        tolerances: Tolerances | None = None,
        boundary_count: int = 720,
        gate_samples: int = 128,
    ):
        self.dynamics = dynamics
        self.cost = cost
        self.initial_policy = initial_policy
        self.initial_region = initial_region
        self.basis = basis
        self.epsilon = epsilon
        self.max_iterations = max_iterations
        self.spacing = spacing
        self.region_mode = region_mode
        self.upsilon = upsilon
        self.integrator = integrator
        self.tolerances = tolerances
        self.boundary_count = boundary_count
        self.gate_samples = gate_samples

    # -- sklearn-style parameter plumbing ---------------------------------

    @classmethod
    def _param_names(cls) -> list[str]:
        signature = inspect.signature(cls.__init__)
        return [name for name in signature.parameters if name != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "InvariantAdmissiblePI":
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(f"invalid parameter {name!r} for InvariantAdmissiblePI")
            setattr(self, name, value)
        return self

    # -- fitting -----------------------------------------------------------

    def _config(self) -> PIConfig:
        for name in ("dynamics", "cost", "initial_policy", "initial_region"):
            if getattr(self, name) is None:
                raise ValueError(f"parameter {name!r} must be set before fit")
        basis = self.basis if self.basis is not None else monomial_basis(self.dynamics.state_dim)
        return PIConfig(
            model=self.dynamics,
            cost=self.cost,
            basis=basis,
            initial_policy=self.initial_policy,
            initial_region=self.initial_region,
            epsilon=self.epsilon,
            max_iterations=self.max_iterations,
            spacing=self.spacing,
            region_mode=self.region_mode,
            upsilon=self.upsilon,
            integrator=self.integrator or IntegratorSettings(),
            tolerances=self.tolerances or Tolerances(),
            boundary_count=self.boundary_count,
            gate_samples=self.gate_samples,
        )

    def fit(self, X=None, y=None) -> "InvariantAdmissiblePI":
        """Run the iteration.  X and y are accepted for pipeline
        compatibility and ignored; the problem lives in the parameters."""
        config = self._config()
        history = run_pi(config)
        self.history_ = history
        self.weights_ = history.final_weights
        self.value_ = history.value_functions()[-1]
        self.policy_ = improve_policy(config.model, config.cost, self.value_)
        self.region_ = history.regions()[-1]
        self.n_iter_ = len(history.iterations)
        self.converged_ = history.converged
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "policy_"):
            raise NotFittedError("this estimator is not fitted yet; call fit first")

    def predict(self, X) -> Array:
        """Control actions of the fitted policy at states X of shape (N, n)."""
        self._check_fitted()
        states = as_state_batch(X, self.dynamics.state_dim)
        return np.asarray(self.policy_(states))

    def value(self, X) -> Array:
        """Fitted value function at states X of shape (N, n)."""
        self._check_fitted()
        states = as_state_batch(X, self.dynamics.state_dim)
        return np.asarray(self.value_(states))

    def score(self, X=None, y=None) -> float:
        """Negative RMS optimality-equation residual (higher is better),
        over X or over the final-region grid when X is omitted."""
        self._check_fitted()
        if X is None:
            states = grid_sample(self.region_, self.spacing).points
        else:
            states = as_state_batch(X, self.dynamics.state_dim)
        residuals = np.asarray(hjb_residual(self.dynamics, self.cost, self.value_, states))
        return float(-np.sqrt(np.mean(residuals**2)))
