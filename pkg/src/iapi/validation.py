"""Input validation helpers shared by the public API surfaces."""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError


def as_state(x, dim: int) -> np.ndarray:
    """Coerce ``x`` to a finite float vector of length ``dim``."""
    arr = np.asarray(x, dtype=float)
    if arr.shape != (dim,):
        raise DimensionMismatchError(f"expected state of shape ({dim},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionMismatchError("state contains non-finite entries")
    return arr


def as_state_batch(X, dim: int) -> np.ndarray:
    """Coerce ``X`` to a finite float array of shape (N, dim).

    A single state of shape (dim,) is promoted to (1, dim).
    """
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DimensionMismatchError(f"expected states of shape (N, {dim}), got {np.shape(X)}")
    if not np.all(np.isfinite(arr)):
        raise DimensionMismatchError("states contain non-finite entries")
    return arr


def as_input(u, dim: int) -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    if arr.ndim == 0 and dim == 1:
        arr = arr[None]
    if arr.shape != (dim,):
        raise DimensionMismatchError(f"expected input of shape ({dim},), got {np.shape(u)}")
    return arr


def check_spd(matrix, name: str = "matrix") -> np.ndarray:
    """Validate a symmetric positive definite matrix and return it as float."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DimensionMismatchError(f"{name} contains non-finite entries")
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.max(np.abs(m))))):
        raise DimensionMismatchError(f"{name} is not symmetric")
    eigs = np.linalg.eigvalsh(m)
    if eigs.min() <= 0.0:
        raise DimensionMismatchError(f"{name} is not positive definite (min eigenvalue {eigs.min():g})")
    return m


def is_batch(x) -> bool:
    """True when ``x`` is a 2-D batch of states rather than a single state."""
    return np.asarray(x).ndim == 2
