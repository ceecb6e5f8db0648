"""Input validation helpers shared across the package.

All optimizer-facing code operates on float64 arrays in the normalized
unit cube; these helpers coerce and check shapes once at the public
boundaries so that the numerical core can assume clean inputs.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "check_array_2d",
    "check_vector",
    "check_matching_lengths",
    "check_unit_cube",
    "check_positive_scalar",
]


def check_array_2d(X, name="X", dim=None):
    """Coerce to a finite float64 array of shape (n, d).

    A single point of shape (d,) is promoted to (1, d).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"{name} has dimension {X.shape[1]}, expected {dim}")
    return X


def check_vector(x, name="x", length=None):
    """Coerce to a finite float64 vector of shape (n,)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    if length is not None and x.shape[0] != length:
        raise ValueError(f"{name} has length {x.shape[0]}, expected {length}")
    return x


def check_matching_lengths(X, y):
    if X.shape[0] != y.shape[0]:
        raise ValueError(
            f"point and observation counts differ: {X.shape[0]} vs {y.shape[0]}"
        )


def check_unit_cube(X, name="X", atol=0.0):
    if np.any(X < -atol) or np.any(X > 1.0 + atol):
        raise ValueError(f"{name} has coordinates outside the unit cube [0, 1]^d")


def check_positive_scalar(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0.0:
        raise ValueError(f"{name} must be a positive finite scalar, got {value}")
    return value
