"""Synthetic objective functions and regret computation.

Everything downstream maximizes, so the classical minimization test
functions are negated here at the boundary: an objective's best value is
``known_optimum_value`` and larger observations are better.  Evaluations
are noiseless; observation noise exists only as a model parameter of the
surrogate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .validation import check_array_2d, check_vector

__all__ = [
    "ObjectiveFn",
    "RegretTrace",
    "make_ackley",
    "make_rastrigin",
    "make_branin",
    "make_levy1d",
    "get_objective",
    "compute_regret",
    "BRANIN_OPTIMIZERS",
    "OBJECTIVE_NAMES",
]


@dataclass(frozen=True)
class ObjectiveFn:
    """A box-constrained benchmark in native coordinates (maximized)."""

    name: str
    dim: int
    lower: np.ndarray
    upper: np.ndarray
    fn: callable = field(repr=False)
    known_optimum_value: float | None = None
    known_optimizer: np.ndarray | None = None
    maximize: bool = True

    def __post_init__(self):
        object.__setattr__(self, "lower", check_vector(self.lower, "lower", self.dim))
        object.__setattr__(self, "upper", check_vector(self.upper, "upper", self.dim))
        if np.any(self.lower >= self.upper):
            raise ValueError("lower bounds must be strictly below upper bounds")

    def evaluate(self, X):
        """Vectorized evaluation of rows of X (native coordinates)."""
        X = check_array_2d(X, "X", dim=self.dim)
        return self.fn(X)

    def __call__(self, x):
        return float(self.fn(np.asarray(x, dtype=float)[None, :])[0])


def _neg_ackley(X):
    rms = np.sqrt(np.mean(X * X, axis=1))
    cos_term = np.mean(np.cos(2.0 * math.pi * X), axis=1)
    value = -20.0 * np.exp(-0.2 * rms) - np.exp(cos_term) + 20.0 + math.e
    return -value


def _neg_rastrigin(X):
    d = X.shape[1]
    value = 10.0 * d + np.sum(X * X - 10.0 * np.cos(2.0 * math.pi * X), axis=1)
    return -value


def _neg_branin(X):
    x1, x2 = X[:, 0], X[:, 1]
    b = 5.1 / (4.0 * math.pi**2)
    c = 5.0 / math.pi
    t = 1.0 / (8.0 * math.pi)
    value = (x2 - b * x1**2 + c * x1 - 6.0) ** 2 + 10.0 * (1.0 - t) * np.cos(x1) + 10.0
    return -value


def _neg_levy(X):
    w = 1.0 + (X - 1.0) / 4.0
    head = np.sin(math.pi * w[:, 0]) ** 2
    mid = np.sum(
        (w[:, :-1] - 1.0) ** 2 * (1.0 + 10.0 * np.sin(math.pi * w[:, :-1] + 1.0) ** 2),
        axis=1,
    )
    tail = (w[:, -1] - 1.0) ** 2 * (1.0 + np.sin(2.0 * math.pi * w[:, -1]) ** 2)
    return -(head + mid + tail)


BRANIN_OPTIMIZERS = np.array(
    [[-math.pi, 12.275], [math.pi, 2.275], [9.42478, 2.475]]
)


def make_ackley(dim, lower=-5.0, upper=10.0):
    return ObjectiveFn(
        name="ackley",
        dim=dim,
        lower=np.full(dim, float(lower)),
        upper=np.full(dim, float(upper)),
        fn=_neg_ackley,
        known_optimum_value=0.0,
        known_optimizer=np.zeros(dim),
    )


def make_rastrigin(dim, lower=-5.12, upper=5.12):
    return ObjectiveFn(
        name="rastrigin",
        dim=dim,
        lower=np.full(dim, float(lower)),
        upper=np.full(dim, float(upper)),
        fn=_neg_rastrigin,
        known_optimum_value=0.0,
        known_optimizer=np.zeros(dim),
    )


def make_branin():
    return ObjectiveFn(
        name="branin",
        dim=2,
        lower=np.array([-5.0, 0.0]),
        upper=np.array([10.0, 15.0]),
        fn=_neg_branin,
        known_optimum_value=-10.0 / (8.0 * math.pi),
        known_optimizer=np.array([math.pi, 2.275]),
    )


def make_levy1d():
    return ObjectiveFn(
        name="levy1d",
        dim=1,
        lower=np.array([-10.0]),
        upper=np.array([10.0]),
        fn=_neg_levy,
        known_optimum_value=0.0,
        known_optimizer=np.array([1.0]),
    )


_FACTORIES = {
    "ackley": lambda dim, lo, hi: make_ackley(dim, -5.0 if lo is None else lo, 10.0 if hi is None else hi),
    "rastrigin": lambda dim, lo, hi: make_rastrigin(dim, -5.12 if lo is None else lo, 5.12 if hi is None else hi),
    "branin": lambda dim, lo, hi: make_branin(),
    "levy1d": lambda dim, lo, hi: make_levy1d(),
}

OBJECTIVE_NAMES = tuple(sorted(_FACTORIES))


def get_objective(name, dim=None, lower=None, upper=None):
    """Look up a benchmark by name for the CLI and harness.

    ``lower``/``upper`` override the native box for the separable
    functions; fixed-dimension functions ignore ``dim`` mismatches with
    an error.
    """
    if name not in _FACTORIES:
        raise ValueError(f"unknown objective {name!r}; known: {OBJECTIVE_NAMES}")
    if name == "branin":
        if dim not in (None, 2):
            raise ValueError("branin is a 2-dimensional objective")
        return make_branin()
    if name == "levy1d":
        if dim not in (None, 1):
            raise ValueError("levy1d is a 1-dimensional objective")
        return make_levy1d()
    if dim is None:
        raise ValueError(f"objective {name!r} needs an explicit dimension")
    return _FACTORIES[name](int(dim), lower, upper)


@dataclass(frozen=True)
class RegretTrace:
    """Instantaneous regrets and their total over a run."""

    instantaneous: np.ndarray
    cumulative: float


def compute_regret(values, known_optimum_value):
    """Regret trace ``r_t = f(x*) - f(x_t)`` for a sequence of observations."""
    if known_optimum_value is None:
        raise ValueError("regret needs a known optimum value")
    values = check_vector(values, "values")
    regret = float(known_optimum_value) - values
    if np.any(regret < -1e-9):
        raise ValueError("observed value exceeds the declared optimum")
    np.maximum(regret, 0.0, out=regret)
    return RegretTrace(instantaneous=regret, cumulative=float(regret.sum()))
