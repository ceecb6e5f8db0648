"""Stationary covariance kernels for the Gaussian-process surrogate.

Two families are provided: Matern-5/2 (the default) and the squared
exponential.  Lengthscales may be a single shared value or one value
per input dimension; ``outputscale`` is the signal variance, so
``k(x, x) == outputscale`` for every kernel in this module.

Gram matrices are computed through the usual
``|a|^2 + |b|^2 - 2 a.b`` expansion so that large cross-covariance
blocks stay a single BLAS call.
"""

from __future__ import annotations

import numpy as np

from .validation import check_array_2d, check_positive_scalar

__all__ = ["Matern52", "SquaredExponential", "make_kernel", "KERNEL_FAMILIES"]

SQRT5 = np.sqrt(5.0)


def _scaled_sqdist(A, B):
    """Squared distances between rows of pre-scaled A (n,d) and B (m,d)."""
    a2 = np.sum(A * A, axis=1)
    b2 = np.sum(B * B, axis=1)
    d2 = a2[:, None] + b2[None, :] - 2.0 * (A @ B.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


class StationaryKernel:
    """Base class; subclasses define the correlation profile."""

    family = "stationary"

    def __init__(self, lengthscales=0.5, outputscale=1.0):
        ls = np.atleast_1d(np.asarray(lengthscales, dtype=float))
        if ls.ndim != 1 or np.any(ls <= 0.0) or not np.all(np.isfinite(ls)):
            raise ValueError("lengthscales must be positive finite values")
        self.lengthscales = ls
        self.outputscale = check_positive_scalar(outputscale, "outputscale")

    # -- correlation profile, in terms of the squared scaled distance ----
    def _corr(self, d2):
        raise NotImplementedError

    def _dcorr_factor(self, d2):
        """Factor g(d2) such that d corr / d log(lengthscale_k) = g * w_k,

        where w_k is the squared scaled distance contributed by
        dimension k (so the shared-lengthscale gradient uses w = d2).
        """
        raise NotImplementedError

    # -- public surface ---------------------------------------------------
    def __call__(self, X, Z=None):
        """Gram matrix k(X, Z) of shape (n, m); Z=None means k(X, X)."""
        X = check_array_2d(X, "X")
        Z = X if Z is None else check_array_2d(Z, "Z", dim=X.shape[1])
        d2 = _scaled_sqdist(X / self.lengthscales, Z / self.lengthscales)
        return self.outputscale * self._corr(d2)

    def diag(self, X):
        X = check_array_2d(X, "X")
        return np.full(X.shape[0], self.outputscale)

    def pairwise(self, X, Z):
        """Row-wise k(x_i, z_i) for equal-length X and Z."""
        X = check_array_2d(X, "X")
        Z = check_array_2d(Z, "Z", dim=X.shape[1])
        diff = (X - Z) / self.lengthscales
        d2 = np.sum(diff * diff, axis=1)
        return self.outputscale * self._corr(d2)

    def log_gradients(self, X):
        """Gradients of k(X, X) w.r.t. log lengthscales and log outputscale.

        Returns ``(K, dK_dlog_ls, dK_dlog_out)`` where ``dK_dlog_ls`` is a
        list with one (n, n) matrix per lengthscale entry.  Used by the
        marginal-likelihood optimizer; quadratic in n, so callers keep n
        modest.
        """
        X = check_array_2d(X, "X")
        Xs = X / self.lengthscales
        d2 = _scaled_sqdist(Xs, Xs)
        corr = self._corr(d2)
        K = self.outputscale * corr
        g = self.outputscale * self._dcorr_factor(d2)
        grads = []
        if self.lengthscales.shape[0] == 1:
            grads.append(g * d2)
        else:
            for k in range(self.lengthscales.shape[0]):
                w = (Xs[:, k, None] - Xs[None, :, k]) ** 2
                grads.append(g * w)
        return K, grads, K.copy()

    def with_params(self, lengthscales=None, outputscale=None):
        return type(self)(
            lengthscales=self.lengthscales if lengthscales is None else lengthscales,
            outputscale=self.outputscale if outputscale is None else outputscale,
        )

    def get_params(self):
        return {
            "lengthscales": self.lengthscales.copy(),
            "outputscale": self.outputscale,
        }

    def __repr__(self):
        ls = np.array2string(self.lengthscales, precision=4)
        return f"{type(self).__name__}(lengthscales={ls}, outputscale={self.outputscale:.4g})"


class Matern52(StationaryKernel):
    """Matern kernel with smoothness 5/2."""

    family = "matern52"

    def _corr(self, d2):
        u = np.sqrt(d2)
        return (1.0 + SQRT5 * u + (5.0 / 3.0) * d2) * np.exp(-SQRT5 * u)

    def _dcorr_factor(self, d2):
        u = np.sqrt(d2)
        return (5.0 / 3.0) * (1.0 + SQRT5 * u) * np.exp(-SQRT5 * u)


class SquaredExponential(StationaryKernel):
    """Gaussian / RBF kernel."""

    family = "rbf"

    def _corr(self, d2):
        return np.exp(-0.5 * d2)

    def _dcorr_factor(self, d2):
        return np.exp(-0.5 * d2)


KERNEL_FAMILIES = {
    "matern52": Matern52,
    "rbf": SquaredExponential,
}


def make_kernel(family, lengthscales=0.5, outputscale=1.0):
    """Construct a kernel by family name ('matern52' or 'rbf')."""
    try:
        cls = KERNEL_FAMILIES[family]
    except KeyError:
        raise ValueError(
            f"unknown kernel family {family!r}; expected one of {sorted(KERNEL_FAMILIES)}"
        ) from None
    return cls(lengthscales=lengthscales, outputscale=outputscale)
