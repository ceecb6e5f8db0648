"""Gaussian-process regression on the normalized unit cube.

The estimator keeps a Cholesky factor of ``K + noise * I`` and the solved
observation vector; every downstream quantity (posterior moments, pairwise
difference statistics, joint samples) is derived from that factor, never
from a fresh matrix inverse.

Conventions: inputs live in [0, 1]^d, observations are standardized by the
caller (the harness does this at its boundary), and the prior mean is zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import ndtr

from .kernels import Matern52, StationaryKernel, make_kernel
from .validation import (
    check_array_2d,
    check_matching_lengths,
    check_positive_scalar,
    check_vector,
)

__all__ = [
    "FactorizationError",
    "PairStats",
    "GaussianProcess",
    "HyperparameterBounds",
    "fit_hyperparams",
    "standard_normal_cdf",
    "win_prob",
    "win_prob_array",
    "DEGENERACY_EPS",
]

# Relative jitter ladder: start tiny, escalate by 10x, give up at 1e-6.
_JITTER_START = 1e-10
_JITTER_MAX = 1e-6

DEGENERACY_EPS = 1e-12


class FactorizationError(np.linalg.LinAlgError):
    """Cholesky failed even after maximum diagonal jitter."""


def chol_with_jitter(A, scale):
    """Lower Cholesky factor of A, escalating diagonal jitter on failure.

    Jitter starts at 1e-10 * scale and grows tenfold up to 1e-6 * scale
    (``scale`` is the kernel outputscale, keeping the policy dimensionless).
    Returns ``(L, jitter_used)``.
    """
    jitter = 0.0
    n = A.shape[0]
    while True:
        try:
            M = A if jitter == 0.0 else A + jitter * np.eye(n)
            return np.linalg.cholesky(M), jitter
        except np.linalg.LinAlgError:
            jitter = _JITTER_START * scale if jitter == 0.0 else jitter * 10.0
            if jitter > _JITTER_MAX * scale * (1.0 + 1e-12):
                raise FactorizationError(
                    f"Cholesky failed for {n}x{n} matrix even with jitter "
                    f"{_JITTER_MAX * scale:.3g}"
                ) from None


def standard_normal_cdf(z):
    """Phi(z), the standard normal CDF (vectorized, error < 1e-12)."""
    return ndtr(z)


@dataclass(frozen=True)
class PairStats:
    """Posterior mean and variance of f(x_p) - f(x_o).

    ``var_diff`` is clamped to be non-negative at construction.
    """

    mean_diff: float
    var_diff: float

    def __post_init__(self):
        object.__setattr__(self, "mean_diff", float(self.mean_diff))
        object.__setattr__(self, "var_diff", max(float(self.var_diff), 0.0))


def win_prob(stats, degeneracy_eps=DEGENERACY_EPS):
    """P(f(x_p) > f(x_o)) = Phi(mean_diff / sqrt(var_diff)).

    Degenerate pairs (var_diff below ``degeneracy_eps``) resolve to 0.5
    when the means are indistinguishable, otherwise to whichever point
    has the larger mean.
    """
    if stats.var_diff < degeneracy_eps:
        if abs(stats.mean_diff) < degeneracy_eps:
            return 0.5
        return 1.0 if stats.mean_diff > 0.0 else 0.0
    p = float(ndtr(stats.mean_diff / math.sqrt(stats.var_diff)))
    return min(max(p, 0.0), 1.0)


def win_prob_array(mean_diff, var_diff, degeneracy_eps=DEGENERACY_EPS):
    """Vectorized :func:`win_prob` over aligned mean/variance arrays."""
    mean_diff = np.asarray(mean_diff, dtype=float)
    var_diff = np.asarray(var_diff, dtype=float)
    degenerate = var_diff < degeneracy_eps
    safe_var = np.where(degenerate, 1.0, var_diff)
    p = ndtr(mean_diff / np.sqrt(safe_var))
    if np.any(degenerate):
        resolved = np.where(
            np.abs(mean_diff) < degeneracy_eps,
            0.5,
            np.where(mean_diff > 0.0, 1.0, 0.0),
        )
        p = np.where(degenerate, resolved, p)
    return np.clip(p, 0.0, 1.0)


class GaussianProcess:
    """GP regressor with a cached Cholesky factorization.

    Parameters
    ----------
    kernel : StationaryKernel, optional
        Defaults to Matern-5/2 with lengthscale 0.5 and outputscale 1.
    noise_variance : float
        Observation noise variance added to the Gram diagonal.

    Fitted attributes follow the usual trailing-underscore convention:
    ``X_``, ``y_``, ``L_`` (lower Cholesky of K + noise*I), ``alpha_``
    (``(K + noise*I)^{-1} y``) and ``jitter_``.
    """

    def __init__(self, kernel=None, noise_variance=1e-4):
        self.kernel = kernel if kernel is not None else Matern52()
        self.noise_variance = noise_variance

    # ------------------------------------------------------------------
    def fit(self, X, y):
        """Factorize the training covariance; returns self."""
        if not isinstance(self.kernel, StationaryKernel):
            raise TypeError("kernel must be a StationaryKernel instance")
        noise = check_positive_scalar(self.noise_variance, "noise_variance")
        X = check_array_2d(X, "X")
        y = check_vector(y, "y")
        check_matching_lengths(X, y)
        if X.shape[0] == 0:
            raise ValueError("cannot fit a posterior on an empty dataset")
        A = self.kernel(X)
        A[np.diag_indices_from(A)] += noise
        self.L_, self.jitter_ = chol_with_jitter(A, self.kernel.outputscale)
        self.alpha_ = cho_solve((self.L_, True), y, check_finite=False)
        self.X_ = X
        self.y_ = y
        self._cache_scaled_inputs()
        return self

    def _cache_scaled_inputs(self):
        self._Xs_ = self.X_ / self.kernel.lengthscales
        self._xs2_ = np.einsum("ij,ij->i", self._Xs_, self._Xs_)

    def _cross_cov(self, Z):
        """k(X_train, Z) using the cached scaled training inputs."""
        Zs = Z / self.kernel.lengthscales
        d2 = (
            self._xs2_[:, None]
            + np.einsum("ij,ij->i", Zs, Zs)[None, :]
            - 2.0 * (self._Xs_ @ Zs.T)
        )
        np.maximum(d2, 0.0, out=d2)
        return self.kernel.outputscale * self.kernel._corr(d2)

    def extended(self, X_new, y_new):
        """Posterior with appended observations via a block-Cholesky
        extension of the cached factor.

        Produces the same posterior as refitting from scratch with this
        kernel and noise (up to factorization round-off) at O(n^2 m)
        cost instead of O(n^3); used by the harness between full refits.
        """
        self._check_fitted()
        X_new = check_array_2d(X_new, "X_new", dim=self.dim)
        y_new = check_vector(y_new, "y_new")
        check_matching_lengths(X_new, y_new)
        n, m = self.n_points, X_new.shape[0]
        Kno = self._cross_cov(X_new)
        B = solve_triangular(self.L_, Kno, lower=True, check_finite=False)
        S = self.kernel(X_new) - B.T @ B
        S[np.diag_indices_from(S)] += self.noise_variance + self.jitter_
        Ls, extra = chol_with_jitter(0.5 * (S + S.T), self.kernel.outputscale)
        L_ext = np.zeros((n + m, n + m))
        L_ext[:n, :n] = self.L_
        L_ext[n:, :n] = B.T
        L_ext[n:, n:] = Ls
        out = GaussianProcess(kernel=self.kernel, noise_variance=self.noise_variance)
        out.X_ = np.vstack([self.X_, X_new])
        out.y_ = np.concatenate([self.y_, y_new])
        out.L_ = L_ext
        out.jitter_ = max(self.jitter_, extra)
        out.alpha_ = cho_solve((L_ext, True), out.y_, check_finite=False)
        out._cache_scaled_inputs()
        return out

    def with_observations(self, y):
        """Same inputs and factorization, different observation vector.

        Covers re-standardized observations: the factor depends only on
        the inputs and noise, so only the solved vector changes.
        """
        self._check_fitted()
        y = check_vector(y, "y", length=self.n_points)
        out = GaussianProcess(kernel=self.kernel, noise_variance=self.noise_variance)
        out.X_ = self.X_
        out.y_ = y
        out.L_ = self.L_
        out.jitter_ = self.jitter_
        out.alpha_ = cho_solve((self.L_, True), y, check_finite=False)
        out._Xs_ = self._Xs_
        out._xs2_ = self._xs2_
        return out

    @property
    def n_points(self):
        return self.X_.shape[0]

    @property
    def dim(self):
        return self.X_.shape[1]

    def _check_fitted(self):
        if not hasattr(self, "L_"):
            raise RuntimeError("this GaussianProcess instance is not fitted yet")

    # ------------------------------------------------------------------
    def predict(self, X, return_var=False):
        """Posterior mean (and marginal variance) at query points."""
        self._check_fitted()
        X = check_array_2d(X, "X", dim=self.dim)
        Kx = self._cross_cov(X)
        mean = Kx.T @ self.alpha_
        if not return_var:
            return mean
        B = solve_triangular(self.L_, Kx, lower=True, check_finite=False)
        var = self.kernel.diag(X) - np.einsum("ij,ij->j", B, B)
        np.maximum(var, 0.0, out=var)
        return mean, var

    def cross_terms(self, X):
        """Cross covariance, its triangular solve, and posterior means.

        Returns ``(Kx, B, mean)`` with ``Kx = k(X_train, X)`` of shape
        (n, m), ``B = L^{-1} Kx`` and ``mean = Kx.T alpha``.  This is the
        shared workhorse behind the pairwise statistics and lets chain
        code cache the current-point column across transition steps.
        """
        self._check_fitted()
        X = check_array_2d(X, "X", dim=self.dim)
        Kx = self._cross_cov(X)
        B = solve_triangular(self.L_, Kx, lower=True, check_finite=False)
        return Kx, B, Kx.T @ self.alpha_

    # ------------------------------------------------------------------
    def pair_diff_stats(self, x_p, x_o):
        """Statistics of f(x_p) - f(x_o) under the joint posterior."""
        x_p = check_array_2d(x_p, "x_p", dim=self.dim)
        x_o = check_array_2d(x_o, "x_o", dim=self.dim)
        mean, var = self.pair_diff_stats_batch(x_p, x_o)
        return PairStats(mean_diff=mean[0], var_diff=var[0])

    def pair_diff_stats_batch(self, Xp, Xo):
        """Vectorized pair statistics for row-aligned point pairs.

        Returns ``(mean_diff, var_diff)`` arrays of shape (m,), with
        ``var_diff`` clamped to be non-negative.
        """
        self._check_fitted()
        Xp = check_array_2d(Xp, "Xp", dim=self.dim)
        Xo = check_array_2d(Xo, "Xo", dim=self.dim)
        if Xp.shape[0] != Xo.shape[0]:
            raise ValueError("Xp and Xo must pair up row by row")
        _, Bp, mean_p = self.cross_terms(Xp)
        _, Bo, mean_o = self.cross_terms(Xo)
        return self._pair_from_cross(Xp, Bp, mean_p, Xo, Bo, mean_o)

    def _pair_from_cross(self, Xp, Bp, mean_p, Xo, Bo, mean_o):
        """Pair statistics from precomputed cross terms (see cross_terms)."""
        prior = (
            self.kernel.diag(Xp)
            + self.kernel.diag(Xo)
            - 2.0 * self.kernel.pairwise(Xp, Xo)
        )
        D = Bp - Bo
        var = prior - np.einsum("ij,ij->j", D, D)
        np.maximum(var, 0.0, out=var)
        return mean_p - mean_o, var

    # ------------------------------------------------------------------
    def posterior_covariance(self, X):
        """Joint posterior mean vector and covariance matrix over X."""
        self._check_fitted()
        X = check_array_2d(X, "X", dim=self.dim)
        Kx = self._cross_cov(X)
        B = solve_triangular(self.L_, Kx, lower=True, check_finite=False)
        C = self.kernel(X) - B.T @ B
        C = 0.5 * (C + C.T)
        return Kx.T @ self.alpha_, C

    def joint_sampler(self, X):
        """Factorized joint posterior over X for repeated sampling.

        Returns ``(mean, L_post)``; a draw is ``mean + L_post @ z``.
        """
        mean, C = self.posterior_covariance(X)
        L, _ = chol_with_jitter(C, self.kernel.outputscale)
        return mean, L

    def sample_joint(self, X, rng):
        """One draw from the joint posterior over the rows of X."""
        mean, L = self.joint_sampler(X)
        return mean + L @ rng.standard_normal(mean.shape[0])

    # ------------------------------------------------------------------
    def log_marginal_likelihood(self):
        self._check_fitted()
        n = self.n_points
        return (
            -0.5 * float(self.y_ @ self.alpha_)
            - float(np.sum(np.log(np.diag(self.L_))))
            - 0.5 * n * math.log(2.0 * math.pi)
        )

    # -- sklearn-style parameter plumbing --------------------------------
    def get_params(self, deep=True):
        return {"kernel": self.kernel, "noise_variance": self.noise_variance}

    def set_params(self, **params):
        for key, value in params.items():
            if key not in ("kernel", "noise_variance"):
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self

    def __repr__(self):
        return (
            f"GaussianProcess(kernel={self.kernel!r}, "
            f"noise_variance={self.noise_variance:.4g})"
        )


# ----------------------------------------------------------------------
# ML-II hyperparameter fitting
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class HyperparameterBounds:
    """Box constraints for ML-II, in normalized input space."""

    lengthscale: tuple = (5e-3, 10.0)
    outputscale: tuple = (5e-2, 20.0)
    noise: tuple = (1e-6, 1e-1)


def _lml_value(X, y, kernel, noise):
    """Log marginal likelihood only (cheap path for rejected steps)."""
    n = X.shape[0]
    A = kernel(X)
    A[np.diag_indices_from(A)] += noise
    L, _ = chol_with_jitter(A, kernel.outputscale)
    alpha = cho_solve((L, True), y)
    return (
        -0.5 * float(y @ alpha)
        - float(np.sum(np.log(np.diag(L))))
        - 0.5 * n * math.log(2.0 * math.pi)
    )


def _lml_value_and_grad(X, y, kernel, noise):
    """Log marginal likelihood and its gradient in log-parameter space.

    Gradient order: [log lengthscales..., log outputscale, log noise].
    """
    n = X.shape[0]
    K, dK_ls, dK_out = kernel.log_gradients(X)
    A = K + noise * np.eye(n)
    L, _ = chol_with_jitter(A, kernel.outputscale)
    alpha = cho_solve((L, True), y)
    lml = (
        -0.5 * float(y @ alpha)
        - float(np.sum(np.log(np.diag(L))))
        - 0.5 * n * math.log(2.0 * math.pi)
    )
    A_inv = cho_solve((L, True), np.eye(n))
    W = np.outer(alpha, alpha) - A_inv
    grad = [0.5 * float(np.sum(W * dK)) for dK in dK_ls]
    grad.append(0.5 * float(np.sum(W * dK_out)))
    grad.append(0.5 * float(np.trace(W)) * noise)
    return lml, np.asarray(grad)


def fit_hyperparams(
    X,
    y,
    family="matern52",
    max_iter=50,
    initial_kernel=None,
    initial_noise=1e-2,
    bounds=None,
):
    """Maximize the log marginal likelihood by projected gradient ascent.

    Works in log-space over (lengthscales, outputscale, noise) with
    analytic gradients and a backtracking step size; non-improving steps
    are rejected, so the result never has a lower marginal likelihood
    than the starting kernel.  ``max_iter`` counts attempted steps, and
    ``max_iter=0`` returns the initial configuration unchanged.

    Returns ``(kernel, noise_variance)``.
    """
    X = check_array_2d(X, "X")
    y = check_vector(y, "y")
    check_matching_lengths(X, y)
    if X.shape[0] < 2:
        raise ValueError("hyperparameter fitting needs at least 2 points")
    bounds = bounds if bounds is not None else HyperparameterBounds()

    if initial_kernel is None:
        ls0 = min(max(0.5 * math.sqrt(X.shape[1]), bounds.lengthscale[0]), bounds.lengthscale[1])
        kernel = make_kernel(family, lengthscales=ls0, outputscale=1.0)
    else:
        kernel = initial_kernel
    noise = float(initial_noise)

    n_ls = kernel.lengthscales.shape[0]
    lo = np.log(
        np.concatenate(
            [
                np.full(n_ls, bounds.lengthscale[0]),
                [bounds.outputscale[0], bounds.noise[0]],
            ]
        )
    )
    hi = np.log(
        np.concatenate(
            [
                np.full(n_ls, bounds.lengthscale[1]),
                [bounds.outputscale[1], bounds.noise[1]],
            ]
        )
    )

    def unpack(theta):
        ls = np.exp(theta[:n_ls])
        return kernel.with_params(lengthscales=ls, outputscale=float(np.exp(theta[n_ls]))), float(
            np.exp(theta[n_ls + 1])
        )

    theta = np.clip(
        np.log(np.concatenate([kernel.lengthscales, [kernel.outputscale, noise]])),
        lo,
        hi,
    )
    # until a step improves the likelihood, the initial configuration is
    # returned exactly as given (no log/exp round trip)
    kern_best, noise_best = kernel, noise

    try:
        best, grad = _lml_value_and_grad(X, y, *unpack(theta))
    except FactorizationError:
        return kern_best, noise_best

    step = 0.1
    for _ in range(int(max_iter)):
        trial = np.clip(theta + step * grad, lo, hi)
        if np.allclose(trial, theta):
            break
        kern_t, noise_t = unpack(trial)
        try:
            lml_t = _lml_value(X, y, kern_t, noise_t)
        except FactorizationError:
            step *= 0.5
            continue
        if lml_t > best:
            theta, best = trial, lml_t
            kern_best, noise_best = kern_t, noise_t
            _, grad = _lml_value_and_grad(X, y, kern_t, noise_t)
            step = min(step * 1.5, 10.0)
        else:
            step *= 0.5
            if step < 1e-8:
                break
    return kern_best, noise_best
