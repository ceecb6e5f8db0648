"""Shared helpers: posterior factories and dense-solve oracles.

The oracles deliberately avoid the package's Cholesky code path: they
solve against the raw covariance matrix with general-purpose LAPACK
routines so that agreement is a real cross-check.
"""

import os

# the workload is dominated by skinny solves where BLAS thread fan-out
# costs far more than it saves; must be set before numpy loads OpenBLAS
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import numpy as np

from chainbo.gp import GaussianProcess
from chainbo.kernels import make_kernel


def random_posterior(rng, n=30, d=3, family="matern52", noise=None, lengthscale=None,
                     outputscale=None):
    """GP fitted to a draw from its own prior on random unit-cube points."""
    X = rng.uniform(size=(n, d))
    ls = rng.uniform(0.2, 0.6) if lengthscale is None else lengthscale
    out = rng.uniform(0.5, 2.0) if outputscale is None else outputscale
    nz = 10 ** rng.uniform(-4, -1) if noise is None else noise
    kernel = make_kernel(family, lengthscales=ls, outputscale=out)
    K = kernel(X) + 1e-10 * np.eye(n)
    f = np.linalg.cholesky(K) @ rng.standard_normal(n)
    y = f + np.sqrt(nz) * rng.standard_normal(n)
    return GaussianProcess(kernel=kernel, noise_variance=nz).fit(X, y)


def dense_posterior_oracle(X, y, kernel, noise, Xq):
    """Posterior mean vector and covariance matrix by direct dense solve."""
    X = np.asarray(X, dtype=float)
    Xq = np.asarray(Xq, dtype=float)
    A = kernel(X)
    A[np.diag_indices_from(A)] += noise
    Kq = kernel(X, Xq)
    mean = Kq.T @ np.linalg.solve(A, np.asarray(y, dtype=float))
    cov = kernel(Xq) - Kq.T @ np.linalg.solve(A, Kq)
    return mean, cov


def oracle_from_gp(gp, Xq):
    """Dense-solve oracle evaluated with a fitted model's own data."""
    return dense_posterior_oracle(
        gp.X_, gp.y_, gp.kernel, gp.noise_variance, Xq
    )
