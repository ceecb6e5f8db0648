"""Markov-chain transition routines that move candidate points toward
regions with a higher probability of winning a pairwise posterior
comparison.

Two routines are provided.  The Metropolis-Hastings step proposes a
Gaussian displacement and accepts it with probability
``min(1, p / (1 - p))`` where ``p`` is the pairwise win probability of
the proposal against the current point; the reflecting boundary keeps
the proposal symmetric so no proposal-ratio correction is needed.  The
Langevin step follows a finite-difference estimate of the gradient of
the log win-probability density plus Gaussian diffusion.

Chains in a batch never interact: each one owns an independently seeded
random stream, so results are order-independent across chains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import ndtr

from .gp import DEGENERACY_EPS, win_prob, win_prob_array
from .validation import check_array_2d, check_unit_cube, check_vector

__all__ = [
    "MhParams",
    "LdParams",
    "ChainBatch",
    "apply_boundary",
    "mh_acceptance",
    "mh_step",
    "grad_log_p",
    "ld_step",
    "run_transitions",
    "chain_cell_sequence",
    "stationary_diagnostics",
    "spawn_chain_rngs",
]

BOUNDARY_POLICIES = ("reflect", "clip")

DEFAULT_PROPOSAL_SIGMA = 0.05
DEFAULT_LD_EPS = 1e-4
# probe at roughly the resolution of interest: much smaller steps push
# the odds-ratio magnitudes into the clamp everywhere (the estimator
# scales like 1/h once the probe win probability is away from 1/2),
# which turns the drift field into sign-only bang-bang dynamics
DEFAULT_FD_STEP = 1e-2
DEFAULT_GRAD_CLIP = 1e3


def _check_boundary(policy):
    if policy not in BOUNDARY_POLICIES:
        raise ValueError(f"boundary must be one of {BOUNDARY_POLICIES}, got {policy!r}")


@dataclass(frozen=True)
class MhParams:
    """Metropolis-Hastings settings (normalized coordinates)."""

    proposal_sigma: float = DEFAULT_PROPOSAL_SIGMA
    n_transitions: int = 1
    boundary: str = "reflect"

    def __post_init__(self):
        if self.proposal_sigma <= 0.0:
            raise ValueError("proposal_sigma must be positive")
        if self.n_transitions < 0:
            raise ValueError("n_transitions must be non-negative")
        _check_boundary(self.boundary)


@dataclass(frozen=True)
class LdParams:
    """Langevin-dynamics settings (normalized coordinates).

    ``step_eps`` of zero is tolerated as an explicit no-op step size;
    the finite-difference probe ``fd_step`` must stay strictly positive
    and defaults to 1% of the domain side (see DEFAULT_FD_STEP).
    """

    step_eps: float = DEFAULT_LD_EPS
    fd_step: float = DEFAULT_FD_STEP
    n_transitions: int = 1
    boundary: str = "reflect"
    grad_clip: float = DEFAULT_GRAD_CLIP

    def __post_init__(self):
        if self.step_eps < 0.0:
            raise ValueError("step_eps must be non-negative")
        if self.fd_step <= 0.0:
            raise ValueError("fd_step must be positive")
        if self.n_transitions < 0:
            raise ValueError("n_transitions must be non-negative")
        if self.grad_clip <= 0.0:
            raise ValueError("grad_clip must be positive")
        _check_boundary(self.boundary)


@dataclass
class ChainBatch:
    """The batch of points being transitioned in one round."""

    points: np.ndarray
    accept_count: int = 0
    proposal_count: int = 0

    def __post_init__(self):
        self.points = check_array_2d(self.points, "points")
        check_unit_cube(self.points, "points")
        if self.accept_count > self.proposal_count:
            raise ValueError("accept_count cannot exceed proposal_count")

    @property
    def acceptance_rate(self):
        if self.proposal_count == 0:
            return math.nan
        return self.accept_count / self.proposal_count


def apply_boundary(X, policy):
    """Map arbitrary coordinates back into [0, 1] by reflection or clipping.

    Reflection folds with period 2 and so handles displacements of any
    size; it is an isometry on each coordinate, which is what keeps the
    Gaussian proposal symmetric.
    """
    _check_boundary(policy)
    if policy == "clip":
        return np.clip(X, 0.0, 1.0)
    folded = np.remainder(X, 2.0)
    return np.where(folded > 1.0, 2.0 - folded, folded)


def mh_acceptance(p):
    """Acceptance probability min(1, p / (1 - p)) with degenerate limits."""
    if p >= 1.0:
        return 1.0
    if p <= 0.0:
        return 0.0
    return min(1.0, p / (1.0 - p))


def _mh_acceptance_array(p):
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = p / (1.0 - p)
    out = np.where(p >= 1.0, 1.0, np.minimum(ratio, 1.0))
    return np.where(p <= 0.0, 0.0, out)


def spawn_chain_rngs(rng, n):
    """Derive ``n`` independent per-chain generators from one source."""
    seeds = rng.integers(0, 2**63 - 1, size=n)
    return [np.random.default_rng(int(s)) for s in seeds]


# ----------------------------------------------------------------------
# single-point transition steps
# ----------------------------------------------------------------------


def mh_step(gp, x, params, rng):
    """One Metropolis-Hastings transition of a single point.

    Draws the acceptance uniform first and the proposal displacement
    second from ``rng``.  Returns ``(x_new, accepted)``.
    """
    x = check_vector(x, "x")
    u = rng.uniform()
    z = rng.standard_normal(x.shape[0])
    proposal = apply_boundary(x + params.proposal_sigma * z, params.boundary)
    p = win_prob(gp.pair_diff_stats(proposal, x))
    if u < mh_acceptance(p):
        return proposal, True
    return x.copy(), False


def _probe_points(X, h):
    """Axis probes ``x + h * sign * e_i`` with the in-domain sign per axis.

    Probes step in the +e_i direction except within ``h`` of the upper
    boundary, where the direction flips (and the caller negates the
    estimate).  Returns ``(probes, signs)`` with probes of shape
    (m * d, d) ordered point-major and signs of shape (m, d).
    """
    m, d = X.shape
    signs = np.where(X + h > 1.0, -1.0, 1.0)
    probes = np.repeat(X, d, axis=0)
    flat = probes.reshape(m, d, d)
    idx = np.arange(d)
    flat[:, idx, idx] += h * signs
    return probes, signs


def _grad_from_probs(p, signs, h, grad_clip):
    """Finite-difference gradient of the log win-probability density.

    Component i is ``sign_i * (p_i / (1 - p_i) - 1) / h``; values are
    clamped to ``grad_clip`` in magnitude, which also covers the poles
    where ``p_i`` degenerates to 0 or 1.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = p / (1.0 - p)
    raw = np.where(p >= 1.0, np.inf, (ratio - 1.0) / h)
    raw = np.where(p <= 0.0, -np.inf, raw)
    return np.clip(signs * raw, -grad_clip, grad_clip)


def grad_log_p(gp, x, h, grad_clip=DEFAULT_GRAD_CLIP):
    """Per-axis gradient estimate used by the Langevin step."""
    x = check_vector(x, "x")
    probes, signs = _probe_points(x[None, :], h)
    mean_diff, var_diff = gp.pair_diff_stats_batch(
        probes, np.repeat(x[None, :], x.shape[0], axis=0)
    )
    p = win_prob_array(mean_diff, var_diff)
    return _grad_from_probs(p, signs[0], h, grad_clip)


def ld_step(gp, x, params, rng):
    """One Langevin transition: drift along the estimated gradient plus
    ``sqrt(2 * eps)`` Gaussian diffusion.

    The diffusion draw is taken from ``rng`` before the (deterministic)
    gradient estimate.
    """
    x = check_vector(x, "x")
    z = rng.standard_normal(x.shape[0])
    grad = grad_log_p(gp, x, params.fd_step, params.grad_clip)
    step = params.step_eps * grad + math.sqrt(2.0 * params.step_eps) * z
    return apply_boundary(x + step, params.boundary)


# ----------------------------------------------------------------------
# batched transition loop
# ----------------------------------------------------------------------


def run_transitions(gp, batch, routine, params, rng):
    """Apply ``params.n_transitions`` steps independently to each chain.

    Per-chain randomness comes from streams spawned off ``rng`` (see
    :func:`spawn_chain_rngs`), with the same draw order as the
    single-point steps, so a sequential re-derivation with
    :func:`mh_step` / :func:`ld_step` reproduces the batch.  The linear
    algebra is vectorized across chains.
    """
    if routine not in ("mh", "ld"):
        raise ValueError(f"routine must be 'mh' or 'ld', got {routine!r}")
    expected = MhParams if routine == "mh" else LdParams
    if not isinstance(params, expected):
        raise TypeError(f"routine {routine!r} needs {expected.__name__}")
    m, d = batch.points.shape
    n_steps = params.n_transitions
    if n_steps == 0 or m == 0:
        return replace(batch, points=batch.points.copy())

    rngs = spawn_chain_rngs(rng, m)
    X = batch.points.copy()
    accept = batch.accept_count
    proposals = batch.proposal_count

    _, B, mean = gp.cross_terms(X)
    for _ in range(n_steps):
        if routine == "mh":
            U = np.array([r.uniform() for r in rngs])
            Z = np.stack([r.standard_normal(d) for r in rngs])
            P = apply_boundary(X + params.proposal_sigma * Z, params.boundary)
            _, Bp, mean_p = gp.cross_terms(P)
            mean_diff, var_diff = gp._pair_from_cross(P, Bp, mean_p, X, B, mean)
            alpha = _mh_acceptance_array(win_prob_array(mean_diff, var_diff))
            acc = U < alpha
            X[acc] = P[acc]
            B[:, acc] = Bp[:, acc]
            mean[acc] = mean_p[acc]
            accept += int(acc.sum())
            proposals += m
        else:
            Z = np.stack([r.standard_normal(d) for r in rngs])
            probes, signs = _probe_points(X, params.fd_step)
            _, Bq, mean_q = gp.cross_terms(probes)
            mean_diff, var_diff = gp._pair_from_cross(
                probes,
                Bq,
                mean_q,
                np.repeat(X, d, axis=0),
                np.repeat(B, d, axis=1),
                np.repeat(mean, d),
            )
            p = win_prob_array(mean_diff, var_diff).reshape(m, d)
            grad = _grad_from_probs(p, signs, params.fd_step, params.grad_clip)
            step = params.step_eps * grad + math.sqrt(2.0 * params.step_eps) * Z
            X = apply_boundary(X + step, params.boundary)
            _, B, mean = gp.cross_terms(X)
    return ChainBatch(points=X, accept_count=accept, proposal_count=proposals)


# ----------------------------------------------------------------------
# long-chain diagnostics
# ----------------------------------------------------------------------


def chain_cell_sequence(gp, grid, routine, params, n_steps, rng):
    """Per-step grid-cell indices visited by one long chain.

    For the Metropolis-Hastings routine the chain lives on the grid
    itself: continuous proposals are snapped to the nearest grid point
    before the accept/reject decision.  The Langevin routine moves
    continuously and each position is binned to its nearest grid cell.
    Chains start from the cell with the highest posterior mean,
    mirroring how the optimization loop starts transitions from selected
    candidates rather than from uniform points.
    """
    grid = check_array_2d(grid, "grid")
    n_steps = int(n_steps)
    if n_steps <= 0:
        raise ValueError("n_steps must be positive")
    tree = cKDTree(grid)
    if routine == "mh":
        return _mh_grid_chain(gp, grid, tree, params, n_steps, rng)
    if routine == "ld":
        positions = _ld_chain_positions(gp, grid, params, n_steps, rng)
        return tree.query(positions, k=1)[1].astype(np.int64)
    raise ValueError(f"routine must be 'mh' or 'ld', got {routine!r}")


def stationary_diagnostics(gp, grid, routine, params, n_steps, burn_in, rng):
    """Visit-frequency histogram of one long chain over a finite grid.

    Runs :func:`chain_cell_sequence`, discards ``burn_in`` initial steps
    and returns normalized frequencies over the rows of ``grid``.
    """
    grid = check_array_2d(grid, "grid")
    n_steps = int(n_steps)
    burn_in = int(burn_in)
    if burn_in < 0:
        raise ValueError("burn_in must be non-negative")
    if n_steps <= burn_in:
        raise ValueError("n_steps must exceed burn_in")
    cells = chain_cell_sequence(gp, grid, routine, params, n_steps, rng)
    visits = np.bincount(cells[burn_in:], minlength=grid.shape[0])
    return visits / visits.sum()


def _mh_grid_chain(gp, grid, tree, params, n_steps, rng):
    if not isinstance(params, MhParams):
        raise TypeError("grid diagnostics for 'mh' need MhParams")
    n_grid, d = grid.shape
    _, B, mean = gp.cross_terms(grid)
    rows = np.ascontiguousarray(B.T)
    scaled = grid / gp.kernel.lengthscales
    outputscale = gp.kernel.outputscale
    corr = gp.kernel._corr
    sigma = params.proposal_sigma
    boundary = params.boundary
    eps = DEGENERACY_EPS

    state = int(np.argmax(mean))
    cells = np.empty(n_steps, dtype=np.int64)
    for step in range(n_steps):
        u = rng.uniform()
        z = rng.standard_normal(d)
        proposal = apply_boundary(grid[state] + sigma * z, boundary)
        cand = int(tree.query(proposal, k=1)[1])
        if cand != state:
            diff = scaled[cand] - scaled[state]
            prior = 2.0 * outputscale * (1.0 - corr(float(diff @ diff)))
            br = rows[cand] - rows[state]
            var = max(prior - float(br @ br), 0.0)
            mean_diff = mean[cand] - mean[state]
            if var < eps:
                p = 0.5 if abs(mean_diff) < eps else (1.0 if mean_diff > 0 else 0.0)
            else:
                p = ndtr(mean_diff / math.sqrt(var))
            if u < mh_acceptance(p):
                state = cand
        cells[step] = state
    return cells


def _ld_chain_positions(gp, grid, params, n_steps, rng):
    if not isinstance(params, LdParams):
        raise TypeError("grid diagnostics for 'ld' need LdParams")
    x = grid[int(np.argmax(gp.predict(grid)))].copy()
    positions = np.empty((n_steps, grid.shape[1]))
    for step in range(n_steps):
        x = ld_step(gp, x, params, rng)
        positions[step] = x
    return positions
