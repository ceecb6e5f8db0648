"""Exact Thompson sampling over finite candidate sets.

Serves both as a baseline acquisition rule and as the Monte-Carlo
reference distribution against which the chain diagnostics are checked.
Selection draws one joint sample of the posterior over all candidates
and takes its argmax; ties resolve to the lowest index, which is a
measure-zero event but keeps runs reproducible.
"""

from __future__ import annotations

import numpy as np

from .validation import check_array_2d, check_vector

__all__ = [
    "MAX_JOINT_CANDIDATES",
    "exact_ts_select",
    "select_batch",
    "ts_distribution_mc",
    "tv_distance",
]

MAX_JOINT_CANDIDATES = 4096


def _check_candidates(candidates):
    candidates = check_array_2d(candidates, "candidates")
    if candidates.shape[0] == 0:
        raise ValueError("candidate set is empty")
    if candidates.shape[0] > MAX_JOINT_CANDIDATES:
        raise ValueError(
            f"{candidates.shape[0]} candidates exceed the joint-sampling cap "
            f"of {MAX_JOINT_CANDIDATES}"
        )
    return candidates


def exact_ts_select(gp, candidates, rng):
    """Index of the argmax of one joint posterior draw over candidates."""
    candidates = _check_candidates(candidates)
    draw = gp.sample_joint(candidates, rng)
    return int(np.argmax(draw))


def select_batch(gp, candidates, batch_size, rngs):
    """Indices from ``batch_size`` independent joint draws over one pool.

    The posterior over the pool is factorized once and reused; each slot
    consumes its own generator from ``rngs``, and duplicate selections
    are allowed.
    """
    candidates = _check_candidates(candidates)
    if len(rngs) != batch_size:
        raise ValueError("need one random stream per batch slot")
    mean, L = gp.joint_sampler(candidates)
    picks = []
    for rng in rngs:
        draw = mean + L @ rng.standard_normal(mean.shape[0])
        picks.append(int(np.argmax(draw)))
    return picks


def ts_distribution_mc(gp, candidates, n_samples, rng, chunk_size=8192):
    """Empirical Thompson-sampling selection frequencies.

    Equivalent to tallying ``n_samples`` independent
    :func:`exact_ts_select` draws, but the posterior is factorized once
    and the draws run in vectorized chunks.  Frequencies sum to one.
    """
    candidates = _check_candidates(candidates)
    n_samples = int(n_samples)
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    mean, L = gp.joint_sampler(candidates)
    m = mean.shape[0]
    counts = np.zeros(m, dtype=np.int64)
    done = 0
    while done < n_samples:
        take = min(chunk_size, n_samples - done)
        draws = mean[:, None] + L @ rng.standard_normal((m, take))
        counts += np.bincount(np.argmax(draws, axis=0), minlength=m)
        done += take
    return counts / float(n_samples)


def tv_distance(p, q):
    """Total-variation distance between two discrete distributions."""
    p = check_vector(p, "p")
    q = check_vector(q, "q", length=p.shape[0])
    for name, vec in (("p", p), ("q", q)):
        if abs(vec.sum() - 1.0) > 1e-9 or np.any(vec < -1e-12):
            raise ValueError(f"{name} is not a probability vector")
    return 0.5 * float(np.sum(np.abs(p - q)))
