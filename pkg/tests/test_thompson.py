import math

import numpy as np
import pytest

from chainbo.gp import GaussianProcess, win_prob
from chainbo.kernels import Matern52
from chainbo.thompson import (
    MAX_JOINT_CANDIDATES,
    exact_ts_select,
    select_batch,
    ts_distribution_mc,
    tv_distance,
)
from chainbo.transitions import spawn_chain_rngs

from conftest import random_posterior


def test_single_candidate_always_selected():
    rng = np.random.default_rng(0)
    gp = random_posterior(rng, n=10, d=2)
    assert exact_ts_select(gp, rng.uniform(size=(1, 2)), rng) == 0


def test_deterministic_limit_selects_maximal_mean():
    # candidates are the training inputs of a near-noiseless fit, so the
    # posterior is essentially a point mass at the observations
    rng = np.random.default_rng(1)
    X = rng.uniform(size=(6, 2))
    y = rng.standard_normal(6)
    gp = GaussianProcess(
        kernel=Matern52(lengthscales=0.4, outputscale=1.0), noise_variance=1e-8
    ).fit(X, y)
    for _ in range(50):
        assert exact_ts_select(gp, X, rng) == int(np.argmax(y))


def test_symmetric_candidates_selected_uniformly():
    # three mutually distant points under a zero-mean posterior draw
    # independent equal Gaussians
    gp = GaussianProcess(
        kernel=Matern52(lengthscales=0.01, outputscale=1.0), noise_variance=1e-4
    ).fit([[0.5, 0.5]], [0.0])
    candidates = np.array([[0.1, 0.1], [0.9, 0.1], [0.5, 0.9]])
    rng = np.random.default_rng(2)
    n = 100_000
    freq = ts_distribution_mc(gp, candidates, n, rng)
    se = math.sqrt((1 / 3) * (2 / 3) / n)
    np.testing.assert_allclose(freq, 1 / 3, atol=3 * se)


def test_mc_distribution_sums_to_one():
    rng = np.random.default_rng(3)
    gp = random_posterior(rng, n=15, d=2)
    freq = ts_distribution_mc(gp, rng.uniform(size=(40, 2)), 20_000, rng)
    assert abs(freq.sum() - 1.0) < 1e-12
    assert np.all(freq >= 0.0)


def test_two_candidates_match_pairwise_win_probability():
    rng = np.random.default_rng(4)
    for _ in range(5):
        gp = random_posterior(rng, n=25, d=3)
        pair = rng.uniform(size=(2, 3))
        p = win_prob(gp.pair_diff_stats(pair[0], pair[1]))
        n = 200_000
        freq = ts_distribution_mc(gp, pair, n, rng)
        se = math.sqrt(max(p * (1 - p), 1e-12) / n)
        assert abs(freq[0] - p) < 3 * se + 1e-6


def test_mc_noise_is_binomial_across_trials():
    rng = np.random.default_rng(5)
    gp = random_posterior(rng, n=20, d=2)
    candidates = rng.uniform(size=(30, 2))
    n = 50_000
    trials = np.array([ts_distribution_mc(gp, candidates, n, rng) for _ in range(10)])
    p_hat = trials.mean(axis=0)
    mask = p_hat > 1e-3
    ratio = trials.var(axis=0, ddof=1)[mask] / (p_hat * (1 - p_hat) / n)[mask]
    # chi-square noise of the per-cell ratio averages out across cells
    assert 0.5 < ratio.mean() < 1.6


def test_selection_is_exchangeable_under_permutation():
    rng = np.random.default_rng(6)
    gp = random_posterior(rng, n=20, d=2)
    candidates = rng.uniform(size=(6, 2))
    perm = np.array([3, 0, 5, 1, 4, 2])
    n = 200_000
    freq = ts_distribution_mc(gp, candidates, n, np.random.default_rng(7))
    freq_perm = ts_distribution_mc(gp, candidates[perm], n, np.random.default_rng(8))
    unpermuted = np.empty_like(freq_perm)
    unpermuted[perm] = freq_perm
    se = np.sqrt(np.maximum(freq * (1 - freq), 1e-12) / n)
    assert np.all(np.abs(freq - unpermuted) < 3 * np.sqrt(2) * se + 1e-4)


def test_select_batch_reuses_one_factorization():
    rng = np.random.default_rng(9)
    gp = random_posterior(rng, n=15, d=2)
    candidates = rng.uniform(size=(50, 2))
    rngs = spawn_chain_rngs(np.random.default_rng(10), 4)
    picks = select_batch(gp, candidates, 4, rngs)
    assert len(picks) == 4
    assert all(0 <= p < 50 for p in picks)
    # each slot replays as an independent exact selection
    mean, L = gp.joint_sampler(candidates)
    for pick, slot_rng in zip(picks, spawn_chain_rngs(np.random.default_rng(10), 4)):
        draw = mean + L @ slot_rng.standard_normal(50)
        assert pick == int(np.argmax(draw))


def test_candidate_cap_and_empty_set_errors():
    rng = np.random.default_rng(11)
    gp = random_posterior(rng, n=5, d=2)
    with pytest.raises(ValueError, match="exceed"):
        exact_ts_select(gp, np.zeros((MAX_JOINT_CANDIDATES + 1, 2)), rng)
    with pytest.raises(ValueError, match="empty"):
        exact_ts_select(gp, np.zeros((0, 2)), rng)
    with pytest.raises(ValueError):
        ts_distribution_mc(gp, rng.uniform(size=(3, 2)), 0, rng)


def test_tv_distance_reference_values():
    assert tv_distance([1.0, 0.0], [0.0, 1.0]) == 1.0
    assert tv_distance([0.25, 0.75], [0.25, 0.75]) == 0.0
    assert tv_distance([0.6, 0.4], [0.5, 0.5]) == pytest.approx(0.1, abs=1e-15)


def test_tv_distance_input_validation():
    with pytest.raises(ValueError):
        tv_distance([0.5, 0.5], [0.5, 0.5, 0.0])
    with pytest.raises(ValueError):
        tv_distance([0.9, 0.3], [0.5, 0.5])
