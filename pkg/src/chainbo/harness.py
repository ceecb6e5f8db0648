"""Experiment harness: the outer optimization loop, multi-seed
orchestration, persistent results and diagnostics.

One round of the loop refits the surrogate on everything observed so
far, proposes a candidate pool, picks a batch by exact Thompson
sampling, optionally pushes the batch through Markov-chain transitions,
evaluates the objective at the transitioned points and appends them to
the dataset.  The whole run is deterministic given the master seed.

Inputs are normalized to the unit cube and observations standardized to
zero mean / unit variance at this boundary; records are written back in
native coordinates and raw objective values.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .benchmarks import get_objective
from .gp import FactorizationError, GaussianProcess, fit_hyperparams
from .kernels import make_kernel
from .sobol import SobolEngine
from .thompson import select_batch, ts_distribution_mc, tv_distance
from .transitions import (
    ChainBatch,
    LdParams,
    MhParams,
    chain_cell_sequence,
    run_transitions,
    spawn_chain_rngs,
)
from .trust_region import TrustRegion

__all__ = [
    "RunConfig",
    "RunRecord",
    "run_bo_loop",
    "run_and_persist",
    "summarize",
    "SummaryRow",
    "diagnose_stationary",
    "DiagnosisResult",
    "write_records_csv",
    "read_records_csv",
    "write_summary_csv",
]

logger = logging.getLogger("chainbo.harness")

ROUTINES = ("mh", "ld", "none")
PROPOSERS = ("sobol", "turbo")


@dataclass
class RunConfig:
    """Full experiment configuration.

    ``n_transitions`` of None resolves to the problem dimension and
    ``pool_size`` of None to 50x the batch size for the Sobol proposer
    (100x inside a trust region).
    """

    objective: str
    dim: int
    budget: int
    n_init: int = 40
    batch_size: int = 20
    routine: str = "mh"
    n_transitions: int | None = None
    proposal_sigma: float = 0.05
    ld_eps: float = 1e-4
    ld_h: float = 1e-2
    boundary: str = "reflect"
    proposer: str = "sobol"
    pool_size: int | None = None
    kernel: str = "matern52"
    lengthscale: float | None = None
    fit_hypers: bool = True
    hyper_iters: int = 25
    hyper_refit_every: int = 5
    hyper_subset: int = 512
    noise_variance: float = 1e-4
    seed: int = 0
    n_repeats: int = 1
    out_dir: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.routine not in ROUTINES:
            raise ValueError(f"routine must be one of {ROUTINES}, got {self.routine!r}")
        if self.proposer not in PROPOSERS:
            raise ValueError(f"proposer must be one of {PROPOSERS}, got {self.proposer!r}")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.n_init < 2:
            raise ValueError("n_init must be at least 2")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.budget < self.n_init:
            raise ValueError("budget cannot be below the initial design size")
        if self.resolved_pool_size() < self.batch_size:
            raise ValueError("candidate pool must be at least the batch size")
        if self.n_repeats < 1:
            raise ValueError("n_repeats must be at least 1")

    def resolved_transitions(self):
        return self.dim if self.n_transitions is None else int(self.n_transitions)

    def resolved_pool_size(self):
        if self.pool_size is not None:
            return int(self.pool_size)
        factor = 100 if self.proposer == "turbo" else 50
        return factor * self.batch_size

    def transition_params(self):
        if self.routine == "mh":
            return MhParams(
                proposal_sigma=self.proposal_sigma,
                n_transitions=self.resolved_transitions(),
                boundary=self.boundary,
            )
        if self.routine == "ld":
            return LdParams(
                step_eps=self.ld_eps,
                fd_step=self.ld_h,
                n_transitions=self.resolved_transitions(),
                boundary=self.boundary,
            )
        return None

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class RunRecord:
    """One objective evaluation, in native coordinates."""

    repeat: int
    round_index: int
    eval_index: int
    point: np.ndarray
    value: float
    best_so_far: float
    round_wall_clock: float
    round_accept_rate: float  # NaN when no MH proposals were made


class BoxTransform:
    """Affine map between the unit cube and a native box."""

    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float)
        self.span = np.asarray(upper, dtype=float) - self.lower

    def from_unit(self, U):
        return self.lower + U * self.span

    def to_unit(self, X):
        return (X - self.lower) / self.span


def standardize(y):
    """Zero-mean / unit-variance rescaling; guards the constant case."""
    y = np.asarray(y, dtype=float)
    mean = float(y.mean())
    scale = float(y.std())
    if scale < 1e-12:
        scale = 1.0
    return (y - mean) / scale, mean, scale


def _default_kernel(config):
    if config.lengthscale is not None:
        ls0 = float(config.lengthscale)
    else:
        ls0 = min(max(0.5 * math.sqrt(config.dim), 5e-3), 10.0)
    return make_kernel(config.kernel, lengthscales=ls0, outputscale=1.0)


def run_bo_loop(config, objective=None):
    """Run every repeat of ``config``; returns the flat record list.

    A repeat whose surrogate factorization fails even after jitter
    escalation is aborted with a logged diagnostic, keeping the records
    gathered so far.
    """
    config.validate()
    if objective is None:
        objective = get_objective(config.objective, config.dim)
    if objective.dim != config.dim:
        raise ValueError(
            f"objective dimension {objective.dim} != config dim {config.dim}"
        )
    records = []
    for repeat in range(config.n_repeats):
        records.extend(_run_repeat(config, objective, repeat))
    return records


def _run_repeat(config, objective, repeat):
    rng = np.random.default_rng([int(config.seed), int(repeat)])
    box = BoxTransform(objective.lower, objective.upper)
    engine = SobolEngine(config.dim, scramble_seed=int(rng.integers(2**63 - 1)))
    m = config.batch_size
    records = []

    def log_evals(round_index, X_unit, values, best, eval_start, wall, accept_rate):
        for i in range(X_unit.shape[0]):
            value = float(values[i])
            best = value if best is None or value > best else best
            records.append(
                RunRecord(
                    repeat=repeat,
                    round_index=round_index,
                    eval_index=eval_start + i,
                    point=box.from_unit(X_unit[i]),
                    value=value,
                    best_so_far=best,
                    round_wall_clock=wall,
                    round_accept_rate=accept_rate,
                )
            )
        return best

    t0 = time.perf_counter()
    X = engine.draw(config.n_init)
    y = objective.evaluate(box.from_unit(X))
    best = log_evals(0, X, y, None, 0, time.perf_counter() - t0, math.nan)

    kernel = _default_kernel(config)
    noise = config.noise_variance
    params = config.transition_params()
    region = None
    gp = None
    pending = None  # points evaluated last round, not yet in the factor
    n_rounds = (config.budget - config.n_init) // m
    for round_index in range(1, n_rounds + 1):
        t0 = time.perf_counter()
        y_std, _, _ = standardize(y)
        refit_round = (round_index - 1) % config.hyper_refit_every == 0
        if config.fit_hypers and refit_round:
            if X.shape[0] > config.hyper_subset:
                subset = rng.choice(X.shape[0], size=config.hyper_subset, replace=False)
            else:
                subset = slice(None)
            kernel, noise = fit_hyperparams(
                X[subset],
                y_std[subset],
                family=config.kernel,
                max_iter=config.hyper_iters,
                initial_kernel=kernel,
                initial_noise=noise,
            )
        try:
            if gp is None or refit_round:
                # hyperparameters may have moved: factorize from scratch
                gp = GaussianProcess(kernel=kernel, noise_variance=noise).fit(X, y_std)
            else:
                # same kernel and noise: extend the cached factor by the
                # last batch, then swap in the re-standardized values
                gp = gp.extended(pending, y_std[-m:]).with_observations(y_std)
        except FactorizationError as exc:
            logger.error(
                "repeat %d aborted at round %d: %s", repeat, round_index, exc
            )
            break

        if config.proposer == "turbo":
            best_unit = X[int(np.argmax(y))]
            if region is None:
                region = TrustRegion.create(best_unit)
            elif region.needs_restart:
                region.restart(engine.draw(1)[0])
            pool = region.propose(engine, config.resolved_pool_size())
        else:
            pool = engine.draw(config.resolved_pool_size())

        slot_rngs = spawn_chain_rngs(rng, m)
        picks = select_batch(gp, pool, m, slot_rngs)
        batch_points = pool[picks]

        accept_rate = math.nan
        if config.routine != "none":
            out = run_transitions(
                gp, ChainBatch(points=batch_points), config.routine, params, rng
            )
            batch_points = out.points
            if config.routine == "mh":
                accept_rate = out.acceptance_rate

        values = objective.evaluate(box.from_unit(batch_points))
        incumbent = best
        wall = time.perf_counter() - t0
        best = log_evals(
            round_index, batch_points, values, best,
            config.n_init + (round_index - 1) * m, wall, accept_rate,
        )
        X = np.vstack([X, batch_points])
        y = np.concatenate([y, values])
        pending = batch_points
        if region is not None:
            best_point = X[int(np.argmax(y))] if best > incumbent else None
            region.update(float(values.max()), incumbent, best_point=best_point)
    return records


# ----------------------------------------------------------------------
# summaries
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class SummaryRow:
    eval_index: int
    mean: float
    stderr: float
    q20: float
    q50: float
    q80: float


def summarize(records):
    """Across-repeat statistics of best-so-far at each evaluation index.

    Returns one :class:`SummaryRow` per evaluation index present in
    every repeat: mean, standard error and the 20/50/80% quantiles used
    for violin-style convergence plots.
    """
    by_repeat = {}
    for rec in records:
        by_repeat.setdefault(rec.repeat, {})[rec.eval_index] = rec.best_so_far
    if not by_repeat:
        raise ValueError("no records to summarize")
    lengths = [len(v) for v in by_repeat.values()]
    horizon = min(lengths)
    traces = np.array(
        [[by_repeat[r][i] for i in range(horizon)] for r in sorted(by_repeat)]
    )
    n_rep = traces.shape[0]
    rows = []
    for i in range(horizon):
        col = traces[:, i]
        stderr = 0.0 if n_rep == 1 else float(col.std(ddof=1) / math.sqrt(n_rep))
        q20, q50, q80 = np.quantile(col, [0.2, 0.5, 0.8])
        rows.append(
            SummaryRow(
                eval_index=i,
                mean=float(col.mean()),
                stderr=stderr,
                q20=float(q20),
                q50=float(q50),
                q80=float(q80),
            )
        )
    return rows


# ----------------------------------------------------------------------
# persistence
# ----------------------------------------------------------------------


def _fmt(value):
    if isinstance(value, float) and math.isnan(value):
        return ""
    return repr(float(value))


def write_records_csv(path, records, dim):
    header = (
        ["repeat", "round", "eval_index"]
        + [f"x{i}" for i in range(dim)]
        + ["value", "best_so_far", "wall_clock_s", "accept_rate"]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in records:
            writer.writerow(
                [rec.repeat, rec.round_index, rec.eval_index]
                + [_fmt(v) for v in rec.point]
                + [
                    _fmt(rec.value),
                    _fmt(rec.best_so_far),
                    _fmt(rec.round_wall_clock),
                    _fmt(rec.round_accept_rate),
                ]
            )


def read_records_csv(path):
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        dim = sum(1 for name in header if name.startswith("x"))
        for row in reader:
            records.append(
                RunRecord(
                    repeat=int(row[0]),
                    round_index=int(row[1]),
                    eval_index=int(row[2]),
                    point=np.array([float(v) for v in row[3 : 3 + dim]]),
                    value=float(row[3 + dim]),
                    best_so_far=float(row[4 + dim]),
                    round_wall_clock=float(row[5 + dim]) if row[5 + dim] else math.nan,
                    round_accept_rate=float(row[6 + dim]) if row[6 + dim] else math.nan,
                )
            )
    return records


def write_summary_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eval_index", "mean", "stderr", "q20", "q50", "q80"])
        for row in rows:
            writer.writerow(
                [row.eval_index]
                + [_fmt(v) for v in (row.mean, row.stderr, row.q20, row.q50, row.q80)]
            )


def run_and_persist(config):
    """Run all repeats and write one CSV per repeat plus metadata.

    Returns the output directory path.  Wall-clock columns are the only
    non-reproducible content; everything else replays byte-identically
    from the same configuration and master seed.
    """
    if config.out_dir is None:
        raise ValueError("config.out_dir is required for persistence")
    os.makedirs(config.out_dir, exist_ok=True)
    records = run_bo_loop(config)
    for repeat in range(config.n_repeats):
        chunk = [r for r in records if r.repeat == repeat]
        write_records_csv(
            os.path.join(config.out_dir, f"records_repeat{repeat:03d}.csv"),
            chunk,
            config.dim,
        )
    meta = {
        "config": config.to_dict(),
        "versions": {
            "chainbo": __version__,
            "numpy": np.__version__,
        },
        "n_records": len(records),
    }
    with open(os.path.join(config.out_dir, "metadata.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return config.out_dir


# ----------------------------------------------------------------------
# stationary-distribution diagnostics
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class DiagnosisResult:
    grid_unit: np.ndarray
    chain_freq: np.ndarray
    ts_freq: np.ndarray
    tv_to_ts: float
    top_k_overlap: int
    split_half_tv: float


def unit_grid_2d(points_per_axis):
    """Inclusive lattice over the unit square, row-major."""
    axis = np.linspace(0.0, 1.0, points_per_axis)
    g0, g1 = np.meshgrid(axis, axis, indexing="ij")
    return np.column_stack([g0.ravel(), g1.ravel()])


def diagnose_stationary(
    objective,
    routine,
    params,
    n_samples=20,
    grid_per_axis=50,
    n_steps=1_000_000,
    burn_in=100_000,
    ts_draws=1_000_000,
    top_k=10,
    seed=0,
    kernel=None,
    noise_variance=1e-4,
    fit_hypers=False,
    fit_iters=50,
    out_dir=None,
):
    """Compare a long transition chain against the Monte-Carlo Thompson
    distribution on a dense 2-d grid.

    Fits a surrogate to a fixed Sobol sample of the objective, runs one
    chain of ``n_steps`` over the grid, tallies the Thompson-sampling
    selection frequencies, and reports the histogram TV distance, the
    overlap between the two top-``top_k`` cell sets, and the TV distance
    between the two halves of the post-burn-in chain.

    The surrogate uses a fixed medium-lengthscale kernel by default:
    marginal-likelihood fitting is available via ``fit_hypers`` but tends
    to collapse to a white-noise explanation on sparse samples of the
    oscillatory diagnostic objectives, which flattens both distributions.
    """
    if objective.dim != 2:
        raise ValueError("grid diagnostics need a 2-dimensional objective")
    rng = np.random.default_rng(int(seed))
    box = BoxTransform(objective.lower, objective.upper)
    engine = SobolEngine(2, scramble_seed=int(rng.integers(2**63 - 1)))
    X = engine.draw(n_samples)
    y_std, _, _ = standardize(objective.evaluate(box.from_unit(X)))
    if kernel is None:
        kernel = make_kernel("matern52", lengthscales=0.2, outputscale=1.0)
    noise = noise_variance
    if fit_hypers:
        kernel, noise = fit_hyperparams(
            X, y_std, max_iter=fit_iters, initial_kernel=kernel, initial_noise=noise
        )
    gp = GaussianProcess(kernel=kernel, noise_variance=noise).fit(X, y_std)

    grid = unit_grid_2d(grid_per_axis)
    cells = chain_cell_sequence(gp, grid, routine, params, n_steps, rng)
    kept = cells[burn_in:]
    chain_freq = np.bincount(kept, minlength=grid.shape[0]) / kept.shape[0]
    half = kept.shape[0] // 2
    first = np.bincount(kept[:half], minlength=grid.shape[0]) / half
    second = np.bincount(kept[half : 2 * half], minlength=grid.shape[0]) / half

    ts_freq = ts_distribution_mc(gp, grid, ts_draws, rng)
    chain_top = set(np.argsort(chain_freq)[::-1][:top_k].tolist())
    ts_top = set(np.argsort(ts_freq)[::-1][:top_k].tolist())

    result = DiagnosisResult(
        grid_unit=grid,
        chain_freq=chain_freq,
        ts_freq=ts_freq,
        tv_to_ts=tv_distance(chain_freq, ts_freq),
        top_k_overlap=len(chain_top & ts_top),
        split_half_tv=tv_distance(first, second),
    )
    if out_dir is not None:
        _write_diagnosis(out_dir, objective, box, result, routine, params)
    return result


def _write_diagnosis(out_dir, objective, box, result, routine, params):
    os.makedirs(out_dir, exist_ok=True)
    native = box.from_unit(result.grid_unit)
    for stem, freq in (
        ("chain_histogram", result.chain_freq),
        ("ts_histogram", result.ts_freq),
    ):
        with open(os.path.join(out_dir, f"{stem}.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x0", "x1", "frequency"])
            for row, f in zip(native, freq):
                writer.writerow([_fmt(row[0]), _fmt(row[1]), _fmt(f)])
    payload = {
        "objective": objective.name,
        "routine": routine,
        "params": asdict(params),
        "tv_to_ts": result.tv_to_ts,
        "top_k_overlap": result.top_k_overlap,
        "split_half_tv": result.split_half_tv,
    }
    with open(os.path.join(out_dir, "diagnostics.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
