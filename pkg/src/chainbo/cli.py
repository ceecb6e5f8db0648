"""Command-line interface: ``run``, ``summarize`` and ``diagnose``.

Configuration can come from flags, from a JSON file via ``--config``,
or both (explicit flags win).  All failures exit nonzero after printing
a single ``error: ...`` line to stderr so callers can parse outcomes.
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import sys

# the hot path is many skinny triangular solves; oversubscribed BLAS
# thread pools slow those down by large factors on small machines.
# effective only when this module loads before numpy initializes BLAS.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

from .benchmarks import get_objective
from .harness import (
    RunConfig,
    diagnose_stationary,
    read_records_csv,
    run_and_persist,
    summarize,
    write_summary_csv,
)
from .transitions import LdParams, MhParams

__all__ = ["main", "build_parser"]


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _add_run_flags(parser):
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--objective", help="benchmark name (ackley, rastrigin, branin, levy1d)")
    parser.add_argument("--dim", type=int)
    parser.add_argument("--budget", type=int, help="total evaluation budget")
    parser.add_argument("--init", type=int, help="initial design size")
    parser.add_argument("--batch", type=int, help="points evaluated per round")
    parser.add_argument("--routine", choices=["mh", "ld", "none"])
    parser.add_argument("--transitions", type=int, help="chain steps per point (default: dim)")
    parser.add_argument("--proposal-sigma", type=float)
    parser.add_argument("--ld-eps", type=float)
    parser.add_argument("--ld-h", type=float)
    parser.add_argument("--proposer", choices=["sobol", "turbo"])
    parser.add_argument("--pool", type=int, help="candidate pool size per round")
    parser.add_argument("--kernel", choices=["matern52", "rbf"])
    parser.add_argument("--lengthscale", type=float, help="fixed initial lengthscale (default: 0.5*sqrt(dim))")
    parser.add_argument("--noise", type=float, help="observation-noise variance of the surrogate")
    parser.add_argument("--fit-hypers", choices=["on", "off"])
    parser.add_argument("--seed", type=int)
    parser.add_argument("--repeats", type=int)
    parser.add_argument("--out", help="output directory")


_FLAG_TO_FIELD = {
    "objective": "objective",
    "dim": "dim",
    "budget": "budget",
    "init": "n_init",
    "batch": "batch_size",
    "routine": "routine",
    "transitions": "n_transitions",
    "proposal_sigma": "proposal_sigma",
    "ld_eps": "ld_eps",
    "ld_h": "ld_h",
    "proposer": "proposer",
    "pool": "pool_size",
    "kernel": "kernel",
    "lengthscale": "lengthscale",
    "noise": "noise_variance",
    "seed": "seed",
    "repeats": "n_repeats",
    "out": "out_dir",
}


def build_parser():
    parser = _Parser(prog="chainbo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", parents=[], help="run an optimization experiment")
    _add_run_flags(run_p)

    sum_p = sub.add_parser("summarize", help="tabulate best-so-far statistics of a run")
    sum_p.add_argument("--out", required=True, help="run directory containing records CSVs")

    diag_p = sub.add_parser("diagnose", help="stationary-distribution diagnostics on a 2-d grid")
    diag_p.add_argument("--objective", default="rastrigin")
    diag_p.add_argument("--dim", type=int, default=2)
    diag_p.add_argument("--lower", type=float, help="override the native lower bound")
    diag_p.add_argument("--upper", type=float, help="override the native upper bound")
    diag_p.add_argument("--routine", choices=["mh", "ld"], default="mh")
    diag_p.add_argument("--proposal-sigma", type=float, default=0.05)
    diag_p.add_argument("--ld-eps", type=float, default=1e-4)
    diag_p.add_argument("--ld-h", type=float, default=1e-2)
    diag_p.add_argument("--samples", type=int, default=20, help="surrogate training sample size")
    diag_p.add_argument("--fit-hypers", choices=["on", "off"], default="off")
    diag_p.add_argument("--grid", type=int, default=50, help="grid points per axis")
    diag_p.add_argument("--steps", type=int, default=1_000_000)
    diag_p.add_argument("--burn-in", type=int, default=100_000)
    diag_p.add_argument("--ts-draws", type=int, default=1_000_000)
    diag_p.add_argument("--seed", type=int, default=0)
    diag_p.add_argument("--out", required=True, help="output directory")
    return parser


def _config_from_args(args):
    values = {}
    if args.config:
        with open(args.config) as fh:
            values.update(json.load(fh))
    for flag, field in _FLAG_TO_FIELD.items():
        flag_value = getattr(args, flag)
        if flag_value is not None:
            values[field] = flag_value
    if args.fit_hypers is not None:
        values["fit_hypers"] = args.fit_hypers == "on"
    missing = [k for k in ("objective", "dim", "budget") if values.get(k) is None]
    if missing:
        raise CliError(f"missing required settings: {', '.join(missing)}")
    return RunConfig.from_dict(values)


def _cmd_run(args):
    config = _config_from_args(args)
    if config.out_dir is None:
        raise CliError("missing required settings: out")
    out = run_and_persist(config)
    print(out)
    return 0


def _cmd_summarize(args):
    paths = sorted(glob.glob(os.path.join(args.out, "records_repeat*.csv")))
    if not paths:
        raise CliError(f"no records CSVs found under {args.out}")
    records = []
    for path in paths:
        records.extend(read_records_csv(path))
    rows = summarize(records)
    out_path = os.path.join(args.out, "summary.csv")
    write_summary_csv(out_path, rows)
    print(out_path)
    return 0


def _cmd_diagnose(args):
    objective = get_objective(args.objective, args.dim, lower=args.lower, upper=args.upper)
    if args.routine == "mh":
        params = MhParams(proposal_sigma=args.proposal_sigma)
    else:
        params = LdParams(step_eps=args.ld_eps, fd_step=args.ld_h)
    result = diagnose_stationary(
        objective,
        routine=args.routine,
        params=params,
        n_samples=args.samples,
        grid_per_axis=args.grid,
        n_steps=args.steps,
        burn_in=args.burn_in,
        ts_draws=args.ts_draws,
        seed=args.seed,
        fit_hypers=args.fit_hypers == "on",
        out_dir=args.out,
    )
    print(
        f"{args.out} tv_to_ts={result.tv_to_ts:.4f} "
        f"top_k_overlap={result.top_k_overlap} split_half_tv={result.split_half_tv:.4f}"
    )
    return 0


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "summarize":
            return _cmd_summarize(args)
        return _cmd_diagnose(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
