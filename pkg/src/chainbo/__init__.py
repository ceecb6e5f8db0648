"""chainbo: Bayesian optimization with Markov-chain candidate transitions.

Candidate points selected by Thompson sampling over a Gaussian-process
surrogate are pushed through Metropolis-Hastings or Langevin transition
steps whose target favors points likely to beat their neighbors under
the posterior, concentrating a small batch on promising regions without
a dense discretization of the search domain.
"""

__version__ = "0.1.0"

from .benchmarks import ObjectiveFn, RegretTrace, compute_regret, get_objective
from .gp import (
    FactorizationError,
    GaussianProcess,
    PairStats,
    fit_hyperparams,
    standard_normal_cdf,
    win_prob,
    win_prob_array,
)
from .harness import (
    DiagnosisResult,
    RunConfig,
    RunRecord,
    diagnose_stationary,
    run_and_persist,
    run_bo_loop,
    summarize,
)
from .kernels import Matern52, SquaredExponential, make_kernel
from .sobol import SobolEngine
from .thompson import exact_ts_select, ts_distribution_mc, tv_distance
from .transitions import (
    ChainBatch,
    LdParams,
    MhParams,
    grad_log_p,
    ld_step,
    mh_step,
    run_transitions,
    stationary_diagnostics,
)
from .trust_region import TrustRegion

__all__ = [
    "__version__",
    "ObjectiveFn",
    "RegretTrace",
    "compute_regret",
    "get_objective",
    "FactorizationError",
    "GaussianProcess",
    "PairStats",
    "fit_hyperparams",
    "standard_normal_cdf",
    "win_prob",
    "win_prob_array",
    "DiagnosisResult",
    "RunConfig",
    "RunRecord",
    "diagnose_stationary",
    "run_and_persist",
    "run_bo_loop",
    "summarize",
    "Matern52",
    "SquaredExponential",
    "make_kernel",
    "SobolEngine",
    "exact_ts_select",
    "ts_distribution_mc",
    "tv_distance",
    "ChainBatch",
    "LdParams",
    "MhParams",
    "grad_log_p",
    "ld_step",
    "mh_step",
    "run_transitions",
    "stationary_diagnostics",
    "TrustRegion",
]
