"""Delayed-acceptance Metropolis-Hastings with speculative tree prefetching.

The acceptance step is factorized into cheap-to-expensive stages that are
tested one at a time against pre-committed uniforms (stopping at the first
failure), and the chain's future accept/reject tree is explored greedily so
that expensive target evaluations run in parallel without changing the
trajectory: for a fixed seed every algorithm/worker combination reproduces
the serial chain bit for bit.
"""

__version__ = "0.1.0"

from .core import (
    ChainTrace,
    EvaluationError,
    Factor,
    FactorizedTarget,
    GaussianRandomWalk,
    part_factor,
    propose,
    standard_mh_step,
)
from .delayed import (
    DaOutcome,
    FactorStats,
    OrderPolicy,
    combined_acceptance_prob,
    delayed_accept,
    exact_da_kernel,
    power_split_factors,
    reorder_factors,
)
from .diagnostics import (
    DiagnosticsReport,
    autocorrelation,
    effective_sample_size,
    integrated_autocorrelation_time,
    relative_gain,
)
from .executor import EvalTask, WorkerPool, WorkerPoolConfig, evaluate_tour, wall_clock_probe
from .kernels import BACKEND, USING_NUMBA
from .prefetch import (
    AlphaContext,
    BranchPolicy,
    PrefetchNode,
    Tour,
    build_tour,
    build_tour_da,
    child_gamma,
    consume_tour,
    estimate_alpha,
)
from .sampler import ALGORITHMS, run_chain
from .schedule import RandomnessSchedule, make_schedule

__all__ = [
    "__version__",
    "BACKEND",
    "USING_NUMBA",
    "ChainTrace",
    "EvaluationError",
    "Factor",
    "FactorizedTarget",
    "GaussianRandomWalk",
    "part_factor",
    "propose",
    "standard_mh_step",
    "DaOutcome",
    "FactorStats",
    "OrderPolicy",
    "combined_acceptance_prob",
    "delayed_accept",
    "exact_da_kernel",
    "power_split_factors",
    "reorder_factors",
    "DiagnosticsReport",
    "autocorrelation",
    "effective_sample_size",
    "integrated_autocorrelation_time",
    "relative_gain",
    "EvalTask",
    "WorkerPool",
    "WorkerPoolConfig",
    "evaluate_tour",
    "wall_clock_probe",
    "AlphaContext",
    "BranchPolicy",
    "PrefetchNode",
    "Tour",
    "build_tour",
    "build_tour_da",
    "child_gamma",
    "consume_tour",
    "estimate_alpha",
    "ALGORITHMS",
    "run_chain",
    "RandomnessSchedule",
    "make_schedule",
]
