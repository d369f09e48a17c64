"""Shared conventions for the bundled targets.

Every model exposes
  * ``factorized_target()``: the ordered factor decomposition, cheap block
    first, built from per-state log parts,
  * ``reference_log_ratio(current, proposed)``: an independently coded,
    unfactored evaluator of the full log MH ratio (the consistency oracle),
  * ``default_kernel()`` / ``default_init()``: the documented random-walk
    configuration the experiments run with,
and may expose ``rho2_hat(current, proposed)``, the cheap-fraction plug-in
estimate of the expensive stage ratio used by the approximating branch
policies.
"""

from __future__ import annotations

import numpy as np

__all__ = ["dataset_rng"]


def dataset_rng(seed: int) -> np.random.Generator:
    """Generator for synthetic datasets, separate from the chain streams."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, 0xDA7A])
