"""Sequential per-factor acceptance and its exact finite-state oracle.

A move is accepted only if every factor passes its own uniform; testing stops
at the first failure, so expensive factors placed late are often never
evaluated.  The overall acceptance probability is the product of the clipped
factors, which leaves the stationary distribution unchanged; the finite-state
transition-matrix builder below is the oracle used to verify that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Mapping, Optional, Sequence

import numpy as np

from .core import CHEAP, EXPENSIVE, Factor
from .schedule import RandomnessSchedule

__all__ = [
    "OrderPolicy",
    "FactorStats",
    "DaOutcome",
    "combined_acceptance_prob",
    "delayed_accept",
    "reorder_factors",
    "exact_da_kernel",
    "power_split_factors",
]


@dataclass(frozen=True)
class OrderPolicy:
    """How the factor order is refreshed between iterations.

    ``by-success-rate`` puts the least successful factors first, so likely
    rejections are discovered cheaply; ``by-last-value`` starts from the
    factors with the highest stored log values.  Reordering never moves an
    expensive factor ahead of a cheap one.
    """

    kind: str = "fixed"
    refresh_every: int = 100

    def __post_init__(self) -> None:
        if self.kind not in ("fixed", "by-success-rate", "by-last-value"):
            raise ValueError(f"unknown order policy {self.kind!r}")
        if self.refresh_every < 1:
            raise ValueError("refresh_every must be a positive integer")


@dataclass(frozen=True)
class FactorStats:
    """Per-factor counters consumed by the ordering policies."""

    success_count: int = 0
    attempt_count: int = 0
    last_value: float = math.nan

    @property
    def pass_rate(self) -> float:
        if self.attempt_count == 0:
            return 1.0
        return self.success_count / self.attempt_count


@dataclass
class DaOutcome:
    """Result of one delayed-acceptance decision.

    ``stage_log_rhos`` holds the log factor values actually computed, in
    tested order; rejected stages past the failing one are never evaluated.
    """

    accepted: bool
    stages_evaluated: int
    stage_log_rhos: List[float]


def combined_acceptance_prob(rho_values: Sequence[float]) -> float:
    """Product of min(rho, 1) over the stage ratios; the analytic oracle."""
    prob = 1.0
    for rho in rho_values:
        rho = float(rho)
        if not rho > 0.0:
            raise ValueError(f"stage ratios must be positive, got {rho!r}")
        prob *= min(rho, 1.0)
    return prob


def delayed_accept(
    factors: Sequence[Factor],
    current: np.ndarray,
    proposed: np.ndarray,
    t: int,
    schedule: RandomnessSchedule,
) -> DaOutcome:
    """Run the staged accept/reject comparisons for one proposal.

    Stage ``k`` compares ``uniform(t, k)`` against ``min(rho_k, 1)`` and the
    procedure stops at the first failure.  ``rho_k = 0`` (a proposal outside
    the support) rejects; a NaN or ``+inf`` log value raises.
    """
    if not factors:
        raise ValueError("delayed_accept needs at least one factor")
    if len(factors) > schedule.stages:
        raise ValueError(
            f"{len(factors)} stages exceed schedule capacity {schedule.stages}"
        )
    log_rhos: List[float] = []
    for k, factor in enumerate(factors):
        log_rho = factor.log_ratio(current, proposed)
        log_rhos.append(log_rho)
        if log_rho >= 0.0:
            continue
        if schedule.uniform(t, k) >= math.exp(log_rho):
            return DaOutcome(False, k + 1, log_rhos)
    return DaOutcome(True, len(factors), log_rhos)


def _stats_view(factors: Sequence[Factor], stats) -> List[FactorStats]:
    if stats is None:
        return [
            FactorStats(f.success_count, f.attempt_count, f.last_value)
            for f in factors
        ]
    missing = [f.id for f in factors if f.id not in stats]
    if missing:
        raise ValueError(f"stats missing for factors {missing}")
    return [stats[f.id] for f in factors]


def reorder_factors(
    factors: Sequence[Factor],
    policy: OrderPolicy,
    stats: Optional[Mapping[str, FactorStats]] = None,
) -> List[int]:
    """Permutation of factor positions for the next block of iterations.

    The cheap/expensive boundary is preserved: cheap factors are ordered
    among themselves and always precede the expensive ones.  With ``stats``
    omitted, the counters carried on the factors themselves are used.
    """
    view = _stats_view(factors, stats)
    if policy.kind == "fixed":
        return list(range(len(factors)))

    if policy.kind == "by-success-rate":
        # least successful first; ties keep the existing order
        def key(i: int) -> float:
            return view[i].pass_rate

        reverse = False
    else:  # by-last-value: highest stored value first, unknowns lead
        def key(i: int) -> float:
            v = view[i].last_value
            return v if math.isfinite(v) else math.inf

        reverse = True

    cheap = [i for i, f in enumerate(factors) if f.cost_tag == CHEAP]
    expensive = [i for i, f in enumerate(factors) if f.cost_tag == EXPENSIVE]
    return sorted(cheap, key=key, reverse=reverse) + sorted(
        expensive, key=key, reverse=reverse
    )


def exact_da_kernel(
    discrete_target: np.ndarray,
    proposal_matrix: np.ndarray,
    factor_split: Sequence[np.ndarray],
) -> np.ndarray:
    """Exact transition matrix of the staged sampler on a finite state space.

    ``factor_split`` lists positive matrices ``R_k`` with ``R_k[x, y]`` the
    stage-k ratio for the move x -> y; their elementwise product must equal
    ``pi[y] q[y, x] / (pi[x] q[x, y])``.  Off-diagonal entries are
    ``q[x, y] * prod_k min(R_k[x, y], 1)`` with the diagonal absorbing the
    remainder.  Used as the stationarity / detailed-balance oracle.
    """
    pi = np.asarray(discrete_target, dtype=float)
    q = np.asarray(proposal_matrix, dtype=float)
    n = pi.size
    if n > 100:
        raise ValueError("oracle is meant for small state spaces (n <= 100)")
    if q.shape != (n, n):
        raise ValueError("proposal matrix shape does not match the target")
    if not factor_split:
        raise ValueError("factor_split must contain at least one matrix")
    accept = np.ones((n, n))
    for rho in factor_split:
        rho = np.asarray(rho, dtype=float)
        if rho.shape != (n, n):
            raise ValueError("factor matrix shape does not match the target")
        if np.any(rho <= 0):
            raise ValueError("factor matrices must be strictly positive")
        accept *= np.minimum(rho, 1.0)
    P = q * accept
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    rows = P.sum(axis=1)
    if np.any(~np.isfinite(P)) or np.max(np.abs(rows - 1.0)) > 1e-12:
        raise ValueError("transition rows do not sum to 1 within 1e-12")
    return P


def power_split_factors(
    pi: np.ndarray, proposal_matrix: np.ndarray, exponents: Sequence[float]
) -> List[np.ndarray]:
    """Split the finite-state MH ratio into powers of the target ratio.

    ``R_k[x, y] = (pi[y]/pi[x])**e_k`` with the proposal q-ratio folded into
    the first factor so the product recovers the full ratio exactly.
    Exponents must be positive and sum to 1.
    """
    exps = np.asarray(exponents, dtype=float)
    if np.any(exps <= 0) or abs(exps.sum() - 1.0) > 1e-12:
        raise ValueError("exponents must be positive and sum to 1")
    pi = np.asarray(pi, dtype=float)
    q = np.asarray(proposal_matrix, dtype=float)
    ratio = pi[None, :] / pi[:, None]
    factors = [ratio**e for e in exps]
    with np.errstate(divide="ignore", invalid="ignore"):
        qratio = np.where(q > 0, q.T / np.where(q > 0, q, 1.0), 1.0)
    factors[0] = factors[0] * qratio
    return factors
