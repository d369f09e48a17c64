"""Chain state, factorized targets and the symmetric random-walk kernel.

A target enters the sampler as an ordered list of :class:`Factor` objects
whose log-ratios multiply to the full Metropolis-Hastings ratio.  Factors
built from per-state log parts additionally expose ``state_fn``; samplers use
those per-state values so that serial and speculative execution perform the
exact same floating-point operations (bit-identical traces).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .schedule import RandomnessSchedule

__all__ = [
    "EvaluationError",
    "Factor",
    "FactorizedTarget",
    "part_factor",
    "GaussianRandomWalk",
    "propose",
    "standard_mh_step",
    "ChainTrace",
]

CHEAP = "cheap"
EXPENSIVE = "expensive"


class EvaluationError(RuntimeError):
    """A factor produced a non-finite value at a point inside the support.

    ``partial_trace`` carries whatever the sampler had produced before the
    failure so callers can flush it.
    """

    def __init__(self, message: str, partial_trace: "ChainTrace | None" = None):
        super().__init__(message)
        self.partial_trace = partial_trace


@dataclass
class Factor:
    """One positive term of the acceptance-ratio factorization.

    ``evaluator(current, proposed)`` returns the log of the term.  ``-inf``
    signals a proposal outside the support (immediate rejection); ``+inf`` and
    NaN are hard errors.  ``state_fn``, when present, evaluates the factor's
    log part at a single state, with the ratio being the difference of two
    such values.  The mutable counters feed the ordering policies.
    """

    id: str
    evaluator: Callable[[np.ndarray, np.ndarray], float]
    cost_tag: str = CHEAP
    state_fn: Optional[Callable[[np.ndarray], float]] = None
    success_count: int = 0
    attempt_count: int = 0
    last_value: float = math.nan

    def __post_init__(self) -> None:
        if self.cost_tag not in (CHEAP, EXPENSIVE):
            raise ValueError(f"unknown cost_tag {self.cost_tag!r}")

    def log_ratio(self, current: np.ndarray, proposed: np.ndarray) -> float:
        value = float(self.evaluator(current, proposed))
        if math.isnan(value) or value == math.inf:
            raise EvaluationError(
                f"factor {self.id!r} returned non-finite log-ratio {value!r}"
            )
        return value

    @property
    def pass_rate(self) -> float:
        """Empirical per-stage pass rate; optimistic 1.0 before any attempt."""
        if self.attempt_count == 0:
            return 1.0
        return self.success_count / self.attempt_count


def part_factor(
    id: str,
    state_fn: Callable[[np.ndarray], float],
    cost_tag: str = CHEAP,
) -> Factor:
    """Factor whose log-ratio is the difference of a per-state log part."""

    def evaluator(current: np.ndarray, proposed: np.ndarray) -> float:
        new = state_fn(proposed)
        old = state_fn(current)
        if not math.isfinite(old):
            raise EvaluationError(
                f"factor {id!r}: current state has non-finite log part {old!r}"
            )
        return new - old

    return Factor(id=id, evaluator=evaluator, cost_tag=cost_tag, state_fn=state_fn)


@dataclass
class FactorizedTarget:
    """Ordered factor decomposition of one MH acceptance ratio.

    ``reference_log_ratio`` is the model's independent, unfactored evaluator
    of the full log MH ratio; the test suite checks the factor sum against it
    to 1e-10 relative.
    """

    factors: List[Factor]
    dimension: int
    reference_log_ratio: Optional[Callable[[np.ndarray, np.ndarray], float]] = None

    def __post_init__(self) -> None:
        if not self.factors:
            raise ValueError("a factorized target needs at least one factor")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")

    @property
    def n_stages(self) -> int:
        return len(self.factors)

    @property
    def has_state_fns(self) -> bool:
        return all(f.state_fn is not None for f in self.factors)

    def log_ratio_sum(self, current: np.ndarray, proposed: np.ndarray) -> float:
        """Sum of the factor log-ratios, in factor order."""
        return sum(f.log_ratio(current, proposed) for f in self.factors)

    def log_total(self, state: np.ndarray) -> float:
        """Sum of all per-state log parts, in factor order.

        ``-inf`` marks a state outside the support; NaN (e.g. a mix of
        ``-inf`` and ``+inf`` parts) is a hard error.
        """
        total = 0.0
        for f in self.factors:
            if f.state_fn is None:
                raise ValueError(f"factor {f.id!r} has no per-state log part")
            total += f.state_fn(state)
        if math.isnan(total) or total == math.inf:
            raise EvaluationError(f"non-finite log target {total!r}")
        return total

    def part_values(self, state: np.ndarray) -> np.ndarray:
        """Per-factor log parts at ``state`` (factor order)."""
        vals = np.empty(len(self.factors))
        for i, f in enumerate(self.factors):
            if f.state_fn is None:
                raise ValueError(f"factor {f.id!r} has no per-state log part")
            vals[i] = f.state_fn(state)
        return vals


class GaussianRandomWalk:
    """Symmetric Gaussian random-walk kernel with fixed covariance.

    ``covariance`` may be a positive scalar (isotropic), a 1-d array of
    per-coordinate variances, or a full SPD matrix.  Being symmetric, its
    q-ratio contributes exactly 0 in the log domain.
    """

    kind = "random-walk-gaussian"
    symmetric = True

    def __init__(self, covariance, dimension: Optional[int] = None):
        cov = np.atleast_1d(np.asarray(covariance, dtype=float))
        if cov.ndim == 1:
            if cov.size == 1 and dimension is not None:
                cov = np.full(dimension, cov[0])
            if np.any(cov <= 0):
                raise ValueError("variances must be positive")
            self.dimension = cov.size
            self.covariance = np.diag(cov)
            self.chol = np.diag(np.sqrt(cov))
        else:
            if cov.shape[0] != cov.shape[1]:
                raise ValueError("covariance must be square")
            if not np.allclose(cov, cov.T, atol=1e-12):
                raise ValueError("covariance must be symmetric")
            try:
                self.chol = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError as exc:
                raise ValueError("covariance must be positive definite") from exc
            self.dimension = cov.shape[0]
            self.covariance = cov

    def step(self, innovation: np.ndarray) -> np.ndarray:
        if innovation.shape != (self.dimension,):
            raise ValueError(
                f"innovation shape {innovation.shape} does not match "
                f"kernel dimension {self.dimension}"
            )
        return self.chol @ innovation


def propose(
    state: np.ndarray, kernel: GaussianRandomWalk, innovation: np.ndarray
) -> np.ndarray:
    """Deterministic proposal map: state + L @ innovation."""
    state = np.asarray(state, dtype=float)
    innovation = np.asarray(innovation, dtype=float)
    if state.shape != innovation.shape:
        raise ValueError(
            f"state shape {state.shape} does not match innovation {innovation.shape}"
        )
    return state + kernel.step(innovation)


def accept_log_ratio(log_ratio: float, u: float) -> bool:
    """Single accept/reject decision: u < min(exp(log_ratio), 1)."""
    if log_ratio >= 0.0:
        return True
    return u < math.exp(log_ratio)


def standard_mh_step(
    state: np.ndarray,
    target: FactorizedTarget,
    kernel: GaussianRandomWalk,
    t: int,
    schedule: RandomnessSchedule,
    current_log_total: Optional[float] = None,
) -> tuple[np.ndarray, bool]:
    """One plain Metropolis-Hastings step at absolute time ``t``.

    The full ratio is compared against the stage-0 uniform.  When the target
    carries per-state parts the ratio is formed as ``total(proposed) -
    total(state)``, matching the arithmetic of the prefetched sampler bit for
    bit.  A proposal outside the support is rejected rather than raised.
    """
    proposed = propose(state, kernel, schedule.innovation(t))
    if target.has_state_fns:
        if current_log_total is None:
            current_log_total = target.log_total(state)
        log_ratio = target.log_total(proposed) - current_log_total
    else:
        log_ratio = target.log_ratio_sum(state, proposed)
    if accept_log_ratio(log_ratio, schedule.uniform(t, 0)):
        return proposed, True
    return state, False


@dataclass
class ChainTrace:
    """Post-burn-in chain output plus per-iteration metadata.

    ``stage[i]`` is the deepest factor stage evaluated at iteration ``i``
    (1-based count); ``tour[i]`` identifies the prefetching round that
    produced the iteration (serial algorithms assign one round per
    iteration).  ``tour`` ids depend on the worker count and are excluded
    from determinism comparisons and from the samples CSV.
    """

    states: np.ndarray
    accepted: np.ndarray
    stage: np.ndarray
    tour: np.ndarray
    burnin: int = 0
    draws_per_round: float = 1.0

    def __post_init__(self) -> None:
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.accepted = np.asarray(self.accepted, dtype=bool)
        self.stage = np.asarray(self.stage, dtype=np.int64)
        self.tour = np.asarray(self.tour, dtype=np.int64)

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted.mean()) if len(self) else 0.0

    def signature(self) -> bytes:
        """Bytes identifying the trajectory (excludes tour bookkeeping)."""
        return (
            self.states.tobytes() + self.accepted.tobytes() + self.stage.tobytes()
        )
