"""Beta-binomial target with the binomial likelihood split into Bernoulli blocks.

The N trials are dealt deterministically into ``parts`` blocks: successes and
failures are each dealt separately in the cyclic block order
(0, m-1, 1, m-2, ...), which spreads the remainder to both ends and keeps
block compositions balanced instead of clustering all leftovers at the low
indices.  Block log-likelihoods therefore sum exactly to the full Bernoulli
product, and each block becomes one cheap acceptance stage; the Beta prior is
the final stage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import EXPENSIVE, FactorizedTarget, GaussianRandomWalk, part_factor

__all__ = ["BetaBinomialModel", "deal_counts", "betabin_block_loglik"]


def _deal_order(m: int) -> list[int]:
    order = []
    lo, hi = 0, m - 1
    while lo <= hi:
        order.append(lo)
        if hi != lo:
            order.append(hi)
        lo += 1
        hi -= 1
    return order


def deal_counts(total: int, blocks: int) -> np.ndarray:
    """Deal ``total`` items into ``blocks`` in the alternating-ends cycle."""
    counts = np.zeros(blocks, dtype=np.int64)
    order = _deal_order(blocks)
    for i in range(total):
        counts[order[i % blocks]] += 1
    return counts


@dataclass(frozen=True)
class BetaBinomialModel:
    """x successes in N Bernoulli trials, p ~ Beta(a, b)."""

    N: int = 100
    x: int = 32
    a: float = 7.5
    b: float = 0.5
    parts: int = 100
    proposal_sd: float = 0.12

    dimension = 1

    successes: np.ndarray = field(init=False, repr=False)
    failures: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not 0 <= self.x <= self.N:
            raise ValueError("need 0 <= x <= N")
        if self.parts < 1 or self.parts > self.N:
            raise ValueError("parts must lie in [1, N]")
        object.__setattr__(self, "successes", deal_counts(self.x, self.parts))
        object.__setattr__(self, "failures", deal_counts(self.N - self.x, self.parts))

    def block_loglik(self, p: float, block: int) -> float:
        if not 0.0 < p < 1.0:
            return -np.inf
        return self.successes[block] * np.log(p) + self.failures[block] * np.log1p(-p)

    def logprior(self, state: np.ndarray) -> float:
        p = state[0]
        if not 0.0 < p < 1.0:
            return -np.inf
        return (self.a - 1.0) * np.log(p) + (self.b - 1.0) * np.log1p(-p)

    def factorized_target(self) -> FactorizedTarget:
        factors = [
            part_factor(
                f"bernoulli-{b}",
                lambda s, _b=b: self.block_loglik(s[0], _b),
            )
            for b in range(self.parts)
        ]
        factors.append(part_factor("prior", self.logprior, cost_tag=EXPENSIVE))
        return FactorizedTarget(
            factors=factors,
            dimension=1,
            reference_log_ratio=self.reference_log_ratio,
        )

    def reference_log_ratio(self, current: np.ndarray, proposed: np.ndarray) -> float:
        # the posterior is Be(x+a, N-x+b); evaluate its ratio directly
        def logpost(p: float) -> float:
            if not 0.0 < p < 1.0:
                return -np.inf
            return (self.x + self.a - 1.0) * np.log(p) + (
                self.N - self.x + self.b - 1.0
            ) * np.log1p(-p)

        return logpost(proposed[0]) - logpost(current[0])

    def posterior_params(self) -> tuple[float, float]:
        return self.x + self.a, self.N + self.b - self.x

    def default_kernel(self) -> GaussianRandomWalk:
        return GaussianRandomWalk(self.proposal_sd ** 2, dimension=1)

    def default_init(self) -> np.ndarray:
        return np.array([self.x / self.N])


def betabin_block_loglik(model: BetaBinomialModel, p: float, block: int) -> float:
    """Log-likelihood share of one Bernoulli block."""
    if not 0 <= block < model.parts:
        raise ValueError(f"block {block} outside [0, {model.parts})")
    return model.block_loglik(p, block)
