"""Conjugate normal-normal target: one observation, Gaussian prior on the mean.

The posterior is available in closed form, which makes this the simplest
end-to-end check of the staged sampler: stage 1 tests the likelihood ratio,
stage 2 the prior ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import EXPENSIVE, FactorizedTarget, GaussianRandomWalk, part_factor

__all__ = ["NormalNormalModel", "nn_posterior_params"]


@dataclass(frozen=True)
class NormalNormalModel:
    """x | mu ~ N(mu, 1) with prior mu ~ N(0, sigma_mu^2)."""

    x: float = 3.0
    sigma_mu: float = 10.0
    # ~12% acceptance comes from a deliberately wide walk; see README
    proposal_sd: float = 10.0

    dimension = 1

    def __post_init__(self) -> None:
        if self.sigma_mu <= 0:
            raise ValueError("sigma_mu must be positive")

    def loglik(self, state: np.ndarray) -> float:
        mu = state[0]
        return -0.5 * (self.x - mu) ** 2

    def logprior(self, state: np.ndarray) -> float:
        mu = state[0]
        return -0.5 * mu * mu / (self.sigma_mu * self.sigma_mu)

    def factorized_target(self) -> FactorizedTarget:
        return FactorizedTarget(
            factors=[
                part_factor("likelihood", self.loglik),
                part_factor("prior", self.logprior, cost_tag=EXPENSIVE),
            ],
            dimension=1,
            reference_log_ratio=self.reference_log_ratio,
        )

    def reference_log_ratio(self, current: np.ndarray, proposed: np.ndarray) -> float:
        # independent single-expression evaluator of the full posterior ratio
        s2 = self.sigma_mu * self.sigma_mu
        def logpost(mu: float) -> float:
            return -0.5 * ((self.x - mu) ** 2 + mu * mu / s2)
        return logpost(proposed[0]) - logpost(current[0])

    def posterior_params(self) -> tuple[float, float]:
        prec = 1.0 + self.sigma_mu ** -2
        return self.x / prec, 1.0 / prec

    def default_kernel(self) -> GaussianRandomWalk:
        return GaussianRandomWalk(self.proposal_sd ** 2, dimension=1)

    def default_init(self) -> np.ndarray:
        return np.array([self.x])


def nn_posterior_params(model: NormalNormalModel) -> tuple[float, float]:
    """Closed-form posterior (mean, variance)."""
    return model.posterior_params()
