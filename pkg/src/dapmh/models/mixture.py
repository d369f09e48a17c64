"""Gaussian mixture under a Jeffreys prior computed by numerical quadrature.

Here the prior, not the likelihood, is the expensive object: each evaluation
integrates the score outer product of the mixture density over the data
space.  The staged split follows the 2% rule: stage 1 is the likelihood of
observations after the first 2%, stage 2 is the small leading likelihood
block times the Jeffreys prior (the small block regularises a possibly
improper prior ratio).

The chain walks an unconstrained vector v = (weight log-ratios against the
last component, means, log scales); the Jacobian of v -> (w, mu, sigma) is
folded into the prior stage, so the walk never leaves the support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from .. import kernels
from ..core import EXPENSIVE, FactorizedTarget, GaussianRandomWalk, part_factor

__all__ = [
    "QuadratureSpec",
    "MixtureModel",
    "simulate_mixture",
    "mixture_logpdf",
    "fisher_info",
    "jeffreys_logprior",
    "mixture_da_factors",
    "pack_params",
    "unpack_params",
]

# the data-generating mixture of the synthetic experiment: weights, means and
# second parameters read as variances (flip scale_is_variance to read them as
# standard deviations)
GENERATOR_WEIGHTS = (0.10, 0.65, 0.25)
GENERATOR_MEANS = (-10.0, 0.0, 15.0)
GENERATOR_SCALES = (2.0, 5.0, 5.0)


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre grid for the information integrals."""

    nodes: int = 512
    panel: int = 16
    pad_sds: float = 10.0

    def grid(self, mu: np.ndarray, sigma: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        lo = float(np.min(mu) - self.pad_sds * np.max(sigma))
        hi = float(np.max(mu) + self.pad_sds * np.max(sigma))
        panels = max(1, self.nodes // self.panel)
        base_x, base_w = np.polynomial.legendre.leggauss(self.panel)
        edges = np.linspace(lo, hi, panels + 1)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        xs = (mid[:, None] + half[:, None] * base_x[None, :]).ravel()
        ws = (half[:, None] * base_w[None, :]).ravel()
        return np.ascontiguousarray(xs), np.ascontiguousarray(ws)


def unpack_params(psi: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split the flat constrained vector (w_1..w_k, mu_1..mu_k, s_1..s_k)."""
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (3 * k,):
        raise ValueError(f"expected {3 * k} parameters, got {psi.shape}")
    return psi[:k], psi[k : 2 * k], psi[2 * k :]


def pack_params(w, mu, sigma) -> np.ndarray:
    return np.concatenate([np.asarray(w, float), np.asarray(mu, float), np.asarray(sigma, float)])


def _valid_psi(w, mu, sigma) -> bool:
    return (
        np.all(np.isfinite(w))
        and np.all(np.isfinite(mu))
        and np.all(np.isfinite(sigma))
        and np.all(w > 0)
        and np.all(sigma > 0)
        and abs(float(np.sum(w)) - 1.0) <= 1e-9
    )


def mixture_logpdf(psi: np.ndarray, x: float) -> float:
    """Log mixture density at a point; -inf signals a constraint violation."""
    k = len(psi) // 3
    w, mu, sigma = unpack_params(psi, k)
    if not _valid_psi(w, mu, sigma):
        return -np.inf
    return float(kernels.mixture_logpdf_points(np.array([x]), w, mu, sigma)[0])


def fisher_info(psi: np.ndarray, quadrature: QuadratureSpec = QuadratureSpec()) -> np.ndarray:
    """Information matrix in the free parameterization (k-1 free weights).

    Computed as the quadrature integral of the score outer product weighted
    by the density.  Raises on non-finite entries or an eigenvalue below
    -1e-8 (the integrand is PSD up to quadrature error).
    """
    k = len(psi) // 3
    w, mu, sigma = unpack_params(psi, k)
    if not _valid_psi(w, mu, sigma):
        raise ValueError("psi violates the mixture constraints")
    xs, ws = quadrature.grid(mu, sigma)
    info = kernels.fisher_info_matrix(xs, ws, w, mu, sigma)
    if not np.all(np.isfinite(info)):
        raise FloatingPointError("non-finite Fisher information entries")
    min_eig = float(np.linalg.eigvalsh(info)[0])
    if min_eig < -1e-8:
        raise FloatingPointError(f"information matrix has eigenvalue {min_eig}")
    return info


_EIG_FLOOR = 1e-12


def jeffreys_logprior(psi: np.ndarray, quadrature: QuadratureSpec = QuadratureSpec()) -> float:
    """0.5 log det of the information matrix, with floored eigenvalues.

    Evaluation failures (non-finite integrand values) signal rejection by
    returning -inf so the chain simply declines the move.
    """
    try:
        info = fisher_info(psi, quadrature)
    except (FloatingPointError, ValueError):
        return -np.inf
    eig = np.linalg.eigvalsh(info)
    eig = np.maximum(eig, _EIG_FLOOR)
    return 0.5 * float(np.sum(np.log(eig)))


def simulate_mixture(
    n: int,
    seed: int,
    weights=GENERATOR_WEIGHTS,
    means=GENERATOR_MEANS,
    scales=GENERATOR_SCALES,
    scale_is_variance: bool = True,
) -> np.ndarray:
    """Ancestral sample from the generating mixture (component, then draw)."""
    if n < 1:
        raise ValueError("need n >= 1")
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, 0xDA7A, 0x313])
    w = np.asarray(weights, float)
    mu = np.asarray(means, float)
    sd = np.sqrt(np.asarray(scales, float)) if scale_is_variance else np.asarray(scales, float)
    comp = rng.choice(w.size, size=n, p=w / w.sum())
    return mu[comp] + sd[comp] * rng.standard_normal(n)


@dataclass
class MixtureModel:
    """Fixed-k Gaussian mixture fit under the full Jeffreys prior."""

    data: np.ndarray
    k: int = 3
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    split_frac: float = 0.02
    proposal_sd: float = 0.03
    cache_size: int = 256

    def __post_init__(self) -> None:
        self.data = np.ascontiguousarray(self.data, dtype=float)
        self.n = self.data.size
        if self.n < 50:
            raise ValueError("need at least 50 observations for the 2% split")
        self.n2 = int(math.floor(self.split_frac * self.n))
        if self.n2 < 1:
            raise ValueError("cheap split leaves an empty regularising block")
        self.dimension = 3 * self.k - 1
        self._prior_cache = lru_cache(maxsize=self.cache_size)(self._prior_uncached)

    # v <-> psi ------------------------------------------------------------
    def to_psi(self, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        k = self.k
        lam = np.concatenate([v[: k - 1], [0.0]])
        lam = lam - lam.max()
        w = np.exp(lam)
        w = w / w.sum()
        mu = v[k - 1 : 2 * k - 1].copy()
        sigma = np.exp(v[2 * k - 1 :])
        return w, mu, sigma

    def log_jacobian(self, v: np.ndarray) -> float:
        """log |d(w_free, sigma) / d(lambda, log sigma)| of the reparameterization."""
        w, _, sigma = self.to_psi(v)
        return float(np.sum(np.log(w)) + np.sum(np.log(sigma)))

    def from_psi(self, w, mu, sigma) -> np.ndarray:
        lam = np.log(np.asarray(w, float) / w[-1])[:-1]
        return np.concatenate([lam, np.asarray(mu, float), np.log(np.asarray(sigma, float))])

    # per-state log parts ---------------------------------------------------
    def loglik_main(self, v: np.ndarray) -> float:
        """Likelihood of observations after the first 2% block."""
        w, mu, sigma = self.to_psi(v)
        return kernels.mixture_loglik_range(self.data, w, mu, sigma, self.n2, self.n)

    def _prior_uncached(self, key: bytes) -> float:
        v = np.frombuffer(key)
        w, mu, sigma = self.to_psi(v)
        psi = pack_params(w, mu, sigma)
        jp = jeffreys_logprior(psi, self.quadrature)
        if not np.isfinite(jp):
            return -np.inf
        return jp

    def prior_block(self, v: np.ndarray) -> float:
        """Leading 2% likelihood block times Jeffreys prior times Jacobian."""
        w, mu, sigma = self.to_psi(v)
        l2 = kernels.mixture_loglik_range(self.data, w, mu, sigma, 0, self.n2)
        jp = self._prior_cache(np.ascontiguousarray(v).tobytes())
        return l2 + jp + self.log_jacobian(v)

    def factorized_target(self) -> FactorizedTarget:
        return FactorizedTarget(
            factors=[
                part_factor("main-likelihood", self.loglik_main),
                part_factor("jeffreys+2pct-lik", self.prior_block, cost_tag=EXPENSIVE),
            ],
            dimension=self.dimension,
            reference_log_ratio=self.reference_log_ratio,
        )

    def reference_log_ratio(self, current: np.ndarray, proposed: np.ndarray) -> float:
        # whole-dataset vectorized pass, independent of the range kernels
        def logpost(v: np.ndarray) -> float:
            w, mu, sigma = self.to_psi(v)
            ll = float(np.sum(kernels.mixture_logpdf_points(self.data, w, mu, sigma)))
            jp = jeffreys_logprior(pack_params(w, mu, sigma), self.quadrature)
            return ll + jp + self.log_jacobian(v)

        return logpost(proposed) - logpost(current)

    def rho2_hat(self, current: np.ndarray, proposed: np.ndarray) -> float:
        """Main-block plug-in estimate of the regularised prior-stage ratio."""
        scale = self.n2 / (self.n - self.n2)
        delta = self.loglik_main(proposed) - self.loglik_main(current)
        return math.exp(max(min(scale * delta, 50.0), -50.0))

    def default_kernel(self) -> GaussianRandomWalk:
        return GaussianRandomWalk(np.full(self.dimension, self.proposal_sd ** 2))

    def default_init(self) -> np.ndarray:
        qs = np.quantile(self.data, (np.arange(self.k) + 0.5) / self.k)
        sd = max(float(self.data.std() / self.k), 1e-3)
        return self.from_psi(
            np.full(self.k, 1.0 / self.k), qs, np.full(self.k, sd)
        )


def mixture_da_factors(model: MixtureModel) -> FactorizedTarget:
    """The 2%-split staged decomposition of the mixture posterior."""
    return model.factorized_target()
