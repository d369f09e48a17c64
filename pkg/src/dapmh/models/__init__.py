from .beta_binomial import BetaBinomialModel, betabin_block_loglik, deal_counts
from .io import load_labeled_csv
from .logistic import LogisticModel, fit_mle, simulate_logistic
from .mixture import (
    MixtureModel,
    QuadratureSpec,
    fisher_info,
    jeffreys_logprior,
    mixture_da_factors,
    mixture_logpdf,
    pack_params,
    simulate_mixture,
    unpack_params,
)
from .normal_normal import NormalNormalModel, nn_posterior_params

__all__ = [
    "BetaBinomialModel",
    "betabin_block_loglik",
    "deal_counts",
    "load_labeled_csv",
    "LogisticModel",
    "fit_mle",
    "simulate_logistic",
    "MixtureModel",
    "QuadratureSpec",
    "fisher_info",
    "jeffreys_logprior",
    "mixture_da_factors",
    "mixture_logpdf",
    "pack_params",
    "simulate_mixture",
    "unpack_params",
    "NormalNormalModel",
    "nn_posterior_params",
]
