import math

import numpy as np
import pytest

from dapmh.models import (
    BetaBinomialModel,
    LogisticModel,
    NormalNormalModel,
    betabin_block_loglik,
    deal_counts,
    fit_mle,
    nn_posterior_params,
    simulate_logistic,
)


# ---------------------------------------------------------------------------
# normal-normal
# ---------------------------------------------------------------------------

def test_nn_posterior_params_caption_values():
    m = NormalNormalModel(x=3.0, sigma_mu=10.0)
    mean, var = nn_posterior_params(m)
    assert mean == pytest.approx(3.0 / 1.01)
    assert var == pytest.approx(1.0 / 1.01)
    assert mean == pytest.approx(2.970297, abs=1e-6)
    assert var == pytest.approx(0.990099, abs=1e-6)


def test_nn_zero_observation_symmetry():
    for sig in (0.5, 3.0, 100.0):
        mean, _ = nn_posterior_params(NormalNormalModel(x=0.0, sigma_mu=sig))
        assert mean == 0.0


def test_nn_flat_prior_limit():
    mean, var = nn_posterior_params(NormalNormalModel(x=1.7, sigma_mu=1e9))
    assert mean == pytest.approx(1.7, rel=1e-9)
    assert var == pytest.approx(1.0, rel=1e-9)


# ---------------------------------------------------------------------------
# beta-binomial blocks
# ---------------------------------------------------------------------------

def test_deal_counts_round_robin_example():
    assert deal_counts(32, 10).tolist() == [4, 3, 3, 3, 3, 3, 3, 3, 3, 4]


def test_deal_counts_conserves_total():
    for total, blocks in [(32, 10), (68, 10), (100, 100), (7, 3), (0, 5)]:
        counts = deal_counts(total, blocks)
        assert counts.sum() == total
        assert counts.max() - counts.min() <= 1


def test_single_part_is_full_bernoulli_product():
    m = BetaBinomialModel(parts=1)
    p = 0.37
    full = m.x * np.log(p) + (m.N - m.x) * np.log1p(-p)
    assert betabin_block_loglik(m, p, 0) == pytest.approx(full)


def test_blocks_sum_to_full_loglik_symmetric_p():
    m = BetaBinomialModel(parts=10)
    total = sum(betabin_block_loglik(m, 0.5, b) for b in range(10))
    assert total == pytest.approx(100 * np.log(0.5))


@pytest.mark.parametrize("parts", [1, 7, 10, 50, 100])
def test_blocks_partition_any_p(parts):
    m = BetaBinomialModel(parts=parts)
    for p in (0.1, 0.32, 0.9):
        total = sum(betabin_block_loglik(m, p, b) for b in range(parts))
        full = m.x * np.log(p) + (m.N - m.x) * np.log1p(-p)
        assert total == pytest.approx(full, rel=1e-12)


def test_block_out_of_support():
    m = BetaBinomialModel(parts=10)
    assert betabin_block_loglik(m, 1.0, 0) == -np.inf
    assert betabin_block_loglik(m, -0.2, 3) == -np.inf


def test_block_index_validated():
    m = BetaBinomialModel(parts=10)
    with pytest.raises(ValueError):
        betabin_block_loglik(m, 0.5, 10)


# ---------------------------------------------------------------------------
# logistic
# ---------------------------------------------------------------------------

def test_logistic_loglik_at_zero_coefficients(logistic_data):
    X, y = logistic_data
    m = LogisticModel(X, y)
    assert m.loglik(np.zeros(5), "all") == pytest.approx(1000 * math.log(0.5))
    n_cheap = m.r
    assert m.loglik(np.zeros(5), "cheap") == pytest.approx(n_cheap * math.log(0.5))


def test_logistic_cheap_plus_expensive_is_all(logistic_data):
    X, y = logistic_data
    m = LogisticModel(X, y)
    rng = np.random.default_rng(0)
    for _ in range(5):
        beta = rng.normal(scale=0.5, size=5)
        total = m.loglik(beta, "cheap") + m.loglik(beta, "expensive")
        assert total == pytest.approx(m.loglik(beta, "all"), rel=1e-12)


def test_logistic_matches_per_point_oracle():
    X = np.array([[1.0, 0.5], [-0.5, 2.0], [0.1, -1.0], [2.0, 0.0]])
    y = np.array([1.0, 0.0, 0.0, 1.0])
    m = LogisticModel(X, y, split_r=0.5)
    beta = np.array([1.0, -1.0])
    expected = sum(
        y[i] * (X[i] @ beta) - np.log1p(np.exp(X[i] @ beta)) for i in range(4)
    )
    assert m.loglik(beta, "all") == pytest.approx(float(expected), abs=1e-12)


def test_simulate_logistic_balanced_at_zero_signal():
    X, y = simulate_logistic(4000, 3, np.zeros(3), seed=11)
    assert abs(y.mean() - 0.5) <= 3 * math.sqrt(0.25 / 4000)


def test_simulate_logistic_deterministic():
    a = simulate_logistic(50, 2, (0.5, -0.5), seed=3)
    b = simulate_logistic(50, 2, (0.5, -0.5), seed=3)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_mle_recovers_truth_at_scale():
    beta_true = np.array([1.0, 0.0, 0.0])
    X, y = simulate_logistic(100_000, 3, beta_true, seed=21)
    beta_hat, _ = fit_mle(X, y)
    assert np.all(np.abs(beta_hat - beta_true) <= 0.05)


def test_cost_injection_value_neutral(logistic_data):
    X, y = logistic_data
    plain = LogisticModel(X, y, cost_c=0)
    burned = LogisticModel(X, y, cost_c=2000)
    beta = np.full(5, 0.3)
    a = plain.loglik(beta, "expensive")
    b = burned.loglik(beta, "expensive")
    assert np.float64(a).tobytes() == np.float64(b).tobytes()


def test_logistic_validation(logistic_data):
    X, y = logistic_data
    with pytest.raises(ValueError):
        LogisticModel(X, y[:-1])
    with pytest.raises(ValueError):
        LogisticModel(X, y, split_r=0.0)


# ---------------------------------------------------------------------------
# factor-sum vs reference-ratio consistency (all models)
# ---------------------------------------------------------------------------

def _consistency(target, pairs, rtol=1e-10):
    for x, y in pairs:
        ref = target.reference_log_ratio(x, y)
        total = sum(f.log_ratio(x, y) for f in target.factors)
        if not math.isfinite(ref):
            assert total == ref
            continue
        assert total == pytest.approx(ref, rel=rtol, abs=1e-10)


def test_factorization_consistency_normal_normal():
    m = NormalNormalModel()
    rng = np.random.default_rng(1)
    pairs = [
        (rng.normal(3, 2, size=1), rng.normal(3, 2, size=1)) for _ in range(1000)
    ]
    _consistency(m.factorized_target(), pairs)


def test_factorization_consistency_beta_binomial():
    m = BetaBinomialModel(parts=25)
    rng = np.random.default_rng(2)
    pairs = [
        (rng.uniform(0.05, 0.95, size=1), rng.uniform(0.05, 0.95, size=1))
        for _ in range(1000)
    ]
    _consistency(m.factorized_target(), pairs)


def test_factorization_consistency_logistic(logistic_data):
    X, y = logistic_data
    m = LogisticModel(X, y)
    rng = np.random.default_rng(3)
    pairs = [
        (rng.normal(scale=0.3, size=5), rng.normal(scale=0.3, size=5))
        for _ in range(1000)
    ]
    _consistency(m.factorized_target(), pairs, rtol=1e-10)
