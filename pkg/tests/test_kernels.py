import os
import subprocess
import sys

import numpy as np
import pytest

from dapmh import kernels


@pytest.fixture(scope="module")
def logistic_inputs():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((300, 4))
    y = (rng.random(300) < 0.5).astype(float)
    beta = rng.normal(scale=0.5, size=4)
    return X, y, beta


def test_backends_agree_logistic(logistic_inputs):
    X, y, beta = logistic_inputs
    ref = kernels.numpy_reference()["logistic_loglik_range"](X, y, beta, 0, 300, 0)
    got = kernels.logistic_loglik_range(X, y, beta, 0, 300, 0)
    assert got == pytest.approx(ref, rel=1e-12, abs=1e-9)


def test_backends_agree_mixture():
    rng = np.random.default_rng(6)
    xs = np.ascontiguousarray(rng.normal(size=500))
    w = np.array([0.2, 0.5, 0.3])
    mu = np.array([-1.0, 0.0, 2.0])
    sigma = np.array([0.5, 1.0, 2.0])
    ref = kernels.numpy_reference()["mixture_loglik_range"](xs, w, mu, sigma, 0, 500)
    got = kernels.mixture_loglik_range(xs, w, mu, sigma, 0, 500)
    assert got == pytest.approx(ref, rel=1e-12)


def test_backends_agree_fisher():
    xs = np.linspace(-30, 30, 400)
    ws = np.full(400, 60 / 400)
    w = np.array([0.3, 0.7])
    mu = np.array([-2.0, 3.0])
    sigma = np.array([1.0, 2.0])
    ref = kernels.numpy_reference()["fisher_info_matrix"](xs, ws, w, mu, sigma)
    got = kernels.fisher_info_matrix(xs, ws, w, mu, sigma)
    assert np.allclose(got, ref, rtol=1e-10, atol=1e-12)


def test_cost_injection_value_neutral(logistic_inputs):
    X, y, beta = logistic_inputs
    plain = kernels.logistic_loglik_range(X, y, beta, 0, 300, 0)
    burned = kernels.logistic_loglik_range(X, y, beta, 0, 300, 1000)
    assert np.float64(plain).tobytes() == np.float64(burned).tobytes()


def test_empty_range_is_zero(logistic_inputs):
    X, y, beta = logistic_inputs
    assert kernels.logistic_loglik_range(X, y, beta, 10, 10, 0) == 0.0


def test_logistic_matches_per_point_oracle():
    X = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, -1.0], [-1.0, 2.0]])
    y = np.array([1.0, 0.0, 1.0, 0.0])
    beta = np.array([1.0, -1.0])
    expected = 0.0
    for i in range(4):
        eta = float(X[i] @ beta)
        expected += y[i] * eta - np.log1p(np.exp(eta))
    got = kernels.logistic_loglik_range(X, y, beta, 0, 4, 0)
    assert got == pytest.approx(expected, abs=1e-12)


def test_env_flag_forces_numpy_backend():
    code = (
        "import dapmh.kernels as k; "
        "assert not k.USING_NUMBA; assert k.BACKEND == 'numpy'; "
        "import numpy as np; "
        "x = k.logistic_loglik_range(np.ones((3,2)), np.ones(3), np.zeros(2), 0, 3, 0); "
        "print(round(x, 6))"
    )
    env = dict(os.environ, DAPMH_BACKEND="numpy")
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True
    )
    assert out.returncode == 0, out.stderr
    assert out.stdout.strip() == str(round(3 * float(np.log(0.5)), 6))


def test_env_flag_rejects_garbage():
    env = dict(os.environ, DAPMH_BACKEND="cuda")
    out = subprocess.run(
        [sys.executable, "-c", "import dapmh.kernels"],
        env=env, capture_output=True, text=True,
    )
    assert out.returncode != 0
