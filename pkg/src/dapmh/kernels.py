"""Hot numeric kernels: numba-compiled fast path, pure-numpy fallback.

The backend is chosen once at import from the ``DAPMH_BACKEND`` environment
variable: ``auto`` (default) uses numba when it imports, ``numba`` requires
it, ``numpy`` forces the fallback.  Kernels are compiled with ``nogil`` so
the thread-pool executor scales across cores, and without ``fastmath`` so
results are reproducible run to run.  The two backends agree to float
round-off (summation order differs); each backend is individually
deterministic, which is what the trace-reproducibility guarantees rely on.

``benchmarks/backend_bench.py`` times both paths side by side.
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = [
    "BACKEND",
    "USING_NUMBA",
    "logistic_loglik_range",
    "mixture_loglik_range",
    "mixture_logpdf_points",
    "mixture_score_matrix",
    "fisher_info_matrix",
    "burn_ops",
]

_LOG_2PI = math.log(2.0 * math.pi)

_requested = os.environ.get("DAPMH_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"DAPMH_BACKEND must be one of auto/numba/numpy, got {_requested!r}"
    )

USING_NUMBA = False
if _requested in ("auto", "numba"):
    try:
        from numba import njit

        USING_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise
BACKEND = "numba" if USING_NUMBA else "numpy"

_JIT = dict(cache=True, nogil=True, fastmath=False)


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------

def _burn_np(n_terms: int, cost_c: int) -> float:
    # bounded contraction so the sink never overflows; two flops per unit
    ws = np.full(max(int(n_terms), 1), 1.5)
    for _ in range(int(cost_c)):
        np.multiply(ws, 0.5, out=ws)
        np.add(ws, 1.0, out=ws)
    return float(ws[0])


def _logistic_loglik_np(X, y, beta, start, stop, cost_c):
    if stop <= start:
        return 0.0
    eta = X[start:stop] @ beta
    ll = float(np.sum(y[start:stop] * eta - np.logaddexp(0.0, eta)))
    if cost_c > 0:
        ll = ll + 0.0 * _burn_np(stop - start, cost_c)
    return ll


def _mixture_loglik_range_np(xs, w, mu, sigma, start, stop):
    if stop <= start:
        return 0.0
    comp = _component_logpdf_np(xs[start:stop], w, mu, sigma)
    m = comp.max(axis=1)
    return float(np.sum(m + np.log(np.sum(np.exp(comp - m[:, None]), axis=1))))


def _component_logpdf_np(xs, w, mu, sigma):
    z = (xs[:, None] - mu[None, :]) / sigma[None, :]
    return np.log(w)[None, :] - np.log(sigma)[None, :] - 0.5 * _LOG_2PI - 0.5 * z * z


def _mixture_logpdf_points_np(xs, w, mu, sigma):
    comp = _component_logpdf_np(xs, w, mu, sigma)
    m = comp.max(axis=1)
    return m + np.log(np.sum(np.exp(comp - m[:, None]), axis=1))


def _mixture_score_matrix_np(xs, w, mu, sigma):
    """Score of the log mixture density in the free parameterization.

    Rows follow (w_1..w_{k-1}, mu_1..mu_k, sigma_1..sigma_k) with the last
    weight dependent; for k = 1 there are no weight coordinates.
    """
    k = w.size
    dens = np.exp(_component_logpdf_np(xs, w, mu, sigma) - np.log(w)[None, :])
    f = dens @ w
    score = np.empty((xs.size, 3 * k - 1))
    for i in range(k - 1):
        score[:, i] = (dens[:, i] - dens[:, k - 1]) / f
    z = (xs[:, None] - mu[None, :]) / sigma[None, :]
    wdens = w[None, :] * dens / f[:, None]
    score[:, k - 1 : 2 * k - 1] = wdens * z / sigma[None, :]
    score[:, 2 * k - 1 :] = wdens * (z * z - 1.0) / sigma[None, :]
    return score, f


def _fisher_info_np(nodes, weights, w, mu, sigma):
    score, f = _mixture_score_matrix_np(nodes, w, mu, sigma)
    return (score * (weights * f)[:, None]).T @ score


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if USING_NUMBA:

    @njit(**_JIT)
    def _logistic_loglik_nb(X, y, beta, start, stop, cost_c):
        p = beta.shape[0]
        total = 0.0
        sink = 0.0
        for i in range(start, stop):
            eta = 0.0
            for j in range(p):
                eta += X[i, j] * beta[j]
            if eta > 0.0:
                total += (y[i] - 1.0) * eta - np.log1p(np.exp(-eta))
            else:
                total += y[i] * eta - np.log1p(np.exp(eta))
            acc = 1.5
            for _ in range(cost_c):
                acc = acc * 0.5 + 1.0
            sink += acc
        return total + 0.0 * sink

    @njit(**_JIT)
    def _mixture_loglik_range_nb(xs, w, mu, sigma, start, stop):
        k = w.shape[0]
        const = np.empty(k)
        inv = np.empty(k)
        for j in range(k):
            const[j] = np.log(w[j]) - np.log(sigma[j]) - 0.5 * _LOG_2PI
            inv[j] = 1.0 / sigma[j]
        comp = np.empty(k)
        total = 0.0
        for i in range(start, stop):
            m = -np.inf
            for j in range(k):
                z = (xs[i] - mu[j]) * inv[j]
                comp[j] = const[j] - 0.5 * z * z
                if comp[j] > m:
                    m = comp[j]
            s = 0.0
            for j in range(k):
                s += np.exp(comp[j] - m)
            total += m + np.log(s)
        return total

    @njit(**_JIT)
    def _fisher_info_nb(nodes, weights, w, mu, sigma):
        k = w.shape[0]
        d = 3 * k - 1
        info = np.zeros((d, d))
        dens = np.empty(k)
        zbuf = np.empty(k)
        score = np.empty(d)
        inv = np.empty(k)
        amp = np.empty(k)
        for j in range(k):
            inv[j] = 1.0 / sigma[j]
            amp[j] = np.exp(-0.5 * _LOG_2PI) * inv[j]
        for q in range(nodes.shape[0]):
            x = nodes[q]
            f = 0.0
            for j in range(k):
                z = (x - mu[j]) * inv[j]
                zbuf[j] = z
                dens[j] = amp[j] * np.exp(-0.5 * z * z)
                f += w[j] * dens[j]
            for j in range(k - 1):
                score[j] = (dens[j] - dens[k - 1]) / f
            for j in range(k):
                wd = w[j] * dens[j] / f
                score[k - 1 + j] = wd * zbuf[j] * inv[j]
                score[2 * k - 1 + j] = wd * (zbuf[j] * zbuf[j] - 1.0) * inv[j]
            wf = weights[q] * f
            # symmetric accumulation: fill the upper triangle only
            for a in range(d):
                sa = score[a] * wf
                for b in range(a, d):
                    info[a, b] += sa * score[b]
        for a in range(d):
            for b in range(a):
                info[a, b] = info[b, a]
        return info


# ---------------------------------------------------------------------------
# public entry points (backend-dispatched)
# ---------------------------------------------------------------------------

def logistic_loglik_range(X, y, beta, start, stop, cost_c=0):
    """Log-likelihood of observations [start, stop) under a logit model.

    ``cost_c`` injects that many artificial flops per term; the burned work
    feeds the result through ``+ 0.0 * sink`` so values are bit-identical for
    every cost level.
    """
    if USING_NUMBA:
        return float(
            _logistic_loglik_nb(X, y, beta, int(start), int(stop), int(cost_c))
        )
    return _logistic_loglik_np(X, y, beta, int(start), int(stop), int(cost_c))


def mixture_loglik_range(xs, w, mu, sigma, start, stop):
    """Gaussian-mixture log-likelihood of observations [start, stop)."""
    if USING_NUMBA:
        return float(_mixture_loglik_range_nb(xs, w, mu, sigma, int(start), int(stop)))
    return _mixture_loglik_range_np(xs, w, mu, sigma, int(start), int(stop))


def mixture_logpdf_points(xs, w, mu, sigma):
    """Pointwise mixture log-density (always the numpy path; not hot)."""
    return _mixture_logpdf_points_np(np.asarray(xs, dtype=float), w, mu, sigma)


def mixture_score_matrix(xs, w, mu, sigma):
    """Free-parameterization score rows at each point (numpy path)."""
    return _mixture_score_matrix_np(np.asarray(xs, dtype=float), w, mu, sigma)[0]


def fisher_info_matrix(nodes, weights, w, mu, sigma):
    """Quadrature accumulation of the score outer-product integral."""
    if USING_NUMBA:
        return _fisher_info_nb(nodes, weights, w, mu, sigma)
    return _fisher_info_np(nodes, weights, w, mu, sigma)


def burn_ops(n_terms: int, cost_c: int) -> float:
    """Busy-work helper used by timing probes and benchmarks."""
    if USING_NUMBA:
        x = np.zeros(max(int(n_terms), 1))
        return float(_logistic_loglik_nb(np.zeros((max(int(n_terms), 1), 1)), x,
                                         np.zeros(1), 0, max(int(n_terms), 1),
                                         int(cost_c)))
    return _burn_np(n_terms, cost_c)


def numpy_reference():
    """The pure-numpy implementations, for cross-backend tests/benchmarks."""
    return {
        "logistic_loglik_range": _logistic_loglik_np,
        "mixture_loglik_range": _mixture_loglik_range_np,
        "fisher_info_matrix": _fisher_info_np,
    }


def numba_reference():
    """The jitted implementations when available, else None."""
    if not USING_NUMBA:
        return None
    return {
        "logistic_loglik_range": _logistic_loglik_nb,
        "mixture_loglik_range": _mixture_loglik_range_nb,
        "fisher_info_matrix": _fisher_info_nb,
    }
