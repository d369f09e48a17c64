"""Chain-quality metrics: autocorrelation, ESS and the relative-gain index."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

__all__ = [
    "autocorrelation",
    "integrated_autocorrelation_time",
    "effective_sample_size",
    "relative_gain",
    "DiagnosticsReport",
]


def autocorrelation(series: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased-normalized autocorrelation at lags 0..max_lag.

    A constant series is defined to have ACF 1 at lag 0 and 0 elsewhere.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if n <= max_lag:
        raise ValueError(f"series length {n} must exceed max_lag {max_lag}")
    if np.ptp(x) == 0.0:  # constant series, including float-rounding residue
        acf = np.zeros(max_lag + 1)
        acf[0] = 1.0
        return acf
    x = x - x.mean()
    # FFT convolution; biased normalization divides every lag by n
    nfft = int(2 ** np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conjugate(f), nfft)[: max_lag + 1] / n
    return acov / acov[0]


def _iat_positive_sequence(x: np.ndarray) -> float:
    acf = autocorrelation(x, min(x.size - 1, x.size // 2))
    total = 0.0
    m = 0
    while 2 * m + 1 < acf.size:
        pair = acf[2 * m] + acf[2 * m + 1]
        if pair <= 0.0:
            break
        total += pair
        m += 1
    return max(2.0 * total - 1.0, 1.0)


def integrated_autocorrelation_time(series: np.ndarray) -> float:
    """IAT via Geyer's initial-positive-sequence truncation.

    Consecutive ACF pairs are summed while the pair sums stay positive; the
    estimate is ``2 * sum(pairs) - 1`` so an iid series gives 1.  Requires at
    least 1000 points for a trustworthy estimate.
    """
    x = np.asarray(series, dtype=float).ravel()
    if x.size < 1000:
        raise ValueError("need at least 1000 points to estimate the IAT")
    return _iat_positive_sequence(x)


def _ess_unchecked(x: np.ndarray) -> float:
    if np.ptp(x) == 0.0:
        return 1.0
    return x.size / _iat_positive_sequence(x)


def effective_sample_size(series: np.ndarray) -> float:
    """ESS = T / tau; for multivariate chains the per-coordinate minimum.

    A repeated-value chain (all rejections) reports the floor of 1.0 rather
    than erroring.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim == 1:
        if np.ptp(x) == 0.0:
            return 1.0
        return x.size / integrated_autocorrelation_time(x)
    return min(effective_sample_size(x[:, j]) for j in range(x.shape[1]))


def relative_gain(ess_da: float, t_da: float, ess_mh: float, t_mh: float) -> float:
    """(ESS/time) of the staged sampler over (ESS/time) of the plain one."""
    if t_da <= 0.0 or t_mh <= 0.0:
        raise ValueError("runtimes must be positive")
    return (ess_da / t_da) / (ess_mh / t_mh)


@dataclass
class DiagnosticsReport:
    """Condensed run summary written next to every samples file."""

    ess: float
    tau: float
    acceptance_rate: float
    wall_seconds: float
    draws_per_iteration: float
    rg: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DiagnosticsReport":
        return cls(**{k: data[k] for k in cls.__dataclass_fields__ if k in data})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def report_from_trace(
    states: np.ndarray,
    acceptance_rate: float,
    wall_seconds: float,
    draws_per_iteration: float,
    thin: int = 1,
) -> DiagnosticsReport:
    """Diagnostics over the (optionally thinned) post-burn-in states."""
    x = np.atleast_2d(np.asarray(states, dtype=float))
    if thin > 1:
        x = x[::thin]
    # short runs still get a best-effort estimate in their report
    ess = min(_ess_unchecked(x[:, j]) for j in range(x.shape[1]))
    tau = x.shape[0] / ess if ess > 0 else float("inf")
    return DiagnosticsReport(
        ess=float(ess),
        tau=float(tau),
        acceptance_rate=float(acceptance_rate),
        wall_seconds=float(wall_seconds),
        draws_per_iteration=float(draws_per_iteration),
    )
