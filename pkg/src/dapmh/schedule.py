"""Pre-committed randomness streams shared by serial and speculative samplers.

Every proposal innovation and every per-stage acceptance uniform is a pure
function of ``(seed, t)`` resp. ``(seed, t, stage)``, so any part of the
sampler (including tour construction, which peeks at future time indices out
of order) sees exactly the same draws.  Streams are realised as per-index
generators seeded through :class:`numpy.random.SeedSequence`, i.e. counter
style rather than sequential, which makes random access O(1).
"""

from __future__ import annotations

import threading
from collections import OrderedDict

import numpy as np

__all__ = ["RandomnessSchedule", "make_schedule"]

# stream tags keep innovations and uniforms statistically independent
_INNOVATION_STREAM = 0
_UNIFORM_STREAM = 1


class RandomnessSchedule:
    """Random-access innovation and uniform streams for one chain.

    ``innovation(t)`` is the d-dimensional standard normal draw driving the
    proposal at time ``t``;  ``uniform(t, k)`` is the U(0,1) variate compared
    against the stage-``k`` acceptance ratio at time ``t``.  Both depend only
    on ``(seed, t[, k])``:  repeated queries return identical values and two
    schedules with the same seed are indistinguishable.

    A note on capacities: ``uniform(t, k)`` does not depend on the ``stages``
    capacity (the per-``t`` uniform block is generated as one sequential
    stream, so shorter capacities are prefixes of longer ones), and likewise
    ``innovation(t)`` prefixes are stable in ``dimension``.
    """

    def __init__(self, seed: int, dimension: int, stages: int, cache_size: int = 512):
        if dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {dimension}")
        if stages < 1:
            raise ValueError(f"stages must be >= 1, got {stages}")
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.dimension = int(dimension)
        self.stages = int(stages)
        self._cache_size = int(cache_size)
        self._cache: OrderedDict[int, tuple[np.ndarray, np.ndarray]] = OrderedDict()
        self._lock = threading.Lock()

    def _draws_at(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        with self._lock:
            hit = self._cache.get(t)
            if hit is not None:
                self._cache.move_to_end(t)
                return hit
        innov = np.random.default_rng(
            [self.seed, _INNOVATION_STREAM, t]
        ).standard_normal(self.dimension)
        unif = np.random.default_rng([self.seed, _UNIFORM_STREAM, t]).random(self.stages)
        innov.flags.writeable = False
        unif.flags.writeable = False
        with self._lock:
            self._cache[t] = (innov, unif)
            if len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)
        return innov, unif

    def innovation(self, t: int) -> np.ndarray:
        """Standard-normal proposal innovation for absolute time index ``t``."""
        if t < 0:
            raise ValueError(f"time index must be >= 0, got {t}")
        return self._draws_at(int(t))[0]

    def uniform(self, t: int, k: int) -> float:
        """Acceptance uniform for time index ``t`` and stage ``k`` (0-based)."""
        if not 0 <= k < self.stages:
            raise ValueError(f"stage {k} outside capacity [0, {self.stages})")
        if t < 0:
            raise ValueError(f"time index must be >= 0, got {t}")
        return float(self._draws_at(int(t))[1][k])

    def uniforms(self, t: int) -> np.ndarray:
        """All stage uniforms for time index ``t`` (read-only view)."""
        return self._draws_at(int(t))[1]

    def __repr__(self) -> str:  # pragma: no cover
        return (
            f"RandomnessSchedule(seed={self.seed}, dimension={self.dimension}, "
            f"stages={self.stages})"
        )


def make_schedule(seed: int, dimension: int, stages: int) -> RandomnessSchedule:
    """Build the pre-committed randomness schedule for one chain."""
    return RandomnessSchedule(seed, dimension, stages)
