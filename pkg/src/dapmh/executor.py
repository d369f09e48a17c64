"""Parallel evaluation of tour nodes with a deterministic collection contract.

Workers are threads: the hot kernels release the GIL (numba ``nogil``respects
this; large-array numpy ops mostly do too), so the pool scales on multi-core
machines while keeping every evaluator argument shared read-only.  Results
are collected after all tasks finish (barrier semantics) into a map keyed by
node index and ordered by task submission, so the map content and iteration
order are independent of worker count and completion order.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from statistics import median
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

__all__ = ["EvalTask", "WorkerPoolConfig", "WorkerPool", "evaluate_tour", "wall_clock_probe"]


@dataclass(frozen=True)
class EvalTask:
    """One speculative evaluation request: a tree node and its fresh state."""

    node_index: int
    state: np.ndarray
    t: int


@dataclass(frozen=True)
class WorkerPoolConfig:
    workers: int = 1

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ValueError("worker count must be >= 1")


class WorkerPool:
    """Persistent thread pool reused across tours.

    A failed evaluation aborts the run: the exception propagates out of
    :meth:`evaluate` after the barrier.
    """

    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ValueError("worker count must be >= 1")
        self.workers = workers
        self._pool: Optional[ThreadPoolExecutor] = (
            ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
        )

    def evaluate(
        self, tasks: Sequence[EvalTask], evaluator: Callable[[np.ndarray], np.ndarray]
    ) -> Dict[int, np.ndarray]:
        indices = [task.node_index for task in tasks]
        if len(set(indices)) != len(indices):
            raise ValueError("tasks must target distinct nodes")
        if self._pool is None or len(tasks) <= 1:
            return {task.node_index: evaluator(task.state) for task in tasks}
        futures = [self._pool.submit(evaluator, task.state) for task in tasks]
        return {task.node_index: f.result() for task, f in zip(tasks, futures)}

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def __enter__(self) -> "WorkerPool":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def evaluate_tour(
    tasks: Sequence[EvalTask],
    evaluator: Callable[[np.ndarray], np.ndarray],
    config: WorkerPoolConfig,
) -> Dict[int, np.ndarray]:
    """Evaluate all tasks and return the node -> value map.

    The map is identical for every worker count (the evaluator is pure and
    collection order is fixed by the task list).
    """
    with WorkerPool(config.workers) as pool:
        return pool.evaluate(tasks, evaluator)


def wall_clock_probe(evaluator: Callable[[], object], reps: int) -> float:
    """Median-of-means estimate of seconds per evaluator call.

    Used to size injected likelihood costs and to report per-evaluation
    runtimes; ``reps`` calls are split into three chunks whose means are
    medianed, damping scheduler noise.
    """
    if reps < 3:
        raise ValueError("wall_clock_probe needs reps >= 3")
    times: List[float] = []
    for _ in range(reps):
        start = time.perf_counter()
        evaluator()
        times.append(time.perf_counter() - start)
    chunks = np.array_split(np.asarray(times), 3)
    return float(median(float(chunk.mean()) for chunk in chunks))
