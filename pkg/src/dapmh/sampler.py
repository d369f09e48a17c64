"""Chain drivers: serial and prefetched variants of both acceptance schemes.

All four algorithms consume the same pre-committed randomness schedule, and
the prefetched drivers perform the exact same floating-point comparisons as
their serial counterparts, so for a fixed seed the produced trajectory is
bit-identical across algorithm pairs (serial vs prefetched) and across worker
counts; tour shape only changes how much wall time a trajectory costs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .core import (
    CHEAP,
    ChainTrace,
    EvaluationError,
    FactorizedTarget,
    GaussianRandomWalk,
    accept_log_ratio,
)
from .delayed import OrderPolicy, reorder_factors
from .executor import EvalTask, WorkerPool
from .prefetch import MAX_TREE_DEPTH, BranchPolicy, build_tour, build_tour_da, consume_tour
from .schedule import RandomnessSchedule, make_schedule

__all__ = ["ALGORITHMS", "run_chain"]

ALGORITHMS = ("mh", "da", "mh+prefetch", "da+prefetch")


@dataclass
class _Recorder:
    """Accumulates per-iteration output and slices off the burn-in."""

    burnin: int
    states: List[np.ndarray] = field(default_factory=list)
    accepted: List[bool] = field(default_factory=list)
    stage: List[int] = field(default_factory=list)
    tour: List[int] = field(default_factory=list)
    rounds: int = 0

    def add(self, state: np.ndarray, accepted: bool, stage: int, tour_id: int) -> None:
        self.states.append(state)
        self.accepted.append(accepted)
        self.stage.append(stage)
        self.tour.append(tour_id)

    def trace(self) -> ChainTrace:
        n = len(self.states)
        lo = min(self.burnin, n)
        dims = self.states[0].shape[0] if self.states else 0
        states = (
            np.array(self.states[lo:])
            if n > lo
            else np.empty((0, dims))
        )
        return ChainTrace(
            states=states,
            accepted=np.array(self.accepted[lo:], dtype=bool),
            stage=np.array(self.stage[lo:], dtype=np.int64),
            tour=np.array(self.tour[lo:], dtype=np.int64),
            burnin=self.burnin,
            draws_per_round=(n / self.rounds) if self.rounds else 1.0,
        )


def _finite_or_raise(value: float, what: str) -> float:
    if math.isnan(value) or value == math.inf:
        raise EvaluationError(f"non-finite {what}: {value!r}")
    return value


def _observed_rate(accept_count: int, done: int) -> float:
    return accept_count / done if done else 0.5


class _BurninAdapter:
    """Single covariance refit at the end of burn-in.

    The refit is a pure function of the burn-in trajectory, so every
    algorithm variant and worker count derives the same adapted kernel;
    prefetched drivers additionally cap their tours at the boundary so no
    tour mixes the two kernels.
    """

    def __init__(self, kernel: GaussianRandomWalk, burnin: int, enabled: bool):
        self.kernel = kernel
        self.dimension = kernel.dimension
        # need enough burn-in draws for a usable covariance estimate
        self.boundary = burnin if enabled and burnin >= 10 * kernel.dimension else 0

    def kernel_at(self, t: int, recorder: _Recorder) -> GaussianRandomWalk:
        if self.boundary and t > self.boundary:
            self._refit(recorder)
        return self.kernel

    def horizon_cap(self, produced: int) -> int:
        if self.boundary and produced < self.boundary:
            return self.boundary - produced
        return MAX_TREE_DEPTH

    def _refit(self, recorder: _Recorder) -> None:
        states = np.array(recorder.states[: self.boundary])
        emp = np.cov(states, rowvar=False, ddof=1)
        emp = np.atleast_2d(emp)
        # shrink toward the diagonal and jitter so the factorization exists
        cov = 0.9 * emp + 0.1 * np.diag(np.diag(emp))
        cov = 0.5 * (cov + cov.T)
        cov += 1e-9 * max(float(np.max(np.diag(cov))), 1e-12) * np.eye(self.dimension)
        scale = 2.38**2 / self.dimension
        self.kernel = GaussianRandomWalk(scale * cov)
        self.boundary = 0  # refit happens once


def run_chain(
    target: FactorizedTarget,
    kernel: GaussianRandomWalk,
    init_state: np.ndarray,
    iters: int,
    burnin: int,
    seed: int,
    algo: str = "mh",
    workers: int = 1,
    policy: Optional[BranchPolicy] = None,
    order_policy: Optional[OrderPolicy] = None,
    rho_hat_fn: Optional[Callable[[np.ndarray, np.ndarray], float]] = None,
    schedule: Optional[RandomnessSchedule] = None,
    adapt_burnin: bool = False,
) -> ChainTrace:
    """Run one chain and return its post-burn-in trace.

    ``workers`` doubles as the tour capacity for the prefetched algorithms.
    The initial state must lie inside the support of every factor.
    ``adapt_burnin`` refits the walk covariance once, at the end of burn-in,
    from the burn-in samples (proposals stay fixed afterwards).
    """
    if algo not in ALGORITHMS:
        raise ValueError(f"algo must be one of {ALGORITHMS}, got {algo!r}")
    if iters < 1 or burnin < 0:
        raise ValueError("iters must be >= 1 and burnin >= 0")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    init_state = np.asarray(init_state, dtype=float)
    if init_state.shape != (target.dimension,):
        raise ValueError(
            f"init state shape {init_state.shape} does not match "
            f"target dimension {target.dimension}"
        )
    policy = policy or BranchPolicy()
    order_policy = order_policy or OrderPolicy()
    if schedule is None:
        schedule = make_schedule(seed, target.dimension, target.n_stages)
    if policy.needs_rho_hat and "prefetch" in algo and rho_hat_fn is None:
        raise ValueError(f"branch policy {policy.kind!r} needs a rho_hat estimator")

    recorder = _Recorder(burnin=burnin)
    total = burnin + iters
    adapter = _BurninAdapter(kernel, burnin, adapt_burnin)
    try:
        if algo == "mh":
            _run_mh_serial(target, adapter, init_state, total, schedule, recorder)
        elif algo == "da":
            _run_da_serial(
                target, adapter, init_state, total, schedule, order_policy, recorder
            )
        elif algo == "mh+prefetch":
            _run_mh_prefetch(
                target, adapter, init_state, total, schedule, workers, policy,
                rho_hat_fn, recorder,
            )
        else:
            _run_da_prefetch(
                target, adapter, init_state, total, schedule, workers, policy,
                order_policy, rho_hat_fn, recorder,
            )
    except EvaluationError as exc:
        exc.partial_trace = recorder.trace()
        raise
    return recorder.trace()


# ---------------------------------------------------------------------------
# serial drivers
# ---------------------------------------------------------------------------

def _run_mh_serial(target, adapter, state, total, schedule, recorder) -> None:
    use_parts = target.has_state_fns
    cur_total = target.log_total(state) if use_parts else None
    if use_parts and not math.isfinite(cur_total):
        raise EvaluationError("initial state lies outside the support")
    n_stages = target.n_stages
    for t in range(1, total + 1):
        kernel = adapter.kernel_at(t, recorder)
        proposed = state + kernel.step(schedule.innovation(t))
        if use_parts:
            new_total = target.log_total(proposed)
            log_ratio = new_total - cur_total
        else:
            log_ratio = target.log_ratio_sum(state, proposed)
        _finite_or_raise(log_ratio, "log MH ratio")
        if accept_log_ratio(log_ratio, schedule.uniform(t, 0)):
            state = proposed
            if use_parts:
                cur_total = new_total
            accepted = True
        else:
            accepted = False
        recorder.add(state, accepted, n_stages, t - 1)
        recorder.rounds += 1


def _check_cheap_first(target) -> None:
    seen_expensive = False
    for f in target.factors:
        if f.cost_tag != CHEAP:
            seen_expensive = True
        elif seen_expensive:
            raise ValueError(
                "staged algorithms require cheap factors to precede expensive ones"
            )


def _run_da_serial(target, adapter, state, total, schedule, order_policy, recorder) -> None:
    _check_cheap_first(target)
    if not target.has_state_fns:
        _run_da_serial_ratio(target, adapter, state, total, schedule, order_policy, recorder)
        return
    part_fns = [f.state_fn for f in target.factors]
    cache = target.part_values(state)
    if not np.all(np.isfinite(cache)):
        raise EvaluationError("initial state lies outside the support")
    perm = list(range(target.n_stages))
    for t in range(1, total + 1):
        if order_policy.kind != "fixed" and t > 1 and (t - 1) % order_policy.refresh_every == 0:
            perm = reorder_factors(target.factors, order_policy)
        proposed = state + adapter.kernel_at(t, recorder).step(schedule.innovation(t))
        new_vals = np.empty(target.n_stages)
        accepted = True
        stages_done = 0
        for pos, fi in enumerate(perm):
            factor = target.factors[fi]
            new_vals[fi] = part_fns[fi](proposed)
            log_rho = new_vals[fi] - cache[fi]
            _finite_or_raise(log_rho, f"stage log-ratio ({factor.id})")
            stages_done += 1
            factor.attempt_count += 1
            factor.last_value = log_rho
            if log_rho >= 0.0 or schedule.uniform(t, pos) < math.exp(log_rho):
                factor.success_count += 1
                continue
            accepted = False
            break
        if accepted:
            state = proposed
            cache = new_vals
        recorder.add(state, accepted, stages_done, t - 1)
        recorder.rounds += 1


def _run_da_serial_ratio(target, adapter, state, total, schedule, order_policy, recorder) -> None:
    """Ratio-factor fallback for targets without per-state log parts."""
    from .delayed import delayed_accept

    perm = list(range(target.n_stages))
    for t in range(1, total + 1):
        if order_policy.kind != "fixed" and t > 1 and (t - 1) % order_policy.refresh_every == 0:
            perm = reorder_factors(target.factors, order_policy)
        proposed = state + adapter.kernel_at(t, recorder).step(schedule.innovation(t))
        factors = [target.factors[i] for i in perm]
        outcome = delayed_accept(factors, state, proposed, t, schedule)
        for pos in range(outcome.stages_evaluated):
            factor = factors[pos]
            factor.attempt_count += 1
            factor.last_value = outcome.stage_log_rhos[pos]
            if outcome.accepted or pos < outcome.stages_evaluated - 1:
                factor.success_count += 1
        if outcome.accepted:
            state = proposed
        recorder.add(state, outcome.accepted, outcome.stages_evaluated, t - 1)
        recorder.rounds += 1


# ---------------------------------------------------------------------------
# prefetched drivers
# ---------------------------------------------------------------------------

def _run_mh_prefetch(
    target, adapter, state, total, schedule, workers, policy, rho_hat_fn, recorder
) -> None:
    if not target.has_state_fns:
        raise ValueError("prefetching needs per-state log parts on every factor")
    cur_total = target.log_total(state)
    if not math.isfinite(cur_total):
        raise EvaluationError("initial state lies outside the support")
    evaluator = lambda theta: np.array([target.log_total(theta)])
    accept_count = 0
    produced = 0
    round_id = 0
    with WorkerPool(workers) as pool:
        while produced < total:
            live_policy = policy
            if policy.kind == "observed-rate":
                live_policy = BranchPolicy(
                    kind=policy.kind,
                    alpha_obs=_observed_rate(accept_count, produced),
                    beta_cap=policy.beta_cap,
                )
            tour = build_tour(
                workers,
                live_policy,
                state,
                produced,
                adapter.kernel_at(produced + 1, recorder),
                schedule,
                rho_hat_fn=rho_hat_fn,
                max_depth=min(
                    MAX_TREE_DEPTH, total - produced, adapter.horizon_cap(produced)
                ),
            )
            tour.root_values = np.array([cur_total])
            tasks = [
                EvalTask(node.index, node.state_value, produced + node.depth)
                for node in tour.eval_nodes
            ]
            evals = pool.evaluate(tasks, evaluator)
            states, draws, info = consume_tour(tour, evals, produced, schedule)
            for s, acc in zip(states, info["accepted"]):
                recorder.add(s, acc, target.n_stages, round_id)
                accept_count += int(acc)
            produced += draws
            round_id += 1
            recorder.rounds += 1
            state = info["final_state"]
            cur_total = float(info["final_values"][0])


def _run_da_prefetch(
    target, adapter, state, total, schedule, workers, policy, order_policy,
    rho_hat_fn, recorder,
) -> None:
    if not target.has_state_fns:
        raise ValueError("prefetching needs per-state log parts on every factor")
    _check_cheap_first(target)
    part_fns = [f.state_fn for f in target.factors]
    cache = target.part_values(state)
    if not np.all(np.isfinite(cache)):
        raise EvaluationError("initial state lies outside the support")
    perm = list(range(target.n_stages))
    accept_count = 0
    produced = 0
    round_id = 0
    with WorkerPool(workers) as pool:
        while produced < total:
            if order_policy.kind != "fixed" and produced > 0 and produced % order_policy.refresh_every == 0:
                perm = reorder_factors(target.factors, order_policy)
            cheap_pos = [i for i in perm if target.factors[i].cost_tag == CHEAP]
            exp_pos = [i for i in perm if target.factors[i].cost_tag != CHEAP]
            cheap_fns = [part_fns[i] for i in cheap_pos]
            exp_fns = [part_fns[i] for i in exp_pos]

            def evaluator(theta, _fns=tuple(exp_fns)):
                return np.array([fn(theta) for fn in _fns])

            live_policy = policy
            if policy.kind == "observed-rate":
                live_policy = BranchPolicy(
                    kind=policy.kind,
                    alpha_obs=_observed_rate(accept_count, produced),
                    beta_cap=policy.beta_cap,
                )
            horizon = min(total - produced, adapter.horizon_cap(produced))
            if order_policy.kind != "fixed":
                # tours never span an order-refresh boundary, keeping the
                # uniform-to-stage assignment identical to the serial chain
                horizon = min(
                    horizon,
                    order_policy.refresh_every - produced % order_policy.refresh_every,
                )
            tour = build_tour_da(
                workers,
                live_policy,
                cheap_fns,
                state,
                produced,
                adapter.kernel_at(produced + 1, recorder),
                schedule,
                n_expensive=len(exp_pos),
                root_cheap_values=cache[cheap_pos],
                rho_hat_fn=rho_hat_fn,
                max_depth=min(MAX_TREE_DEPTH, horizon),
            )
            tour.root_values = cache[exp_pos] if exp_pos else np.empty(0)
            tasks = [
                EvalTask(node.index, node.state_value, produced + node.depth)
                for node in tour.eval_nodes
            ]
            evals = pool.evaluate(tasks, evaluator)
            states, draws, info = consume_tour(tour, evals, produced, schedule)
            _update_da_stats(target, perm, info)
            for s, acc, stg in zip(states, info["accepted"], info["stages"]):
                recorder.add(s, acc, stg, round_id)
                accept_count += int(acc)
            produced += draws
            round_id += 1
            recorder.rounds += 1
            state = info["final_state"]
            # refresh the per-factor cache from the walked path's final values
            new_cache = np.empty_like(cache)
            for j, i in enumerate(cheap_pos):
                new_cache[i] = info["final_cheap_values"][j]
            for j, i in enumerate(exp_pos):
                new_cache[i] = info["final_values"][j]
            cache = new_cache


def _update_da_stats(target, perm, info) -> None:
    """Mirror the serial chain's per-factor counters from a consumed tour."""
    for acc, log_rhos in zip(info["accepted"], info["stage_log_rhos"]):
        for pos, log_rho in enumerate(log_rhos):
            factor = target.factors[perm[pos]]
            factor.attempt_count += 1
            if acc or pos < len(log_rhos) - 1:
                factor.success_count += 1
            factor.last_value = log_rho
