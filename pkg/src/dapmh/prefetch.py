"""Speculative tours over the binary accept/reject decision tree.

Node indexing follows the binary-heap convention: the root (current state) is
0 and the children of node i are 2i+1 (the proposal at the next time step was
rejected, state unchanged) and 2i+2 (it was accepted, state carries the fresh
proposal).  A node at depth d lives at absolute time t0 + d, and because all
innovations and uniforms are pre-committed per time index, every node's state
is known at construction time; only the target evaluations are speculative.

Tour growth is greedy on the reach probability gamma: selecting proposal node
j (whose parent has reach probability g and estimated acceptance alpha) makes
two new proposals reachable, the accept-side continuation 2j+2 with g*alpha
and the reject-side continuation 2j with g*(1-alpha).

The delayed-acceptance variant screens every selected proposal through the
cheap factor stages, whose uniforms are already committed: a cheap-rejected
proposal is a certain rejection, so the node is kept in the tour as a free
rejection (inheriting the parent's state and cached values, nothing to
evaluate) and construction descends its rejection branch, reaching deeper
into the tree at zero worker cost.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import EvaluationError, GaussianRandomWalk
from .schedule import RandomnessSchedule

__all__ = [
    "MAX_TREE_DEPTH",
    "PrefetchNode",
    "BranchPolicy",
    "AlphaContext",
    "Tour",
    "child_gamma",
    "estimate_alpha",
    "build_tour",
    "build_tour_da",
    "consume_tour",
]

# bounds index arithmetic: node indices grow as 2**depth (python ints are
# arbitrary width, the cap just keeps trees finite when rejections are free)
MAX_TREE_DEPTH = 64

_POLICIES = ("static-half", "observed-rate", "uniform-aware", "approx-ratio", "capped-approx")


@dataclass
class PrefetchNode:
    """One tree position selected into a tour.

    ``needs_eval`` marks acceptance nodes carrying a fresh proposal whose
    expensive block a worker must evaluate.  ``cheap_rejected`` and
    ``certain_accept`` mark positions fully decided during construction; both
    are free (no evaluation) and a cheap-rejected node inherits its parent's
    state and cached values.
    """

    index: int
    depth: int
    gamma: float
    state_value: np.ndarray
    needs_eval: bool
    cheap_rejected: bool = False
    certain_accept: bool = False
    stage_log_rhos: Tuple[float, ...] = ()
    stages_evaluated: int = 0
    cheap_values: Optional[np.ndarray] = None


@dataclass(frozen=True)
class BranchPolicy:
    """Per-node acceptance-probability estimate used to grow the tour.

    static-half      alpha = 0.5 (classic static prefetching)
    observed-rate    alpha = the chain's running acceptance rate
    uniform-aware    alpha = 1 - u (the committed uniform at that decision)
    approx-ratio     alpha = 1{u < rho_hat} (follow the estimated path)
    capped-approx    alpha = min(beta_cap, rho_hat)
    """

    kind: str = "static-half"
    alpha_obs: float = 0.5
    beta_cap: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in _POLICIES:
            raise ValueError(f"unknown branch policy {self.kind!r}")
        if not 0.0 <= self.alpha_obs <= 1.0:
            raise ValueError("alpha_obs must lie in [0, 1]")
        if not 0.0 < self.beta_cap <= 1.0:
            raise ValueError("beta_cap must lie in (0, 1]")

    @property
    def needs_rho_hat(self) -> bool:
        return self.kind in ("approx-ratio", "capped-approx")


@dataclass(frozen=True)
class AlphaContext:
    """Inputs a branch policy may require at one decision node."""

    u: Optional[float] = None
    rho_hat: Optional[float] = None


def child_gamma(parent_gamma: float, alpha: float, branch: str) -> float:
    """Reach probability of a child given the parent's and the branch taken."""
    if not 0.0 <= parent_gamma <= 1.0 or not 0.0 <= alpha <= 1.0:
        raise ValueError("probabilities must lie in [0, 1]")
    if branch == "accept":
        return parent_gamma * alpha
    if branch == "reject":
        return parent_gamma * (1.0 - alpha)
    raise ValueError(f"branch must be 'accept' or 'reject', got {branch!r}")


def estimate_alpha(policy: BranchPolicy, context: AlphaContext) -> float:
    """Acceptance-probability estimate for one decision node."""
    if policy.kind == "static-half":
        return 0.5
    if policy.kind == "observed-rate":
        return policy.alpha_obs
    if policy.kind == "uniform-aware":
        if context.u is None:
            raise ValueError("uniform-aware policy needs the committed uniform")
        return 1.0 - context.u
    if context.rho_hat is None:
        raise ValueError(f"{policy.kind} policy needs a ratio estimate")
    if policy.kind == "approx-ratio":
        if context.u is None:
            raise ValueError("approx-ratio policy needs the committed uniform")
        return 1.0 if context.u < context.rho_hat else 0.0
    return min(policy.beta_cap, context.rho_hat)


@dataclass
class Tour:
    """The set of tree positions prepared for one parallel round.

    ``nodes`` maps heap indices to selected positions; navigation during
    consumption is purely arithmetic (the proposal slot of position i is
    2i+2, a realized rejection moves to 2i+1).  ``kind`` is "plain" for
    whole-target tours and "da" for staged tours, where ``n_cheap_stages`` of
    the ``n_stages`` factor stages were screened at construction and worker
    evaluations cover the remaining expensive stages.
    """

    nodes: Dict[int, PrefetchNode]
    capacity: int
    t0: int
    root_state: np.ndarray
    kind: str = "plain"
    n_stages: int = 1
    n_cheap_stages: int = 0
    root_values: Optional[np.ndarray] = None
    root_cheap_values: Optional[np.ndarray] = None

    @property
    def eval_nodes(self) -> List[PrefetchNode]:
        return [n for n in self.nodes.values() if n.needs_eval]

    @property
    def max_depth(self) -> int:
        return max((n.depth for n in self.nodes.values()), default=0)

    def gammas(self) -> List[float]:
        """Selection gammas of the evaluated nodes, in selection order."""
        return [n.gamma for n in self.nodes.values() if n.needs_eval]


def _heap_push(heap, gamma, depth, index, parent) -> None:
    # ties break toward shallower nodes, then smaller indices
    if gamma > 0.0 and depth <= MAX_TREE_DEPTH:
        heapq.heappush(heap, (-gamma, depth, index, parent))


def _policy_alpha(
    policy: BranchPolicy,
    schedule: RandomnessSchedule,
    t_node: int,
    u_stage: int,
    parent_state: np.ndarray,
    proposed: np.ndarray,
    rho_hat_fn,
) -> float:
    u = None
    rho_hat = None
    if policy.kind in ("uniform-aware", "approx-ratio"):
        u = schedule.uniform(t_node, u_stage)
    if policy.needs_rho_hat:
        if rho_hat_fn is None:
            raise ValueError(f"policy {policy.kind!r} needs a rho_hat estimator")
        rho_hat = float(rho_hat_fn(parent_state, proposed))
    return estimate_alpha(policy, AlphaContext(u=u, rho_hat=rho_hat))


def build_tour(
    K: int,
    policy: BranchPolicy,
    root_state: np.ndarray,
    t: int,
    kernel: GaussianRandomWalk,
    schedule: RandomnessSchedule,
    rho_hat_fn: Optional[Callable[[np.ndarray, np.ndarray], float]] = None,
    max_depth: int = MAX_TREE_DEPTH,
) -> Tour:
    """Greedy tour of up to K proposal evaluations for a plain-MH round.

    The root's proposal (node 2) is always selected first; thereafter the
    highest-gamma reachable proposal is selected and its accept/reject
    continuations join the candidate set.
    """
    if K < 1:
        raise ValueError("tour capacity K must be >= 1")
    root_state = np.asarray(root_state, dtype=float)
    max_depth = min(max_depth, MAX_TREE_DEPTH)
    tour = Tour(nodes={}, capacity=K, t0=t, root_state=root_state, kind="plain")
    heap: list = []
    _heap_push(heap, 1.0, 1, 2, root_state)
    selected = 0
    while selected < K and heap:
        neg_gamma, depth, index, parent_state = heapq.heappop(heap)
        if depth > max_depth:
            continue
        gamma = -neg_gamma
        proposed = parent_state + kernel.step(schedule.innovation(t + depth))
        tour.nodes[index] = PrefetchNode(
            index=index,
            depth=depth,
            gamma=gamma,
            state_value=proposed,
            needs_eval=True,
        )
        selected += 1
        alpha = _policy_alpha(
            policy, schedule, t + depth, 0, parent_state, proposed, rho_hat_fn
        )
        _heap_push(heap, child_gamma(gamma, alpha, "accept"), depth + 1, 2 * index + 2, proposed)
        _heap_push(heap, child_gamma(gamma, alpha, "reject"), depth + 1, 2 * index, parent_state)
    return tour


def _run_cheap_stages(
    cheap_fns: Sequence[Callable[[np.ndarray], float]],
    parent_values: np.ndarray,
    proposed: np.ndarray,
    t_node: int,
    schedule: RandomnessSchedule,
) -> Tuple[bool, List[float], np.ndarray]:
    """Screen one proposal through the cheap stages with committed uniforms.

    Returns (passed_all, stage log-ratios computed, proposal's cheap values).
    """
    values = np.empty(len(cheap_fns))
    log_rhos: List[float] = []
    for k, fn in enumerate(cheap_fns):
        values[k] = fn(proposed)
        log_rho = values[k] - parent_values[k]
        if math.isnan(log_rho) or log_rho == math.inf:
            raise EvaluationError(
                f"cheap stage {k} produced non-finite log-ratio {log_rho!r}"
            )
        log_rhos.append(log_rho)
        if log_rho >= 0.0:
            continue
        if schedule.uniform(t_node, k) >= math.exp(log_rho):
            return False, log_rhos, values
    return True, log_rhos, values


def build_tour_da(
    K: int,
    policy: BranchPolicy,
    cheap_fns: Sequence[Callable[[np.ndarray], float]],
    root_state: np.ndarray,
    t: int,
    kernel: GaussianRandomWalk,
    schedule: RandomnessSchedule,
    n_expensive: int = 1,
    root_cheap_values: Optional[np.ndarray] = None,
    rho_hat_fn: Optional[Callable[[np.ndarray, np.ndarray], float]] = None,
    max_depth: int = MAX_TREE_DEPTH,
) -> Tour:
    """Greedy tour construction pruned by the cheap delayed-acceptance block.

    As :func:`build_tour`, except each selected proposal is first screened
    through the cheap stages.  A cheap rejection consumes no worker: the node
    joins the tour as a free rejection carrying its parent's state, and the
    descent continues with the next proposal along the rejection branch,
    often reaching far deeper than K levels.  When every stage is cheap
    (``n_expensive == 0``) a fully passed proposal is likewise a certain
    acceptance and the descent continues from it.
    """
    if K < 1:
        raise ValueError("tour capacity K must be >= 1")
    root_state = np.asarray(root_state, dtype=float)
    max_depth = min(max_depth, MAX_TREE_DEPTH)
    n_cheap = len(cheap_fns)
    if root_cheap_values is None:
        root_cheap_values = np.array([fn(root_state) for fn in cheap_fns])
    if not np.all(np.isfinite(root_cheap_values)):
        raise EvaluationError("root state has non-finite cheap log parts")
    tour = Tour(
        nodes={},
        capacity=K,
        t0=t,
        root_state=root_state,
        kind="da",
        n_stages=n_cheap + n_expensive,
        n_cheap_stages=n_cheap,
        root_cheap_values=root_cheap_values,
    )
    heap: list = []
    _heap_push(heap, 1.0, 1, 2, (root_state, root_cheap_values))
    workers_used = 0
    while workers_used < K and heap:
        neg_gamma, depth, index, (parent_state, parent_values) = heapq.heappop(heap)
        gamma = -neg_gamma
        # descend certain rejections (and, with no expensive block, certain
        # acceptances) without consuming a worker
        while depth <= max_depth:
            proposed = parent_state + kernel.step(schedule.innovation(t + depth))
            passed, log_rhos, values = _run_cheap_stages(
                cheap_fns, parent_values, proposed, t + depth, schedule
            )
            if not passed:
                node = PrefetchNode(
                    index=index,
                    depth=depth,
                    gamma=gamma,
                    state_value=parent_state,
                    needs_eval=False,
                    cheap_rejected=True,
                    stage_log_rhos=tuple(log_rhos),
                    stages_evaluated=len(log_rhos),
                    cheap_values=parent_values,
                )
                tour.nodes[index] = node
                index = 2 * index + 2
                depth += 1
                continue
            if n_expensive == 0:
                node = PrefetchNode(
                    index=index,
                    depth=depth,
                    gamma=gamma,
                    state_value=proposed,
                    needs_eval=False,
                    certain_accept=True,
                    stage_log_rhos=tuple(log_rhos),
                    stages_evaluated=len(log_rhos),
                    cheap_values=values,
                )
                tour.nodes[index] = node
                parent_state, parent_values = proposed, values
                index = 2 * index + 2
                depth += 1
                continue
            node = PrefetchNode(
                index=index,
                depth=depth,
                gamma=gamma,
                state_value=proposed,
                needs_eval=True,
                stage_log_rhos=tuple(log_rhos),
                stages_evaluated=n_cheap,
                cheap_values=values,
            )
            tour.nodes[index] = node
            workers_used += 1
            alpha = _policy_alpha(
                policy, schedule, t + depth, n_cheap, parent_state, proposed, rho_hat_fn
            )
            _heap_push(
                heap,
                child_gamma(gamma, alpha, "accept"),
                depth + 1,
                2 * index + 2,
                (proposed, values),
            )
            _heap_push(
                heap,
                child_gamma(gamma, alpha, "reject"),
                depth + 1,
                2 * index,
                (parent_state, parent_values),
            )
            break
    return tour


def consume_tour(
    tour: Tour,
    evaluations: Dict[int, np.ndarray],
    t0: int,
    schedule: RandomnessSchedule,
):
    """Walk the realized accept/reject path through a prepared tour.

    Returns ``(states, draws, info)`` where ``states`` lists the consecutive
    chain states produced, ``draws`` counts time steps advanced and ``info``
    carries per-draw metadata (accepted flags, stages evaluated, the stage
    log-ratios actually computed) plus the final position's cached values for
    the next round.  The walk stops at the first needed proposal that was not
    constructed into the tour.
    """
    if t0 != tour.t0:
        raise ValueError(f"tour was built at t={tour.t0}, consumed at t={t0}")
    pos_index = 0
    cur_state = tour.root_state
    cur_values = tour.root_values
    cur_cheap = tour.root_cheap_values
    states: List[np.ndarray] = []
    accepted: List[bool] = []
    stages: List[int] = []
    stage_log_rhos: List[List[float]] = []
    while True:
        proposal_index = 2 * pos_index + 2
        node = tour.nodes.get(proposal_index)
        if node is None:
            break
        t_node = t0 + node.depth
        if node.depth != len(states) + 1:
            raise EvaluationError(
                f"tour node {node.index} at depth {node.depth} does not match "
                f"walk position {len(states) + 1}"
            )
        if node.cheap_rejected:
            if node.state_value is not cur_state and not np.array_equal(
                node.state_value, cur_state
            ):
                raise EvaluationError(
                    "inconsistent cache: rejection node state differs from parent"
                )
            pos_index = proposal_index
            states.append(cur_state)
            accepted.append(False)
            stages.append(node.stages_evaluated)
            stage_log_rhos.append(list(node.stage_log_rhos))
            continue
        if node.certain_accept:
            pos_index = proposal_index
            cur_state = node.state_value
            cur_cheap = node.cheap_values
            states.append(cur_state)
            accepted.append(True)
            stages.append(node.stages_evaluated)
            stage_log_rhos.append(list(node.stage_log_rhos))
            continue
        values = evaluations.get(proposal_index)
        if values is None:
            raise EvaluationError(
                f"needed node {proposal_index} missing from the evaluation map"
            )
        values = np.atleast_1d(np.asarray(values, dtype=float))
        if cur_values is None:
            raise EvaluationError("tour root carries no cached values")
        move_accepted = True
        log_rhos = list(node.stage_log_rhos)
        if tour.kind == "plain":
            log_ratio = float(values[0]) - float(cur_values[0])
            if math.isnan(log_ratio) or log_ratio == math.inf:
                raise EvaluationError(f"non-finite log-ratio {log_ratio!r}")
            move_accepted = log_ratio >= 0.0 or schedule.uniform(
                t_node, 0
            ) < math.exp(log_ratio)
            log_rhos = [log_ratio]
            stages_done = tour.n_stages
        else:
            stages_done = node.stages_evaluated
            for e in range(tour.n_stages - tour.n_cheap_stages):
                log_rho = float(values[e]) - float(cur_values[e])
                if math.isnan(log_rho) or log_rho == math.inf:
                    raise EvaluationError(f"non-finite stage log-ratio {log_rho!r}")
                stages_done += 1
                log_rhos.append(log_rho)
                if log_rho >= 0.0:
                    continue
                if schedule.uniform(t_node, tour.n_cheap_stages + e) >= math.exp(log_rho):
                    move_accepted = False
                    break
        if move_accepted:
            pos_index = proposal_index
            cur_state = node.state_value
            cur_values = values
            cur_cheap = node.cheap_values
        else:
            pos_index = 2 * pos_index + 1
        states.append(cur_state)
        accepted.append(move_accepted)
        stages.append(stages_done)
        stage_log_rhos.append(log_rhos)
    info = {
        "accepted": accepted,
        "stages": stages,
        "stage_log_rhos": stage_log_rhos,
        "final_state": cur_state,
        "final_values": cur_values,
        "final_cheap_values": cur_cheap,
    }
    return states, len(states), info
