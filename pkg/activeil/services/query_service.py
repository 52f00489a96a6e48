"""
Query Service - Choosing when and where to ask the expert

=== ON-POLICY (safety gate) ===
1. Every proposed pair (s, a) is scored by the discriminator
2. score < tau  -> query the expert and execute its action instead
3. tau is refreshed at the end of every window as the ceil(alpha * N)-th
   smallest score (window / buffer modes) or held at a fixed value
4. Early in training queries are rate limited (min_query_gap steps apart)

=== OFF-POLICY (every T_Off steps) ===
- coreset_sr:  weighted k-medoids (L1) over SR vectors of unqueried buffer states
- random:      uniform draw from the unqueried buffer states
- uncertainty: largest std of Q(s, a_taken) across bootstrap heads, newest first on ties
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Literal, Optional, Sequence

import numpy as np
from loguru import logger
from scipy.spatial.distance import cdist

from activeil.core.exceptions import ShapeError
from activeil.environments.base import Action, ExpertOracle
from activeil.models.ensemble import BootstrapEnsemble
from activeil.models.memory import ExpertDataset, QueryBudget, ReplayBuffer

ThresholdMode = Literal["window", "buffer", "fixed"]


class GateDecision(str, Enum):
    FOLLOW_POLICY = "follow_policy"
    QUERY_EXPERT = "query_expert"


# ============================================================
# SAFETY GATE
# ============================================================

def update_threshold(scores: Sequence[float], alpha: float, current: float = 0.0) -> float:
    """
    The ceil(alpha * N)-th smallest score (always a member of `scores`)

    An empty score set leaves the threshold unchanged.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if len(scores) == 0:
        return current
    ordered = np.sort(np.asarray(scores, dtype=float))
    rank = max(math.ceil(alpha * len(ordered) - 1e-9), 1)
    return float(ordered[rank - 1])


def gate_decision(gate: "SafetyGate", score: float) -> GateDecision:
    """query_expert iff score < tau; a score equal to tau follows the policy"""
    return GateDecision.QUERY_EXPERT if score < gate.tau else GateDecision.FOLLOW_POLICY


@dataclass
class GateAudit:
    """
    Outcome of every step whose proposed pair scored below tau

    Each trigger lands in exactly one bucket:
    - denied_budget: no budget left, the policy action ran
    - deferred_cap:  early-training rate limit, the policy action ran
    - substitutions: the expert action ran
    - violations:    budget left and no rate limit, yet the expert action did not run
    """
    gate_triggers: int = 0
    substitutions: int = 0
    denied_budget: int = 0
    deferred_cap: int = 0
    violations: int = 0

    def record(self, budget_left: bool, capped: bool, expert_executed: bool) -> None:
        self.gate_triggers += 1
        if not budget_left:
            self.denied_budget += 1
        elif capped:
            self.deferred_cap += 1
        elif expert_executed:
            self.substitutions += 1
        else:
            self.violations += 1

    @property
    def policy_ran_with_budget(self) -> int:
        """Low-score steps that still had budget but executed the policy action"""
        return self.deferred_cap + self.violations


@dataclass
class SafetyGate:
    alpha: float = 0.05
    window: int = 1000
    mode: ThresholdMode = "window"
    fixed_tau: float = 0.0
    min_query_gap: int = 10
    guard_steps: int = 2000
    tau: float = 0.0
    last_query_step: Optional[int] = None
    scores: List[float] = field(default_factory=list)
    audit: GateAudit = field(default_factory=GateAudit)

    def __post_init__(self):
        if self.mode == "fixed":
            self.tau = self.fixed_tau

    def observe(self, score: float) -> None:
        """Record the score of a proposed pair for the current window"""
        self.scores.append(float(score))

    def is_capped(self, step: int) -> bool:
        """True while an early-training query would come too soon after the last one"""
        if step >= self.guard_steps or self.last_query_step is None:
            return False
        return step - self.last_query_step < self.min_query_gap

    def record_query(self, step: int) -> None:
        self.last_query_step = step

    def due(self, step: int) -> bool:
        return step > 0 and step % self.window == 0

    def maybe_update(self, step: int, buffer_scores: Optional[Sequence[float]] = None) -> bool:
        """Refresh tau at the end of a window; returns True when tau was recomputed"""
        if not self.due(step):
            return False
        if self.mode == "window":
            self.tau = update_threshold(self.scores, self.alpha, self.tau)
        elif self.mode == "buffer":
            self.tau = threshold_from_buffer(buffer_scores or [], self.alpha, self.tau)
        self.scores.clear()
        logger.debug(f"Safety threshold at step {step}: tau={self.tau:.6f}")
        return True


def threshold_from_buffer(buffer_scores: Sequence[float], alpha: float, current: float = 0.0) -> float:
    """Threshold covering the lowest alpha share of the replay-buffer pair scores"""
    return update_threshold(buffer_scores, alpha, current)


# ============================================================
# CANDIDATE POOL
# ============================================================

@dataclass
class CandidatePool:
    """Distinct unqueried buffer states, oldest first occurrence first"""
    states: np.ndarray
    state_ids: List[str]
    actions: List[Action]   # most recent action taken at the state
    weights: np.ndarray     # multiplicity in the buffer
    stamps: np.ndarray      # most recent insertion stamp

    def __len__(self) -> int:
        return len(self.state_ids)


def build_candidate_pool(buffer: ReplayBuffer, expert: ExpertDataset, max_candidates: int,
                         rng: np.random.Generator) -> CandidatePool:
    """Collapse identical buffer states, drop those already labeled, subsample to max_candidates"""
    order: List[str] = []
    first: dict = {}
    for entry in buffer.entries():
        sid = entry.state_id
        if expert.has_state(sid):
            continue
        if sid not in first:
            order.append(sid)
            first[sid] = [entry.transition.state, entry.transition.action, 0, entry.stamp]
        slot = first[sid]
        slot[1], slot[3] = entry.transition.action, entry.stamp
        slot[2] += 1

    if len(order) > max_candidates:
        keep = np.sort(rng.choice(len(order), size=max_candidates, replace=False))
        order = [order[i] for i in keep]

    if not order:
        return CandidatePool(np.zeros((0, 0)), [], [], np.zeros(0), np.zeros(0, dtype=int))
    rows = [first[sid] for sid in order]
    return CandidatePool(
        states=np.stack([r[0] for r in rows]),
        state_ids=order,
        actions=[r[1] for r in rows],
        weights=np.array([r[2] for r in rows], dtype=float),
        stamps=np.array([r[3] for r in rows], dtype=int),
    )


# ============================================================
# CORE-SET (weighted k-medoids, L1)
# ============================================================

@dataclass
class Medoids:
    indices: List[int]
    assignment: np.ndarray  # point -> position in `indices`
    cost: float
    history: List[float] = field(default_factory=list)


def _farthest_point_init(dist: np.ndarray, weights: np.ndarray, n_k: int) -> List[int]:
    chosen = [int(np.argmin(dist @ weights))]
    nearest = dist[:, chosen[0]].copy()
    while len(chosen) < n_k:
        gap = nearest.copy()
        gap[chosen] = -np.inf
        nxt = int(np.argmax(gap))
        chosen.append(nxt)
        nearest = np.minimum(nearest, dist[:, nxt])
    return chosen


def _assign(dist: np.ndarray, weights: np.ndarray, medoids: List[int]):
    sub = dist[:, medoids]
    assignment = np.argmin(sub, axis=1)
    cost = float(np.sum(weights * sub[np.arange(len(sub)), assignment]))
    return assignment, cost


def coreset_select(vectors, n_k: int, weights: Optional[np.ndarray] = None, max_iter: int = 100) -> Medoids:
    """
    N_K medoids minimizing the (weighted) L1 distance of every point to its medoid

    Farthest-point seeding followed by alternating assignment / medoid update;
    the cost never increases and the loop stops once the medoid set is stable
    or after max_iter rounds. With N_K >= number of points every point is its
    own medoid.
    """
    X = np.atleast_2d(np.asarray(vectors, dtype=float))
    n = len(X)
    if n_k < 1:
        raise ValueError("n_k must be >= 1")
    if n == 0:
        return Medoids([], np.zeros(0, dtype=int), 0.0)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ShapeError("One weight per point is required", {"points": n, "weights": w.shape})
    if n_k >= n:
        return Medoids(list(range(n)), np.arange(n), 0.0, [0.0])

    dist = cdist(X, X, "cityblock")
    medoids = _farthest_point_init(dist, w, n_k)
    assignment, cost = _assign(dist, w, medoids)
    history = [cost]
    for _ in range(max_iter):
        updated = list(medoids)
        for c, current in enumerate(medoids):
            members = np.flatnonzero(assignment == c)
            if members.size == 0:
                continue
            within = dist[np.ix_(members, members)] @ w[members]
            best = int(np.argmin(within))
            own = np.flatnonzero(members == current)
            # keep the current medoid on ties so a stable set is a fixed point
            candidate = int(members[best])
            if candidate not in updated and (own.size == 0 or within[best] < within[own[0]]):
                updated[c] = candidate
        if updated == medoids:
            break
        medoids = updated
        assignment, cost = _assign(dist, w, medoids)
        history.append(cost)
    return Medoids(medoids, assignment, cost, history)


# ============================================================
# BASELINES
# ============================================================

def random_select(size: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """n uniform indices; without replacement unless n exceeds size"""
    if size < 1:
        raise ValueError("Cannot select from an empty pool")
    return rng.choice(size, size=n, replace=n > size)


def uncertainty_select(ensemble: BootstrapEnsemble, z: np.ndarray, actions: Sequence[Action],
                       stamps: np.ndarray, n: int) -> np.ndarray:
    """Indices of the n most uncertain pairs; ties go to the newest entry"""
    spread = ensemble.uncertainty(z, actions)
    order = np.lexsort((-np.asarray(stamps), -spread))
    return order[:n]


# ============================================================
# ORACLE LABELS
# ============================================================

@dataclass
class QueryLabel:
    state: np.ndarray
    state_id: str
    action: Action


def offpolicy_query(states: np.ndarray, state_ids: Sequence[str], oracle: ExpertOracle, budget: QueryBudget,
                    expert: ExpertDataset) -> List[QueryLabel]:
    """
    Ask the expert at the selected states and add the answers to E

    States already labeled in E are skipped without spending budget; once the
    budget runs out the remaining states are dropped (partial batch).
    """
    labels: List[QueryLabel] = []
    for state, sid in zip(states, state_ids):
        if expert.has_state(sid):
            continue
        if not budget.try_consume():
            logger.info(f"Query budget exhausted after {len(labels)} off-policy labels")
            break
        action = oracle.answer(state)
        expert.add(state, action, "offpolicy", sid)
        labels.append(QueryLabel(np.asarray(state, dtype=float), sid, action))
    return labels
