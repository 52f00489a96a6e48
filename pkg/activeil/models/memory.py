"""
Memory - Replay buffer, expert dataset and query budget

=== REPLAY BUFFER ===
Fixed-capacity ring of transitions with FIFO eviction. Every entry keeps the
state id of its observation (query dedup key), an insertion stamp (recency)
and the bootstrap mask of the uncertainty ensemble.

=== EXPERT DATASET ===
Insertion-ordered (observation, expert action) pairs tagged demo, onpolicy or
offpolicy; a (state id, action) pair is stored at most once.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Hashable, List, Literal, Optional, Sequence, Set, Tuple

import numpy as np

from activeil.core.exceptions import ShapeError
from activeil.environments.base import Action, Transition

ExpertSource = Literal["demo", "onpolicy", "offpolicy"]


def action_key(action: Action) -> Hashable:
    if isinstance(action, (int, np.integer)):
        return int(action)
    return tuple(float(v) for v in np.asarray(action, dtype=float).reshape(-1))


# ============================================================
# REPLAY BUFFER
# ============================================================

@dataclass(frozen=True)
class BufferEntry:
    transition: Transition
    state_id: str
    stamp: int
    mask: Optional[np.ndarray] = None


@dataclass
class TransitionBatch:
    """Column view over sampled buffer entries"""
    states: np.ndarray
    actions: List[Action]
    next_states: np.ndarray
    dones: np.ndarray
    masks: Optional[np.ndarray]
    stamps: np.ndarray

    def __len__(self) -> int:
        return len(self.states)


class ReplayBuffer:
    """Ring buffer with FIFO eviction; index 0 is always the oldest entry"""

    def __init__(self, capacity: int = 50_000, mask_width: int = 0):
        if capacity < 1:
            raise ValueError("Replay buffer capacity must be >= 1")
        self.capacity = capacity
        self.mask_width = mask_width
        self._entries: List[Optional[BufferEntry]] = [None] * capacity
        self._next = 0
        self._size = 0
        self._stamp = 0

    def __len__(self) -> int:
        return self._size

    def _physical(self, i: int) -> int:
        if not 0 <= i < self._size:
            raise IndexError(f"Buffer index {i} out of range (size {self._size})")
        return (self._next - self._size + i) % self.capacity

    def __getitem__(self, i: int) -> BufferEntry:
        return self._entries[self._physical(i)]

    def add(self, transition: Transition, state_id: str, mask: Optional[np.ndarray] = None) -> None:
        if self.mask_width:
            if mask is None or np.shape(mask) != (self.mask_width,):
                raise ShapeError("Bootstrap mask required", {"mask_width": self.mask_width})
            mask = np.asarray(mask, dtype=bool)
        self._entries[self._next] = BufferEntry(transition, state_id, self._stamp, mask)
        self._stamp += 1
        self._next = (self._next + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def entries(self) -> List[BufferEntry]:
        """All entries, oldest first"""
        return [self[i] for i in range(self._size)]

    def sample_indices(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Uniform indices; without replacement when n <= size"""
        if self._size == 0:
            raise ValueError("Cannot sample from an empty replay buffer")
        return rng.choice(self._size, size=n, replace=n > self._size)

    def batch(self, indices: Sequence[int]) -> TransitionBatch:
        picked = [self[int(i)] for i in indices]
        masks = np.stack([e.mask for e in picked]) if self.mask_width and picked else None
        return TransitionBatch(
            states=np.stack([e.transition.state for e in picked]),
            actions=[e.transition.action for e in picked],
            next_states=np.stack([e.transition.next_state for e in picked]),
            dones=np.array([float(e.transition.done) for e in picked]),
            masks=masks,
            stamps=np.array([e.stamp for e in picked]),
        )

    def sample(self, rng: np.random.Generator, n: int) -> TransitionBatch:
        return self.batch(self.sample_indices(rng, n))


# ============================================================
# EXPERT DATASET
# ============================================================

@dataclass(frozen=True)
class ExpertPair:
    state: np.ndarray
    action: Action
    source: ExpertSource
    state_id: str


class ExpertDataset:
    """Deduplicated, insertion-ordered expert labels"""

    def __init__(self):
        self._pairs: List[ExpertPair] = []
        self._keys: Set[Tuple[str, Hashable]] = set()
        self._state_ids: Set[str] = set()

    def __len__(self) -> int:
        return len(self._pairs)

    def __iter__(self):
        return iter(self._pairs)

    def add(self, state: np.ndarray, action: Action, source: ExpertSource, state_id: str) -> bool:
        """Store the pair; False when the same (state, action) is already present"""
        key = (state_id, action_key(action))
        if key in self._keys:
            return False
        self._keys.add(key)
        self._state_ids.add(state_id)
        self._pairs.append(ExpertPair(np.asarray(state, dtype=float), action, source, state_id))
        return True

    def has_state(self, state_id: str) -> bool:
        return state_id in self._state_ids

    def counts(self) -> Dict[str, int]:
        out = {"demo": 0, "onpolicy": 0, "offpolicy": 0}
        for pair in self._pairs:
            out[pair.source] += 1
        return out

    def sample(self, rng: np.random.Generator, n: int) -> Tuple[np.ndarray, List[Action]]:
        """n pairs; with replacement while the dataset is smaller than n"""
        if not self._pairs:
            raise ValueError("Cannot sample from an empty expert dataset")
        idx = rng.choice(len(self._pairs), size=n, replace=n > len(self._pairs))
        return np.stack([self._pairs[i].state for i in idx]), [self._pairs[i].action for i in idx]


# ============================================================
# QUERY BUDGET
# ============================================================

@dataclass
class QueryBudget:
    """Maximum number of paid expert answers; used never exceeds limit"""
    limit: int
    used: int = 0

    def __post_init__(self):
        if self.limit < 0:
            raise ValueError("Query budget must be >= 0")

    @property
    def remaining(self) -> int:
        return self.limit - self.used

    @property
    def exhausted(self) -> bool:
        return self.used >= self.limit

    def try_consume(self) -> bool:
        if self.exhausted:
            return False
        self.used += 1
        return True
