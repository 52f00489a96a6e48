"""
Environment base - shared task interface, transitions and the simulated expert

=== CONTENTS ===
1. Transition: one environment step, the unit stored in the replay buffer
2. ImitationTask: gymnasium.Env with a pure `simulate` core and an expert policy
3. ExpertOracle: the simulated human; `answer` is the counted query path
4. rollout_expert: demonstration trajectories that seed the expert dataset
"""
from __future__ import annotations

import hashlib
from abc import abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple, Union

import gymnasium as gym
import numpy as np

Action = Union[int, np.ndarray]


@dataclass(frozen=True)
class Transition:
    """One environment step; `done` means the goal was reached (not truncation)"""
    state: np.ndarray
    action: Action
    next_state: np.ndarray
    reward: float
    done: bool
    expert_intervened: bool = False


def observation_hash(obs: np.ndarray) -> str:
    """Stable content hash of an observation vector"""
    return hashlib.sha1(np.ascontiguousarray(obs, dtype=np.float64).tobytes()).hexdigest()[:16]


class ImitationTask(gym.Env):
    """
    Base class of the simulated tasks

    Subclasses implement the pure dynamics (`simulate`), the observation map
    and its inverse, and the expert policy on underlying states. The
    gymnasium `reset` / `step` API is built on top of those.
    """

    metadata: Dict[str, Any] = {"render_modes": []}
    max_episode_steps: int = 100

    def __init__(self):
        super().__init__()
        self._state: Any = None
        self._elapsed = 0

    # ----- task definition -----

    @property
    @abstractmethod
    def obs_dim(self) -> int: ...

    @property
    @abstractmethod
    def n_actions(self) -> int:
        """Number of discrete actions (policy learner action set)"""

    @property
    def discrete(self) -> bool:
        return True

    @property
    def action_dim(self) -> int:
        """Width of the discriminator action encoding"""
        return self.n_actions

    @abstractmethod
    def sample_start(self, rng: np.random.Generator) -> Any: ...

    @abstractmethod
    def simulate(self, state: Any, action: Action) -> Tuple[Any, float, bool]:
        """Pure dynamics: (next underlying state, reward, reached goal)"""

    @abstractmethod
    def observe(self, state: Any) -> np.ndarray: ...

    @abstractmethod
    def decode(self, obs: np.ndarray) -> Any:
        """Underlying state of an observation"""

    @abstractmethod
    def optimal_action(self, state: Any) -> Action: ...

    def state_id(self, obs: np.ndarray) -> str:
        return observation_hash(obs)

    def encode_action(self, action: Action) -> np.ndarray:
        """Discriminator action encoding: one-hot for discrete actions"""
        vec = np.zeros(self.n_actions)
        vec[int(action)] = 1.0
        return vec

    def describe(self) -> Dict[str, Any]:
        """Serializable description stored next to results"""
        return {"kind": type(self).__name__}

    # ----- gymnasium API -----

    def reset(self, *, seed: Optional[int] = None, options: Optional[dict] = None):
        super().reset(seed=seed)
        if options and "state" in options:
            self._state = options["state"]
        else:
            self._state = self.sample_start(self.np_random)
        self._elapsed = 0
        return self.observe(self._state), {"state": self._state}

    def step(self, action: Action):
        next_state, reward, terminated = self.simulate(self._state, action)
        self._elapsed += 1
        truncated = (not terminated) and self._elapsed >= self.max_episode_steps
        self._state = next_state
        return self.observe(next_state), float(reward), bool(terminated), bool(truncated), {"state": next_state}


class ExpertOracle:
    """
    Simulated expert

    `expert_action` is the raw expert policy (demonstrations, evaluation);
    `answer` is the paid query channel and counts every invocation.
    """

    def __init__(self, task: ImitationTask):
        self.task = task
        self.queries = 0

    def expert_action(self, obs: np.ndarray) -> Action:
        return self.task.optimal_action(self.task.decode(obs))

    def answer(self, obs: np.ndarray) -> Action:
        action = self.expert_action(obs)
        self.queries += 1
        return action


def rollout_expert(oracle: ExpertOracle, n_episodes: int, rng: np.random.Generator) -> List[Transition]:
    """Expert trajectories from random starts; every transition is expert_intervened"""
    if n_episodes < 0:
        raise ValueError("n_episodes must be >= 0")
    task = oracle.task
    transitions: List[Transition] = []
    for _ in range(n_episodes):
        state = task.sample_start(rng)
        for _ in range(task.max_episode_steps):
            obs = task.observe(state)
            action = task.optimal_action(state)
            next_state, reward, done = task.simulate(state, action)
            transitions.append(Transition(obs, action, task.observe(next_state), reward, done, True))
            state = next_state
            if done:
                break
    return transitions
