"""
Lifted navigation - 2D point navigation observed through a fixed smooth lifting map

The agent moves a point in the unit square toward a goal disc. Observations
are sin(A p + c) for a seeded random A (obs_dim x 2) and phase c, with the
entries of A small enough that A p + c stays inside (-pi/2, pi/2); the map
is then injective and exactly invertible (arcsin + least squares), which is
how the simulated expert reads positions back from observations.

Discrete mode exposes 8 compass directions for the Q-learning policy;
continuous mode accepts any 2D displacement clipped to `max_step`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from gymnasium import spaces

from activeil.core.exceptions import InvalidActionError, OracleError
from activeil.environments.base import Action, ImitationTask

N_COMPASS = 8
LIFT_SCALE = 0.7
PHASE_SCALE = 0.1


@dataclass(frozen=True)
class LiftedNavSpec:
    obs_dim: int = 32
    goal: Tuple[float, float] = (0.9, 0.9)
    goal_radius: float = 0.08
    max_step: float = 0.1
    step_reward: float = -1.0
    goal_reward: float = 10.0
    max_episode_steps: int = 100
    continuous_actions: bool = False
    lift_seed: int = 0


class LiftingMap:
    """Fixed random smooth map from R^2 to R^obs_dim"""

    def __init__(self, obs_dim: int, seed: int):
        rng = np.random.default_rng(seed)
        self.matrix = rng.uniform(-LIFT_SCALE, LIFT_SCALE, size=(obs_dim, 2))
        self.phase = rng.uniform(-PHASE_SCALE, PHASE_SCALE, size=obs_dim)

    def lift(self, position: np.ndarray) -> np.ndarray:
        return np.sin(self.matrix @ np.asarray(position, dtype=float) + self.phase)

    def unlift(self, obs: np.ndarray) -> np.ndarray:
        angles = np.arcsin(np.clip(obs, -1.0, 1.0)) - self.phase
        position, *_ = np.linalg.lstsq(self.matrix, angles, rcond=None)
        return position


def compass_directions() -> np.ndarray:
    angles = np.arange(N_COMPASS) * (2.0 * np.pi / N_COMPASS)
    return np.stack([np.cos(angles), np.sin(angles)], axis=1)


class LiftedNavEnv(ImitationTask):
    """Point navigation with lifted observations and a proportional-controller expert"""

    def __init__(self, spec: LiftedNavSpec):
        super().__init__()
        self.nav = spec
        self.max_episode_steps = spec.max_episode_steps
        self.lifting = LiftingMap(spec.obs_dim, spec.lift_seed)
        self.directions = compass_directions()
        self.goal = np.asarray(spec.goal, dtype=float)
        if spec.continuous_actions:
            self.action_space = spaces.Box(-spec.max_step, spec.max_step, shape=(2,), dtype=np.float64)
        else:
            self.action_space = spaces.Discrete(N_COMPASS)
        self.observation_space = spaces.Box(-1.0, 1.0, shape=(spec.obs_dim,), dtype=np.float64)

    @property
    def obs_dim(self) -> int:
        return self.nav.obs_dim

    @property
    def n_actions(self) -> int:
        return N_COMPASS

    @property
    def discrete(self) -> bool:
        return not self.nav.continuous_actions

    @property
    def action_dim(self) -> int:
        return N_COMPASS if self.discrete else 2

    def in_goal(self, position: np.ndarray) -> bool:
        return float(np.linalg.norm(position - self.goal)) <= self.nav.goal_radius

    def sample_start(self, rng: np.random.Generator) -> np.ndarray:
        while True:
            position = rng.uniform(0.0, 1.0, size=2)
            if not self.in_goal(position):
                return position

    def displacement(self, action: Action) -> np.ndarray:
        if self.discrete:
            if not isinstance(action, (int, np.integer)) or not 0 <= int(action) < N_COMPASS:
                raise InvalidActionError(f"Invalid compass action: {action!r}")
            return self.nav.max_step * self.directions[int(action)]
        move = np.asarray(action, dtype=float)
        if move.shape != (2,) or not np.all(np.isfinite(move)):
            raise InvalidActionError(f"Continuous action must be a finite 2-vector: {action!r}")
        norm = float(np.linalg.norm(move))
        return move if norm <= self.nav.max_step else move * (self.nav.max_step / norm)

    def simulate(self, state: np.ndarray, action: Action) -> Tuple[np.ndarray, float, bool]:
        position = np.clip(np.asarray(state, dtype=float) + self.displacement(action), 0.0, 1.0)
        if self.in_goal(position):
            return position, self.nav.goal_reward, True
        return position, self.nav.step_reward, False

    def observe(self, state: np.ndarray) -> np.ndarray:
        return self.lifting.lift(state)

    def decode(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=float)
        if obs.shape != (self.nav.obs_dim,) or not np.all(np.isfinite(obs)):
            raise OracleError("Observation does not match the lifting map", {"shape": obs.shape})
        position = self.lifting.unlift(obs)
        if np.any(position < -1e-6) or np.any(position > 1.0 + 1e-6):
            raise OracleError("Observation decodes outside the unit square", {"position": position.tolist()})
        return np.clip(position, 0.0, 1.0)

    def optimal_action(self, state: np.ndarray) -> Action:
        offset = self.goal - np.asarray(state, dtype=float)
        if self.discrete:
            return int(np.argmax(self.directions @ offset))
        norm = float(np.linalg.norm(offset))
        if norm <= self.nav.max_step:
            return offset
        return offset * (self.nav.max_step / norm)

    def encode_action(self, action: Action) -> np.ndarray:
        if self.discrete:
            return super().encode_action(action)
        return np.asarray(action, dtype=float) / self.nav.max_step

    def describe(self) -> dict:
        return {"kind": "lifted_nav", "obs_dim": self.nav.obs_dim, "lift_seed": self.nav.lift_seed}
