"""
Environments - simulated tasks and the simulated expert oracle
"""
from pathlib import Path

from activeil.config import EnvConfig
from activeil.environments.base import ExpertOracle, ImitationTask, Transition, observation_hash, rollout_expert
from activeil.environments.lifted_nav import LiftedNavEnv, LiftedNavSpec
from activeil.environments.maze import (
    MazeEnv, MazeSpec, bfs_distances, generate_layout, maze_observe, maze_step, parse_layout, render_layout,
)


def make_environment(cfg: EnvConfig) -> ImitationTask:
    """Build the task described by the `env` config section"""
    if cfg.kind == "maze":
        overrides = dict(encoding=cfg.maze_encoding, max_episode_steps=cfg.maze_max_steps)
        if cfg.layout_file:
            spec = parse_layout(Path(cfg.layout_file).read_text(encoding="utf-8"), **overrides)
        else:
            spec = MazeSpec(walls=generate_layout(cfg.layout_seed, n_walls=cfg.n_walls), **overrides)
        return MazeEnv(spec)
    return LiftedNavEnv(
        LiftedNavSpec(
            obs_dim=cfg.obs_dim,
            goal_radius=cfg.goal_radius,
            max_step=cfg.max_step,
            max_episode_steps=cfg.nav_max_steps,
            continuous_actions=cfg.continuous_actions,
            lift_seed=cfg.lift_seed,
        )
    )


__all__ = [
    "ExpertOracle", "ImitationTask", "Transition", "observation_hash", "rollout_expert",
    "LiftedNavEnv", "LiftedNavSpec",
    "MazeEnv", "MazeSpec", "bfs_distances", "generate_layout", "maze_observe", "maze_step",
    "parse_layout", "render_layout",
    "make_environment",
]
