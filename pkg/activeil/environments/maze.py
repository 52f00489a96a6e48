"""
Maze - 10x10 grid navigation task with a value-iteration expert

=== RULES ===
- Cells are (x, y), x to the right, y downwards; index = y * width + x
- Actions: 0 up, 1 down, 2 left, 3 right
- Moving into a wall cell or off the grid leaves the agent where it is
- Reward -1 per move, +10 (and episode end) when the move reaches the goal
- Goal is the lower-right corner; starts are uniform over free non-goal cells

=== LAYOUT TEXT FORMAT ===
One row per line: '.' free, '#' wall, 'G' goal
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Literal, Tuple

import numpy as np
from gymnasium import spaces

from activeil.core.exceptions import InvalidActionError, OracleError
from activeil.environments.base import ImitationTask

Cell = Tuple[int, int]

ACTION_NAMES = ("up", "down", "left", "right")
ACTION_DELTAS = ((0, -1), (0, 1), (-1, 0), (1, 0))


@dataclass(frozen=True)
class MazeSpec:
    """Grid size, wall cells, goal and reward constants"""
    width: int = 10
    height: int = 10
    walls: FrozenSet[Cell] = field(default_factory=frozenset)
    goal: Cell = (9, 9)
    step_reward: float = -1.0
    goal_reward: float = 10.0
    max_episode_steps: int = 200
    encoding: Literal["onehot", "coords"] = "onehot"

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and cell not in self.walls

    def index(self, cell: Cell) -> int:
        return cell[1] * self.width + cell[0]

    def cell(self, index: int) -> Cell:
        return (index % self.width, index // self.width)

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def free_cells(self) -> List[Cell]:
        return [(x, y) for y in range(self.height) for x in range(self.width) if (x, y) not in self.walls]

    def start_cells(self) -> List[Cell]:
        return [c for c in self.free_cells() if c != self.goal]


# ============================================================
# DYNAMICS & OBSERVATIONS
# ============================================================

def maze_step(spec: MazeSpec, cell: Cell, action: int, elapsed: int = 0) -> Tuple[Cell, float, bool]:
    """
    One move from `cell`

    Returns (next cell, reward, done); done when the goal is reached or
    the move is the last one allowed by max_episode_steps.
    """
    if not isinstance(action, (int, np.integer)) or not 0 <= int(action) < len(ACTION_DELTAS):
        raise InvalidActionError(f"Invalid maze action: {action!r}")
    if not spec.is_free(cell) or cell == spec.goal:
        raise ValueError(f"maze_step needs a free non-goal cell, got {cell}")
    dx, dy = ACTION_DELTAS[int(action)]
    target = (cell[0] + dx, cell[1] + dy)
    next_cell = target if spec.is_free(target) else cell
    if next_cell == spec.goal:
        return next_cell, spec.goal_reward, True
    return next_cell, spec.step_reward, elapsed + 1 >= spec.max_episode_steps


def maze_observe(spec: MazeSpec, cell: Cell) -> np.ndarray:
    """One-hot over all cells, or (x, y) normalized to [0, 1]"""
    if spec.encoding == "coords":
        return np.array([cell[0] / (spec.width - 1), cell[1] / (spec.height - 1)], dtype=float)
    obs = np.zeros(spec.n_cells)
    obs[spec.index(cell)] = 1.0
    return obs


def maze_decode(spec: MazeSpec, obs: np.ndarray) -> Cell:
    obs = np.asarray(obs, dtype=float)
    if spec.encoding == "coords":
        if obs.shape != (2,):
            raise OracleError("Coordinate observation must have 2 entries", {"shape": obs.shape})
        cell = (int(round(obs[0] * (spec.width - 1))), int(round(obs[1] * (spec.height - 1))))
    else:
        if obs.shape != (spec.n_cells,) or not np.isclose(obs.max(), 1.0) or not np.isclose(obs.sum(), 1.0):
            raise OracleError("Observation is not a one-hot maze cell", {"shape": obs.shape})
        cell = spec.cell(int(np.argmax(obs)))
    if not spec.is_free(cell):
        raise OracleError(f"Observation decodes to a wall cell {cell}")
    return cell


# ============================================================
# SHORTEST PATHS & EXPERT
# ============================================================

def bfs_distances(spec: MazeSpec) -> Dict[Cell, int]:
    """Number of moves from each reachable free cell to the goal"""
    dist = {spec.goal: 0}
    queue = deque([spec.goal])
    while queue:
        cell = queue.popleft()
        for dx, dy in ACTION_DELTAS:
            nb = (cell[0] + dx, cell[1] + dy)
            if spec.is_free(nb) and nb not in dist:
                dist[nb] = dist[cell] + 1
                queue.append(nb)
    return dist


def value_iteration(spec: MazeSpec, max_sweeps: int = 10_000) -> Tuple[np.ndarray, np.ndarray]:
    """
    Undiscounted value iteration over free cells

    Returns:
        (V indexed by cell index, Q of shape (n_cells, 4)); wall cells and
        the goal keep value 0 and are never acted in.
    """
    values = np.zeros(spec.n_cells)
    q = np.zeros((spec.n_cells, len(ACTION_DELTAS)))
    starts = spec.start_cells()
    for _ in range(max_sweeps):
        new_values = values.copy()
        for cell in starts:
            i = spec.index(cell)
            for a in range(len(ACTION_DELTAS)):
                nxt, reward, _ = maze_step(spec, cell, a)
                q[i, a] = reward + (0.0 if nxt == spec.goal else values[spec.index(nxt)])
            new_values[i] = q[i].max()
        if np.array_equal(new_values, values):
            break
        values = new_values
    return values, q


# ============================================================
# LAYOUTS
# ============================================================

def _connected(width: int, height: int, walls: FrozenSet[Cell], goal: Cell) -> bool:
    candidate = MazeSpec(width=width, height=height, walls=walls, goal=goal)
    return len(bfs_distances(candidate)) == len(candidate.free_cells())


def generate_layout(seed: int, width: int = 10, height: int = 10, n_walls: int = 20,
                    goal: Cell = None) -> FrozenSet[Cell]:
    """Seeded wall placement; a wall is kept only if every free cell still reaches the goal"""
    goal = goal or (width - 1, height - 1)
    rng = np.random.default_rng(seed)
    candidates = [(x, y) for y in range(height) for x in range(width) if (x, y) != goal]
    order = rng.permutation(len(candidates))
    walls: FrozenSet[Cell] = frozenset()
    for i in order:
        if len(walls) >= n_walls:
            break
        trial = walls | {candidates[i]}
        if _connected(width, height, trial, goal):
            walls = trial
    return walls


def render_layout(spec: MazeSpec) -> str:
    rows = []
    for y in range(spec.height):
        row = []
        for x in range(spec.width):
            if (x, y) == spec.goal:
                row.append("G")
            elif (x, y) in spec.walls:
                row.append("#")
            else:
                row.append(".")
        rows.append("".join(row))
    return "\n".join(rows) + "\n"


def parse_layout(text: str, **overrides) -> MazeSpec:
    rows = [line.strip() for line in text.strip().splitlines() if line.strip()]
    height, width = len(rows), len(rows[0])
    walls, goal = set(), None
    for y, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"Layout row {y} has width {len(row)}, expected {width}")
        for x, ch in enumerate(row):
            if ch == "#":
                walls.add((x, y))
            elif ch == "G":
                goal = (x, y)
            elif ch != ".":
                raise ValueError(f"Unknown layout character {ch!r} at ({x}, {y})")
    if goal is None:
        raise ValueError("Layout has no goal cell 'G'")
    return MazeSpec(width=width, height=height, walls=frozenset(walls), goal=goal, **overrides)


# ============================================================
# GYMNASIUM ENVIRONMENT
# ============================================================

class MazeEnv(ImitationTask):
    """Maze task with a precomputed value-iteration expert"""

    def __init__(self, spec: MazeSpec):
        super().__init__()
        if spec.goal != (spec.width - 1, spec.height - 1):
            raise ValueError("Maze goal must be the lower-right corner")
        if not _connected(spec.width, spec.height, spec.walls, spec.goal):
            raise ValueError("Goal must be reachable from every free cell")
        self.maze = spec
        self.max_episode_steps = spec.max_episode_steps
        self.values, self.q_values = value_iteration(spec)
        self.action_space = spaces.Discrete(len(ACTION_DELTAS))
        self.observation_space = spaces.Box(0.0, 1.0, shape=(self.obs_dim,), dtype=np.float64)

    @property
    def obs_dim(self) -> int:
        return 2 if self.maze.encoding == "coords" else self.maze.n_cells

    @property
    def n_actions(self) -> int:
        return len(ACTION_DELTAS)

    def sample_start(self, rng: np.random.Generator) -> Cell:
        starts = self.maze.start_cells()
        return starts[int(rng.integers(len(starts)))]

    def simulate(self, state: Cell, action: int) -> Tuple[Cell, float, bool]:
        nxt, reward, _ = maze_step(self.maze, state, action)
        return nxt, reward, nxt == self.maze.goal

    def observe(self, state: Cell) -> np.ndarray:
        return maze_observe(self.maze, state)

    def decode(self, obs: np.ndarray) -> Cell:
        return maze_decode(self.maze, obs)

    def optimal_action(self, state: Cell) -> int:
        if state == self.maze.goal:
            raise OracleError("No action is needed at the goal")
        if not self.maze.is_free(state):
            raise OracleError(f"Cell {state} is a wall")
        # np.argmax keeps the first maximum: up < down < left < right
        return int(np.argmax(self.q_values[self.maze.index(state)]))

    def expert_return(self, cell: Cell) -> float:
        return float(self.values[self.maze.index(cell)])

    def state_id(self, obs: np.ndarray) -> str:
        return str(self.maze.index(self.decode(obs)))

    def describe(self) -> dict:
        return {"kind": "maze", "layout": render_layout(self.maze), "encoding": self.maze.encoding}
