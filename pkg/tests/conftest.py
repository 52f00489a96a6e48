"""
Shared fixtures

Long end-to-end experiments are marked `acceptance` and only run with
`pytest --run-acceptance`.
"""
import numpy as np
import pytest

from activeil.config import build_config
from activeil.environments.maze import MazeEnv, MazeSpec, generate_layout

TINY_RUN = {
    "env": {"kind": "maze", "layout_seed": 3, "n_walls": 12, "maze_max_steps": 60},
    "wae": {"latent_dim": 4, "hidden": [16]},
    "adversary": {"hidden": [16], "batch_size": 16},
    "successor": {"hidden": [16], "batch_size": 16, "target_sync": 50},
    "policy": {"hidden": [16], "batch_size": 16, "warmup_steps": 32, "epsilon_decay_steps": 200},
    "query": {"n_k": 4, "t_off": 100, "max_candidates": 200, "ensemble_heads": 3},
    "gate": {"window": 50, "guard_steps": 100, "min_query_gap": 5},
    "agent": {"budget": 20, "buffer_capacity": 2000},
    "run": {"total_steps": 300, "eval_interval": 100, "eval_episodes": 2, "seeds": [1]},
}


def pytest_addoption(parser):
    parser.addoption("--run-acceptance", action="store_true", default=False,
                     help="run the long end-to-end acceptance experiments")


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: long end-to-end experiment (needs --run-acceptance)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-acceptance"):
        return
    skip = pytest.mark.skip(reason="needs --run-acceptance")
    for item in items:
        if "acceptance" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch, tmp_path):
    """No stray AIL_* variables or .env file leak into config tests"""
    import os

    for key in list(os.environ):
        if key.upper().startswith("AIL_"):
            monkeypatch.delenv(key, raising=False)
    monkeypatch.chdir(tmp_path)


def _merge(base: dict, extra: dict) -> dict:
    out = {section: dict(values) for section, values in base.items()}
    for section, values in extra.items():
        out.setdefault(section, {}).update(values)
    return out


@pytest.fixture
def tiny_config():
    """Factory for a fast maze config; sections of `extra` override the tiny defaults"""

    def make(**extra):
        return build_config(_merge(TINY_RUN, extra))

    return make


@pytest.fixture(scope="session")
def maze():
    return MazeEnv(MazeSpec(walls=generate_layout(3, n_walls=12)))


@pytest.fixture(scope="session")
def open_maze():
    return MazeEnv(MazeSpec())
