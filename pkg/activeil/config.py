"""
Experiment configuration

=== SOURCES (highest priority first) ===
1. Environment variables  AIL_<SECTION>__<KEY>   (e.g. AIL_QUERY__N_K=5)
2. .env file in the working directory
3. Config file values     (line-oriented `section.key = value`)
4. Field defaults

List-valued keys are comma separated in config files (`wae.hidden = 64, 64`)
and JSON in environment variables (`AIL_WAE__HIDDEN=[32,32]`).

=== FILE FORMAT ===
    # comment
    env.kind = maze
    query.strategy = coreset_sr
    query.n_k = 10
"""
from __future__ import annotations

from pathlib import Path
from typing import Annotated, Any, Dict, Literal, Tuple, Type, Union

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from activeil.core.exceptions import ConfigError


def _split_list(value: Any) -> Any:
    """Accept "64, 64" (config files) as well as real sequences"""
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",")]
        return [p for p in parts if p]
    return value


IntList = Annotated[Tuple[int, ...], BeforeValidator(_split_list)]
FloatList = Annotated[Tuple[float, ...], BeforeValidator(_split_list)]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# ============================================================
# SECTIONS
# ============================================================

class EnvConfig(_Section):
    """Task selection and task parameters"""
    kind: Literal["maze", "lifted_nav"] = "maze"

    # Maze
    layout_seed: int = 0
    n_walls: int = Field(20, ge=0)
    layout_file: str = ""  # '.', '#', 'G' text grid; empty = generated from layout_seed
    maze_encoding: Literal["onehot", "coords"] = "onehot"
    maze_max_steps: int = Field(200, ge=1)

    # Lifted navigation
    obs_dim: int = Field(32, ge=2)
    lift_seed: int = 0
    goal_radius: float = Field(0.08, gt=0)
    max_step: float = Field(0.1, gt=0)
    nav_max_steps: int = Field(100, ge=1)
    continuous_actions: bool = False


class WaeConfig(_Section):
    """Encoder / decoder and MMD prior matching"""
    latent_dim: int = Field(8, ge=1)
    hidden: IntList = (64, 64)
    activation: Literal["tanh", "relu"] = "tanh"
    kernel: Literal["rbf", "rq"] = "rbf"
    bandwidth_mode: Literal["median", "fixed"] = "median"
    bandwidth: float = Field(1.0, gt=0)
    rq_alphas: FloatList = (0.2, 0.5, 1.0, 2.0, 5.0)
    beta1: float = Field(1.0, ge=0)
    lr: float = Field(1e-3, ge=0)


class AdversaryConfig(_Section):
    """Discriminator and the combined adversarial objective"""
    hidden: IntList = (64, 64)
    lr: float = Field(1e-3, ge=0)
    alpha1: float = Field(1.0, ge=0)
    alpha2: float = Field(1.0, ge=0)
    beta: float = Field(1.0, ge=0)
    batch_size: int = Field(64, ge=2)
    every_steps: int = Field(1, ge=1)


class SuccessorConfig(_Section):
    hidden: IntList = (64, 64)
    gamma: float = Field(0.95, ge=0, lt=1)
    lr: float = Field(1e-3, ge=0)
    target_sync: int = Field(500, ge=1)
    batch_size: int = Field(64, ge=1)


class PolicyConfig(_Section):
    """Q-learning policy over the latent space"""
    hidden: IntList = (64, 64)
    gamma: float = Field(0.95, ge=0, lt=1)
    lr: float = Field(1e-3, ge=0)
    entropy_weight: float = Field(0.0, ge=0)
    epsilon_start: float = Field(1.0, ge=0, le=1)
    epsilon_end: float = Field(0.05, ge=0, le=1)
    epsilon_decay_steps: int = Field(5000, ge=1)
    target_sync: int = Field(200, ge=1)
    batch_size: int = Field(64, ge=1)
    warmup_steps: int = Field(200, ge=1)


class QueryConfig(_Section):
    """Off-policy query strategy"""
    strategy: Literal["coreset_sr", "random", "uncertainty"] = "coreset_sr"
    n_k: int = Field(10, ge=1)
    t_off: int = Field(2000, ge=1)
    offpolicy_enabled: bool = True
    ensemble_heads: int = Field(10, ge=2)
    bootstrap_p: float = Field(0.5, gt=0, le=1)
    max_candidates: int = Field(2000, ge=1)
    kmedoids_max_iter: int = Field(100, ge=1)


class GateConfig(_Section):
    """On-policy safety gate (only used by the coreset_sr strategy)"""
    enabled: bool = True
    alpha: float = Field(0.05, gt=0, lt=1)
    window: int = Field(1000, ge=1)
    threshold_mode: Literal["window", "buffer", "fixed"] = "window"
    fixed_tau: float = Field(0.0, ge=0, le=1)
    min_query_gap: int = Field(10, ge=1)
    guard_steps: int = Field(2000, ge=0)
    add_to_expert_dataset: bool = True


class AgentConfig(_Section):
    budget: int = Field(300, ge=0)
    buffer_capacity: int = Field(50_000, ge=1)
    demo_episodes: int = Field(1, ge=0)
    halt_on_budget: bool = True


class RunConfig(_Section):
    total_steps: int = Field(50_000, ge=1)
    seeds: IntList = (1,)
    output_dir: str = "results"
    workers: int = Field(1, ge=1)
    eval_interval: int = Field(1000, ge=1)
    eval_episodes: int = Field(10, ge=1)
    log_level: str = "INFO"
    save_checkpoint: bool = True

    @field_validator("seeds")
    @classmethod
    def _non_empty(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        if not v:
            raise ValueError("at least one seed is required")
        return v


# ============================================================
# ROOT SETTINGS
# ============================================================

class ExperimentConfig(BaseSettings):
    """Every knob of an experiment; all fields have defaults"""

    model_config = SettingsConfigDict(
        env_prefix="AIL_",
        env_nested_delimiter="__",
        env_file=".env",
        extra="forbid",
        case_sensitive=False,
        frozen=True,
    )

    env: EnvConfig = EnvConfig()
    wae: WaeConfig = WaeConfig()
    adversary: AdversaryConfig = AdversaryConfig()
    successor: SuccessorConfig = SuccessorConfig()
    policy: PolicyConfig = PolicyConfig()
    query: QueryConfig = QueryConfig()
    gate: GateConfig = GateConfig()
    agent: AgentConfig = AgentConfig()
    run: RunConfig = RunConfig()

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        # environment beats file values passed as init kwargs
        return env_settings, dotenv_settings, init_settings, file_secret_settings


SECTIONS = tuple(ExperimentConfig.model_fields)


# ============================================================
# TEXT FORMAT
# ============================================================

def parse_config_text(text: str) -> Dict[str, Dict[str, str]]:
    """`section.key = value` lines -> nested dict of raw strings"""
    nested: Dict[str, Dict[str, str]] = {}
    bad: list = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"Line {lineno}: expected 'section.key = value'", [line])
        key, value = (part.strip() for part in line.split("=", 1))
        if key.count(".") != 1:
            bad.append(key)
            continue
        section, field = key.split(".")
        nested.setdefault(section, {})[field] = value
    if bad:
        raise ConfigError("Config keys must look like section.key", bad)
    return nested


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ", ".join(_format_value(v) for v in value)
    return str(value)


def dump_config(config: ExperimentConfig) -> str:
    """Every field as `section.key = value`; load_config(dump_config(c)) == c"""
    lines = []
    for section in SECTIONS:
        block: BaseModel = getattr(config, section)
        for name in type(block).model_fields:
            lines.append(f"{section}.{name} = {_format_value(getattr(block, name))}")
        lines.append("")
    return "\n".join(lines)


def build_config(values: Union[Dict[str, Any], None] = None) -> ExperimentConfig:
    """Validate nested values (plus environment overrides) into a config"""
    try:
        return ExperimentConfig(**(values or {}))
    except ValidationError as exc:
        keys = [".".join(str(p) for p in err["loc"]) for err in exc.errors()]
        raise ConfigError("Invalid configuration", keys) from exc


def load_config(path: Union[str, Path, None] = None, **overrides: Dict[str, Any]) -> ExperimentConfig:
    """
    Read a config file and apply section overrides

    Args:
        path: config file (None = defaults only)
        overrides: section -> {key: value}, applied over the file values
    """
    nested: Dict[str, Dict[str, Any]] = {}
    if path is not None:
        nested = parse_config_text(Path(path).read_text(encoding="utf-8"))
    for section, values in overrides.items():
        nested.setdefault(section, {}).update(values)
    return build_config(nested)


def config_from_text(text: str) -> ExperimentConfig:
    """Inverse of dump_config"""
    return build_config(parse_config_text(text))


def config_from_env() -> ExperimentConfig:
    """Defaults plus AIL_* environment variables and .env"""
    return build_config()
