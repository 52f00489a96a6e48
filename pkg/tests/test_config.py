import pytest

from activeil.config import (
    ExperimentConfig, build_config, config_from_env, config_from_text, dump_config, load_config,
    parse_config_text,
)
from activeil.core.exceptions import ConfigError


def test_defaults():
    cfg = build_config()
    assert cfg.wae.latent_dim == 8
    assert cfg.query.strategy == "coreset_sr"
    assert cfg.query.ensemble_heads == 10
    assert cfg.gate.alpha == 0.05
    assert cfg.agent.budget == 300
    assert cfg.wae.hidden == (64, 64)


def test_parse_config_text():
    text = """
    # comment line
    env.kind = lifted_nav   # trailing comment
    wae.hidden = 32, 16
    """
    assert parse_config_text(text) == {"env": {"kind": "lifted_nav"}, "wae": {"hidden": "32, 16"}}


def test_load_config_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("query.strategy = random\nwae.hidden = 32, 16\ngate.enabled = false\n", encoding="utf-8")
    cfg = load_config(path)
    assert cfg.query.strategy == "random"
    assert cfg.wae.hidden == (32, 16)
    assert cfg.gate.enabled is False


def test_overrides_beat_file_values(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("run.output_dir = a\nrun.seeds = 1, 2, 3\n", encoding="utf-8")
    cfg = load_config(path, run={"seeds": [7], "output_dir": "b"})
    assert cfg.run.seeds == (7,)
    assert cfg.run.output_dir == "b"


def test_dump_round_trip():
    cfg = build_config({"wae": {"rq_alphas": [0.1, 0.3]}, "adversary": {"lr": 0.00012345}, "run": {"seeds": [4, 5]}})
    assert config_from_text(dump_config(cfg)) == cfg


def test_dump_lists_every_field():
    text = dump_config(ExperimentConfig())
    assert "gate.threshold_mode = window" in text
    assert "agent.halt_on_budget = true" in text


@pytest.mark.parametrize(
    "text, key",
    [
        ("wae.unknown = 1", "wae.unknown"),
        ("gate.alpha = 1.5", "gate.alpha"),
        ("query.strategy = greedy", "query.strategy"),
        ("run.seeds = ", "run.seeds"),
    ],
)
def test_invalid_values_name_the_key(text, key):
    with pytest.raises(ConfigError) as err:
        config_from_text(text)
    assert any(k.startswith(key) for k in err.value.keys)


def test_malformed_lines():
    with pytest.raises(ConfigError):
        parse_config_text("just words")
    with pytest.raises(ConfigError):
        parse_config_text("latent_dim = 3")


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("AIL_QUERY__N_K", "5")
    monkeypatch.setenv("AIL_WAE__HIDDEN", "[8, 8]")
    cfg = config_from_env()
    assert cfg.query.n_k == 5
    assert cfg.wae.hidden == (8, 8)


def test_environment_beats_file(monkeypatch, tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("query.n_k = 3\n", encoding="utf-8")
    monkeypatch.setenv("AIL_QUERY__N_K", "6")
    assert load_config(path).query.n_k == 6
