import json

import numpy as np

from activeil.config import load_config
from activeil.schemas.run import RunSummary
from activeil.services.experiment_service import run_experiment
from activeil.utils.checkpoint import load_checkpoint
from activeil.utils.csv_io import read_metrics_csv, read_query_log_csv


def test_single_seed_layout(tiny_config, tmp_path):
    cfg = tiny_config(agent={"budget": 0}, run={"total_steps": 100, "eval_interval": 25})
    outputs = run_experiment(cfg, output_dir=tmp_path)
    root = tmp_path / "coreset_sr"
    seed_dir = root / "seed_1"
    assert [o.directory for o in outputs] == [seed_dir]
    for name in ("metrics.csv", "queries.csv", "summary.json", "checkpoint.npz", "layout.txt"):
        assert (seed_dir / name).is_file()

    assert load_config(root / "config.txt") == cfg
    metrics = read_metrics_csv(seed_dir / "metrics.csv")
    assert metrics["step"].tolist() == [25, 50, 75, 100]
    assert read_query_log_csv(seed_dir / "queries.csv") == []
    summary = RunSummary.model_validate_json((seed_dir / "summary.json").read_text(encoding="utf-8"))
    assert summary.oracle_calls == 0 and summary.seed == 1

    models, meta = load_checkpoint(seed_dir / "checkpoint.npz")
    assert {"encoder", "decoder", "discriminator", "sr_psi", "sr_target", "policy_q"} <= set(models)
    assert meta["seed"] == 1 and meta["strategy"] == "coreset_sr"


def test_seed_list_is_reproducible(tiny_config, tmp_path):
    cfg = tiny_config(run={"total_steps": 150, "seeds": [1, 2], "eval_interval": 50})
    outputs = run_experiment(cfg, output_dir=tmp_path / "a")
    assert [o.seed for o in outputs] == [1, 2]
    again = run_experiment(cfg, seeds=[1], output_dir=tmp_path / "b")
    for name in ("metrics.csv", "queries.csv"):
        first = (tmp_path / "a" / "coreset_sr" / "seed_1" / name).read_bytes()
        assert first == (again[0].directory / name).read_bytes()


def test_process_pool_keeps_seed_order(tiny_config, tmp_path):
    cfg = tiny_config(run={"total_steps": 60, "seeds": [3, 1], "eval_interval": 30, "workers": 2},
                      query={"strategy": "random"})
    outputs = run_experiment(cfg, output_dir=tmp_path)
    assert [o.seed for o in outputs] == [3, 1]
    summary = json.loads((tmp_path / "random" / "seed_3" / "summary.json").read_text(encoding="utf-8"))
    assert summary["strategy"] == "random"
    assert np.isfinite(summary["final_return"])
