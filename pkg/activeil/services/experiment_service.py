"""
Experiment Service - Seed sweeps and result files

=== OUTPUT LAYOUT ===
<run.output_dir>/<strategy>/
    config.txt                  config echo (load_config(config.txt) == config)
    seed_<n>/metrics.csv        one row every run.eval_interval steps
    seed_<n>/queries.csv        one row per paid expert answer
    seed_<n>/summary.json       RunSummary
    seed_<n>/checkpoint.npz     final models (run.save_checkpoint)
    seed_<n>/layout.txt         maze layout ('.', '#', 'G'), maze runs only

Seeds run in a process pool of run.workers processes; with one worker they
run in-process, in seed order.
"""
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

from loguru import logger

from activeil.config import ExperimentConfig, dump_config
from activeil.schemas.run import RunSummary
from activeil.services.training_service import RunResult, run_training
from activeil.utils.checkpoint import save_checkpoint
from activeil.utils.csv_io import write_metrics_csv, write_query_log_csv


@dataclass
class SeedOutput:
    seed: int
    directory: Path
    summary: RunSummary


def strategy_dir(config: ExperimentConfig, output_dir: Optional[Path] = None) -> Path:
    return Path(output_dir or config.run.output_dir) / config.query.strategy


def write_run(result: RunResult, directory: Path, config: ExperimentConfig) -> Path:
    """Write every per-seed artifact of a finished run"""
    directory.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(directory / "metrics.csv", result.metrics)
    write_query_log_csv(directory / "queries.csv", result.queries)
    (directory / "summary.json").write_text(result.summary.model_dump_json(indent=2) + "\n", encoding="utf-8")
    description = result.task.describe()
    if "layout" in description:
        (directory / "layout.txt").write_text(description["layout"], encoding="utf-8")
    if config.run.save_checkpoint:
        meta = {"seed": result.seed, "strategy": result.strategy, "config": dump_config(config),
                "env": description, "gamma": result.models.successor.gamma}
        save_checkpoint(directory / "checkpoint.npz", result.models.parameter_sets(), meta)
    return directory


def run_single_seed(config: ExperimentConfig, seed: int, output_dir: Path) -> SeedOutput:
    """Worker entry point: train one seed and write its files"""
    result = run_training(config, seed)
    directory = write_run(result, output_dir / f"seed_{seed}", config)
    return SeedOutput(seed, directory, result.summary)


def run_experiment(config: ExperimentConfig, seeds: Optional[Sequence[int]] = None,
                   output_dir: Optional[Path] = None) -> List[SeedOutput]:
    """
    Run every seed of the config and write the results

    Returns:
        One SeedOutput per seed, in seed-list order
    """
    seeds = list(seeds if seeds is not None else config.run.seeds)
    out = strategy_dir(config, output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(dump_config(config), encoding="utf-8")
    logger.info(f"📦 Experiment {config.query.strategy}: seeds {seeds} -> {out}")

    outputs: List[SeedOutput] = []
    if config.run.workers == 1 or len(seeds) == 1:
        for seed in seeds:
            outputs.append(run_single_seed(config, seed, out))
    else:
        with ProcessPoolExecutor(max_workers=config.run.workers) as executor:
            futures = [executor.submit(run_single_seed, config, seed, out) for seed in seeds]
            for future in as_completed(futures):
                done = future.result()
                outputs.append(done)
                logger.info(f"Seed {done.seed} finished ({len(outputs)}/{len(seeds)})")
        outputs.sort(key=lambda o: seeds.index(o.seed))
    return outputs
