"""
Report Service - Comparing strategies on the same seeds and budget

=== INPUT ===
One directory per strategy, as written by run_experiment
(<strategy>/seed_<n>/{metrics.csv, summary.json}).

=== REPORT ===
- Final greedy return per seed, mean and standard error per strategy
- Return curves aligned on cumulative query count (query efficiency)
- Pairwise seed wins and mean return differences
"""
import json
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from activeil.core.exceptions import ComparisonError
from activeil.schemas.report import ComparisonReport, StrategySummary
from activeil.schemas.run import RunSummary
from activeil.utils.csv_io import read_metrics_csv

PathLike = Union[str, Path]


def align_on_queries(metrics: pd.DataFrame) -> pd.DataFrame:
    """
    Greedy return per seed as a step function of cumulative queries

    Returns a frame indexed by query count (union over seeds) with one column
    per seed; a seed's value at q is its last evaluation with <= q queries.
    """
    frame = metrics.assign(queries=metrics["queries_onpolicy"] + metrics["queries_offpolicy"])
    per_seed = {
        seed: group.groupby("queries")["greedy_return"].last()
        for seed, group in frame.sort_values(["seed", "step"]).groupby("seed")
    }
    grid = sorted(set().union(*(s.index for s in per_seed.values()))) if per_seed else []
    return pd.DataFrame({seed: s.reindex(grid, method="ffill") for seed, s in per_seed.items()}, index=grid)


def load_strategy(directory: PathLike) -> Tuple[List[RunSummary], pd.DataFrame]:
    """Summaries and concatenated metrics of every seed_<n> run under a directory"""
    directory = Path(directory)
    seed_dirs = sorted(p for p in directory.glob("seed_*") if p.is_dir())
    if not seed_dirs:
        raise ComparisonError("No seed runs found", {"dir": str(directory)})
    summaries, frames = [], []
    for seed_dir in seed_dirs:
        summaries.append(RunSummary.model_validate_json((seed_dir / "summary.json").read_text(encoding="utf-8")))
        frames.append(read_metrics_csv(seed_dir / "metrics.csv"))
    return summaries, pd.concat(frames, ignore_index=True)


def _summarize(label: str, metrics: pd.DataFrame) -> StrategySummary:
    last = metrics.sort_values(["seed", "step"]).groupby("seed").last()
    returns = last["greedy_return"].astype(float)
    queries = (last["queries_onpolicy"] + last["queries_offpolicy"]).astype(int)
    n = len(returns)
    stderr = float(returns.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    curve = align_on_queries(metrics).mean(axis=1, skipna=True)
    return StrategySummary(
        strategy=label,
        final_returns={int(k): float(v) for k, v in returns.items()},
        query_counts={int(k): int(v) for k, v in queries.items()},
        mean_return=float(returns.mean()),
        stderr_return=stderr,
        mean_queries=float(queries.mean()),
        query_curve=[(float(q), float(r)) for q, r in curve.items()],
    )


def _labels(summaries: Sequence[List[RunSummary]]) -> List[str]:
    labels: List[str] = []
    for summary in summaries:
        base = summary[0].strategy
        label, k = base, 2
        while label in labels:
            label, k = f"{base} ({k})", k + 1
        labels.append(label)
    return labels


def compare(directories: Sequence[PathLike]) -> ComparisonReport:
    """
    Compare strategies run on the same environment, budget and seeds

    Raises:
        ComparisonError: fewer than two inputs, or mismatched seeds, budgets
            or environments
    """
    if len(directories) < 2:
        raise ComparisonError("compare needs at least two strategy directories")
    paths = [Path(d) for d in directories]
    loaded = [load_strategy(p) for p in paths]
    summaries = [s for s, _ in loaded]

    reference = summaries[0][0]
    seeds = sorted(s.seed for s in summaries[0])
    for path, group in zip(paths, summaries):
        if sorted(s.seed for s in group) != seeds:
            raise ComparisonError("Strategies were run on different seeds", {"dir": str(path)})
        if any(s.budget != reference.budget for s in group):
            raise ComparisonError("Strategies were run with different budgets", {"dir": str(path)})
        if any(s.env_fingerprint != reference.env_fingerprint for s in group):
            raise ComparisonError("Strategies were run on different environments", {"dir": str(path)})

    labels = _labels(summaries)
    strategies: Dict[str, StrategySummary] = {
        label: _summarize(label, metrics) for label, (_, metrics) in zip(labels, loaded)
    }

    wins: Dict[str, Dict[str, int]] = {}
    diffs: Dict[str, Dict[str, float]] = {}
    for a in labels:
        wins[a], diffs[a] = {}, {}
        ra = strategies[a].final_returns
        for b in labels:
            if a == b:
                continue
            rb = strategies[b].final_returns
            wins[a][b] = sum(1 for s in seeds if ra[s] > rb[s])
            diffs[a][b] = float(np.mean([ra[s] - rb[s] for s in seeds]))

    logger.info(f"📊 Compared {', '.join(labels)} on seeds {seeds}")
    return ComparisonReport(env_kind=reference.env_kind, budget=reference.budget, seeds=seeds,
                            strategies=strategies, pairwise_wins=wins, mean_difference=diffs)


def format_report(report: ComparisonReport) -> str:
    """Plain-text summary table"""
    frame = pd.DataFrame(
        [
            {
                "strategy": s.strategy,
                "mean_return": s.mean_return,
                "stderr": s.stderr_return,
                "mean_queries": s.mean_queries,
                "seeds": len(s.final_returns),
            }
            for s in report.strategies.values()
        ]
    )
    header = f"env={report.env_kind} budget={report.budget} seeds={report.seeds}\n"
    return header + frame.to_string(index=False, float_format=lambda v: f"{v:.3f}") + "\n"


def write_report(report: ComparisonReport, out_dir: PathLike) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "comparison.json").write_text(json.dumps(report.model_dump(), indent=2) + "\n", encoding="utf-8")
    (out / "comparison.txt").write_text(format_report(report), encoding="utf-8")
    return out
