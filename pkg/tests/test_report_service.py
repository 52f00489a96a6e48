import numpy as np
import pytest

from activeil.core.exceptions import ComparisonError
from activeil.schemas.run import MetricsRow, RunSummary
from activeil.services.report_service import align_on_queries, compare, format_report, write_report
from activeil.utils.csv_io import read_metrics_csv, write_metrics_csv


def _row(seed, step, ret, on, off):
    return MetricsRow(seed=seed, step=step, episode=step // 10, greedy_return=ret, queries_onpolicy=on,
                      queries_offpolicy=off, tau=0.0, disc_loss=0.1, wae_loss=0.2, sr_loss=0.3,
                      policy_loss=float("nan"))


def _strategy(root, name, finals, budget=10, env="maze-A"):
    """Two rows per seed: an early one and the final one"""
    for seed, final in finals.items():
        directory = root / name / f"seed_{seed}"
        write_metrics_csv(directory / "metrics.csv", [_row(seed, 100, 0.0, 1, 2), _row(seed, 200, final, 2, 5)])
        summary = RunSummary(strategy=name, seed=seed, env_kind="maze", env_fingerprint=env, budget=budget,
                             total_steps=200, steps_run=200, episodes=20, queries_onpolicy=2, queries_offpolicy=5,
                             oracle_calls=7, final_return=final, expert_return=9.0)
        (directory / "summary.json").write_text(summary.model_dump_json(), encoding="utf-8")
    return root / name


def test_hand_computed_means(tmp_path):
    a = _strategy(tmp_path, "coreset_sr", {1: 4.0, 2: 6.0, 3: 8.0})
    b = _strategy(tmp_path, "random", {1: 1.0, 2: 7.0, 3: 2.0})
    report = compare([a, b])
    assert report.seeds == [1, 2, 3] and report.budget == 10
    sa, sb = report.strategies["coreset_sr"], report.strategies["random"]
    assert sa.mean_return == pytest.approx(6.0)
    assert sa.stderr_return == pytest.approx(2.0 / np.sqrt(3))
    assert sb.mean_return == pytest.approx(10.0 / 3)
    assert sa.mean_queries == 7.0
    assert report.pairwise_wins == {"coreset_sr": {"random": 2}, "random": {"coreset_sr": 1}}
    assert report.mean_difference["coreset_sr"]["random"] == pytest.approx(8.0 / 3)
    assert sa.query_curve == [(3.0, 0.0), (7.0, 6.0)]


def test_self_comparison(tmp_path):
    a = _strategy(tmp_path, "coreset_sr", {1: 4.0, 2: 6.0})
    report = compare([a, a])
    assert set(report.strategies) == {"coreset_sr", "coreset_sr (2)"}
    assert report.mean_difference["coreset_sr"]["coreset_sr (2)"] == 0.0


@pytest.mark.parametrize(
    "kwargs, finals",
    [({"budget": 20}, {1: 1.0, 2: 1.0}), ({"env": "maze-B"}, {1: 1.0, 2: 1.0}), ({}, {1: 1.0, 3: 1.0})],
)
def test_refuses_incomparable_strategies(tmp_path, kwargs, finals):
    a = _strategy(tmp_path, "coreset_sr", {1: 4.0, 2: 6.0})
    b = _strategy(tmp_path, "random", finals, **kwargs)
    with pytest.raises(ComparisonError):
        compare([a, b])


def test_needs_two_inputs(tmp_path):
    with pytest.raises(ComparisonError):
        compare([_strategy(tmp_path, "random", {1: 0.0})])


def test_align_on_queries(tmp_path):
    path = write_metrics_csv(tmp_path / "m.csv", [_row(1, 100, 1.0, 0, 0), _row(1, 200, 2.0, 0, 4),
                                                  _row(2, 100, 5.0, 0, 2), _row(2, 200, 6.0, 1, 3)])
    wide = align_on_queries(read_metrics_csv(path))
    assert wide.index.tolist() == [0, 2, 4]
    assert wide[1].tolist()[0] == 1.0 and np.isnan(wide[2].tolist()[0])
    assert wide[1].tolist()[1:] == [1.0, 2.0]
    assert wide[2].tolist()[1:] == [5.0, 6.0]


def test_write_report(tmp_path):
    a = _strategy(tmp_path, "coreset_sr", {1: 4.0})
    b = _strategy(tmp_path, "uncertainty", {1: 3.0})
    out = write_report(compare([a, b]), tmp_path / "cmp")
    assert (out / "comparison.json").is_file()
    text = (out / "comparison.txt").read_text(encoding="utf-8")
    assert "uncertainty" in text and text == format_report(compare([a, b]))
