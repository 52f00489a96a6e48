import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import pytest

from activeil.services.plot_service import emit_plot


def _metrics(n_seeds, steps=(100, 200, 300), value=None):
    rows = []
    for seed in range(n_seeds):
        for k, step in enumerate(steps):
            rows.append({"seed": seed, "step": step, "greedy_return": value if value is not None else seed + k,
                         "queries_onpolicy": k, "queries_offpolicy": 2 * k})
    return pd.DataFrame(rows)


def test_ten_seeds_give_ten_traces_and_a_mean(tmp_path):
    out = tmp_path / "curves.svg"
    fig = emit_plot(_metrics(10), out, title="maze")
    for ax in fig.axes:
        assert len(ax.get_lines()) == 11
    assert "<svg" in out.read_text(encoding="utf-8")
    plt.close(fig)


def test_constant_series_is_flat_and_labeled():
    fig = emit_plot(_metrics(1, value=4.5))
    ax = fig.axes[0]
    for line in ax.get_lines():
        np.testing.assert_array_equal(line.get_ydata(), 4.5)
    assert ax.get_xlabel() and ax.get_ylabel()
    plt.close(fig)


def test_axes_contain_every_point():
    metrics = _metrics(4)
    fig = emit_plot(metrics)
    ax = fig.axes[0]
    lo, hi = ax.get_ylim()
    assert lo <= metrics["greedy_return"].min() and hi >= metrics["greedy_return"].max()
    xlo, xhi = ax.get_xlim()
    assert xlo <= 100 and xhi >= 300
    plt.close(fig)


def test_empty_metrics():
    with pytest.raises(ValueError):
        emit_plot(_metrics(0))
