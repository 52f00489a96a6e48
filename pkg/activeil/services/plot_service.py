"""
Plot Service - Learning curves as standalone SVG documents

Left panel: greedy return vs environment step. Right panel: greedy return vs
cumulative expert queries. Each panel draws one faint trace per seed, the
across-seed mean and a +-1 standard error band.
"""
from pathlib import Path
from typing import Optional, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from activeil.services.report_service import align_on_queries  # noqa: E402

TRACE_ALPHA = 0.25


def _panel(ax, wide: pd.DataFrame, xlabel: str) -> None:
    x = wide.index.to_numpy(dtype=float)
    for seed in wide.columns:
        ax.plot(x, wide[seed].to_numpy(dtype=float), color="tab:blue", alpha=TRACE_ALPHA, linewidth=0.8)
    mean = wide.mean(axis=1, skipna=True).to_numpy(dtype=float)
    count = wide.notna().sum(axis=1).to_numpy()
    std = wide.std(axis=1, ddof=1, skipna=True).fillna(0.0).to_numpy(dtype=float)
    band = np.where(count > 1, std / np.sqrt(np.maximum(count, 1)), 0.0)
    ax.plot(x, mean, color="tab:blue", linewidth=2.0, label="mean")
    ax.fill_between(x, mean - band, mean + band, color="tab:blue", alpha=0.15, linewidth=0)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("greedy return")
    ax.grid(True, alpha=0.3)


def emit_plot(metrics: pd.DataFrame, out: Optional[Union[str, Path]] = None, title: str = "") -> Figure:
    """
    Draw both learning-curve panels; written as SVG when `out` is given

    Raises:
        ValueError: empty metrics
    """
    if metrics.empty:
        raise ValueError("Nothing to plot: metrics are empty")
    by_step = metrics.pivot_table(index="step", columns="seed", values="greedy_return", aggfunc="last")
    by_queries = align_on_queries(metrics)

    fig, (ax_step, ax_query) = plt.subplots(1, 2, figsize=(10, 4))
    _panel(ax_step, by_step, "environment step")
    _panel(ax_query, by_queries, "cumulative expert queries")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    if out is not None:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, format="svg")
    return fig
