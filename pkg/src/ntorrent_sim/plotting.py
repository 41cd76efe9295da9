"""Rate figures rendered from trace samples."""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

PLOTTED = ("InInterests", "OutInterests", "InData", "OutData")
COLORS = {"InInterests": "tab:blue", "OutInterests": "tab:cyan",
          "InData": "tab:red", "OutData": "tab:orange"}


def rate_series(samples, interval_ms: float):
    """Per (node, type): KB/s for every interval from zero to the last sample.

    Returns ``(times_s, {(node, type): rates})``; idle intervals are zero.
    """
    end_ms = max((s.time_ms for s in samples), default=0.0)
    n = max(1, math.ceil(end_ms / interval_ms - 1e-9))
    times = [(i + 1) * interval_ms / 1000.0 for i in range(n)]
    scale = 1000.0 / interval_ms
    out = defaultdict(lambda: [0.0] * n)
    for s in samples:
        if s.type in PLOTTED:
            i = min(n - 1, max(0, math.ceil(s.time_ms / interval_ms - 1e-9) - 1))
            out[(s.node, s.type)][i] += s.kilobytes * scale
    return times, dict(out)


def plot_rates(samples, path, interval_ms: float = 500, node_order=None, title=None):
    """One panel per node with In/Out Interest and Data rates; saved to ``path``."""
    times, series = rate_series(samples, interval_ms)
    edges = [0.0] + times
    nodes = list(node_order) if node_order else sorted({s.node for s in samples})
    nodes = [n for n in nodes if any((n, t) in series for t in PLOTTED)] or nodes
    ncols = min(4, max(1, len(nodes)))
    nrows = max(1, math.ceil(len(nodes) / ncols))
    fig, axes = plt.subplots(nrows, ncols, figsize=(3.2 * ncols, 2.4 * nrows),
                             sharex=True, squeeze=False)
    index = {n: i for i, n in enumerate(node_order or nodes)}
    for ax, node in zip(axes.flat, nodes):
        for kind in PLOTTED:
            rates = series.get((node, kind))
            if rates:
                ax.stairs(rates, edges, color=COLORS[kind], label=kind, linewidth=1)
        ax.set_title(f"{index.get(node, '?')}: {node}", fontsize=9)
        ax.tick_params(labelsize=7)
        ax.grid(alpha=0.3)
    for ax in axes.flat[len(nodes):]:
        ax.set_visible(False)
    for ax in axes[-1]:
        ax.set_xlabel("time (s)", fontsize=8)
    for ax in axes[:, 0]:
        ax.set_ylabel("KB/s", fontsize=8)
    handles, labels = axes.flat[0].get_legend_handles_labels()
    if handles:
        fig.legend(handles, labels, loc="lower center", ncol=len(handles), fontsize=8)
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout(rect=(0, 0.06, 1, 1))
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
