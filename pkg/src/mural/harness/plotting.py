"""Label-complexity figures from the aggregate CSV."""

from __future__ import annotations

import csv
import logging
from typing import Dict, List, Mapping, Sequence

from mural.errors import MuralError
from mural.harness.analysis import summarize

logger = logging.getLogger(__name__)

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    MATPLOTLIB_AVAILABLE = True
except ImportError:
    MATPLOTLIB_AVAILABLE = False


def read_rows(path: str) -> List[Dict[str, str]]:
    """Rows of a results.csv file as dictionaries."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        return [row for row in csv.DictReader(f) if row["total_labels"]]


def plot_label_complexity(rows: Sequence[Mapping[str, str]], out_path: str) -> None:
    """Median label totals against 1/eps on log-log axes, one line per algorithm."""
    if not MATPLOTLIB_AVAILABLE:
        raise MuralError("plotting needs matplotlib; install the 'plot' extra")
    if not rows:
        raise MuralError("nothing to plot: no completed runs in the CSV")

    series: Dict[str, List] = {}
    for summary in summarize(rows):
        series.setdefault(summary.algorithm, []).append((1 / summary.eps, summary.median_labels))

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for algorithm, points in sorted(series.items()):
        points.sort()
        ax.plot([p[0] for p in points], [p[1] for p in points], marker="o", linewidth=1, label=algorithm)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("1 / eps")
    ax.set_ylabel("median label queries")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    logger.info("wrote %s", out_path)
