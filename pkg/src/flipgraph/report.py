"""Best-rank-versus-iteration figures from search traces.

Traces are the CSV files written by ``flipgraph search``. Several traces may
share a label; they are then drawn as a median curve with a min/max band.
Each figure gets a CSV summary written next to it.
"""

from __future__ import annotations

import csv
from collections import OrderedDict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

Records = List[Tuple[int, int, int]]

SUMMARY_HEADER = ("label", "run", "iterations", "start_rank", "final_best_rank", "first_improvement")


def best_rank_at(records: Records, points: Sequence[int]) -> np.ndarray:
    """Best rank known at each iteration in ``points`` (step interpolation)."""
    its = np.array([r[0] for r in records])
    best = np.array([r[2] for r in records])
    idx = np.searchsorted(its, np.asarray(points), side="right") - 1
    return best[np.clip(idx, 0, len(best) - 1)]


def iteration_grid(series: Dict[str, List[Records]], per_decade: int = 20) -> np.ndarray:
    last = max(recs[-1][0] for runs in series.values() for recs in runs)
    last = max(last, 1)
    grid = np.unique(np.round(np.logspace(0, np.log10(last), per_decade * max(1, int(np.log10(last)) + 1))))
    return grid.astype(int)


def first_improvement(records: Records) -> Optional[int]:
    start = records[0][2]
    for it, _, best in records:
        if best < start:
            return it
    return None


def write_summary(path: Path, series: Dict[str, List[Records]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for label, runs in series.items():
            for k, recs in enumerate(runs):
                first = first_improvement(recs)
                w.writerow([label, k, recs[-1][0], recs[0][2], recs[-1][2], "" if first is None else first])


def plot_best_rank(
    series: Dict[str, List[Records]],
    out: Path,
    title: str = "",
    summary: bool = True,
) -> Tuple[Path, Optional[Path]]:
    """Render the figure to ``out`` (PNG); returns (figure path, summary CSV path)."""
    out = Path(out)
    grid = iteration_grid(series)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    markers = "o^sDv<>"
    for k, (label, runs) in enumerate(series.items()):
        curves = np.array([best_rank_at(recs, grid) for recs in runs])
        med = np.median(curves, axis=0)
        name = label if len(runs) == 1 else f"{label} (median of {len(runs)})"
        ax.step(grid, med, where="post", label=name, marker=markers[k % len(markers)], markevery=0.1, ms=4)
        if len(runs) > 1:
            ax.fill_between(grid, curves.min(axis=0), curves.max(axis=0), step="post", alpha=0.2)
    ax.set_xscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("best rank found")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    csv_path = None
    if summary:
        csv_path = out.with_suffix(".csv")
        write_summary(csv_path, series)
    return out, csv_path


def group_by_label(paths: Sequence[Path], labels: Optional[Sequence[str]], loader) -> Dict[str, List[Records]]:
    if labels and len(labels) != len(paths):
        raise ValueError(f"got {len(labels)} labels for {len(paths)} traces")
    series: Dict[str, List[Records]] = OrderedDict()
    for k, path in enumerate(paths):
        label = labels[k] if labels else Path(path).stem
        recs = loader(path)
        if not recs:
            raise ValueError(f"{path}: trace has no records")
        series.setdefault(label, []).append(recs)
    return series
