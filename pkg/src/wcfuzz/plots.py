"""Report figures rendered next to the CSV output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .engine import EpochStats

__all__ = ["render_run_curves"]


def _plot_column(runs: list[list[EpochStats]], column: str, ylabel: str, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.2))
    for i, rows in enumerate(runs):
        xs = [r.epoch for r in rows]
        ys = [getattr(r, column) for r in rows]
        ax.step(xs, ys, where="post", alpha=0.8, label=f"run {i}")
    ax.set_xlabel("epoch")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    if len(runs) <= 10:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_run_curves(runs: list[list[EpochStats]], out_dir: Path) -> list[Path]:
    """Render best-tick and ESS curves over epochs, one line per repetition."""
    out_dir = Path(out_dir)
    paths = []
    runs = [rows for rows in runs if rows]
    if not runs:
        return paths
    for column, ylabel, fname in [
        ("best_tick", "best tick so far", "best_tick_vs_epoch.png"),
        ("ess", "effective sample size", "ess_vs_epoch.png"),
    ]:
        path = out_dir / fname
        _plot_column(runs, column, ylabel, path)
        paths.append(path)
    return paths
