"""CSV tables, trajectory files and top-down plots."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..data.kitti import save_poses
from .metrics import DepthMetrics


@dataclass
class ReportFiles:
    metrics_csv: Path
    ate_csv: Path | None = None
    trajectories: list = field(default_factory=list)
    plots: list = field(default_factory=list)


def write_metrics_csv(path, metrics: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("name",) + DepthMetrics.columns())
        for name, m in metrics.items():
            w.writerow((name,) + tuple(f"{v:.6f}" for v in m.as_tuple()))
    return path


def plot_trajectories(path, trajectories: dict, title=""):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 5))
    for name, traj in trajectories.items():
        t = np.asarray(traj)[:, :3, 3]
        ax.plot(t[:, 0], t[:, 2], label=name)
    ax.set_xlabel("x")
    ax.set_ylabel("z")
    ax.set_aspect("equal", adjustable="datalim")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return Path(path)


def emit_report(metrics: dict, trajectories: dict, out_dir, ate_values: dict | None = None,
                plot: bool = True) -> ReportFiles:
    """Write ``metrics.csv``, one KITTI-format file per trajectory and a top-down plot.

    ``metrics`` maps a model/sequence name to :class:`DepthMetrics`;
    ``trajectories`` maps a name to (N, 4, 4) global poses.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = ReportFiles(metrics_csv=write_metrics_csv(out / "metrics.csv", metrics))
    for name, traj in trajectories.items():
        files.trajectories.append(save_poses(out / f"{name}.txt", traj))
    if ate_values:
        files.ate_csv = out / "ate.csv"
        with open(files.ate_csv, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(("name", "ate"))
            for name, v in ate_values.items():
                w.writerow((name, f"{v:.6f}"))
    if plot and trajectories:
        files.plots.append(plot_trajectories(out / "trajectories.png", trajectories))
    return files
