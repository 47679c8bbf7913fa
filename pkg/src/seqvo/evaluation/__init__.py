"""Depth and odometry evaluation."""

from .metrics import (
    DEFAULT_DEPTH_CAP,
    DepthMetrics,
    accumulate_trajectory,
    ate,
    depth_metrics,
    difference_trajectory,
    snippet_ate,
)
from .report import ReportFiles, emit_report, plot_trajectories, write_metrics_csv

__all__ = [
    "DEFAULT_DEPTH_CAP",
    "DepthMetrics",
    "ReportFiles",
    "accumulate_trajectory",
    "ate",
    "depth_metrics",
    "difference_trajectory",
    "emit_report",
    "plot_trajectories",
    "snippet_ate",
    "write_metrics_csv",
]
