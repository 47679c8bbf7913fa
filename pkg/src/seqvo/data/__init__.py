"""Dataset ingestion (KITTI odometry layout) and synthetic verification scenes."""

from .kitti import (
    DatasetIndex,
    load_gt_poses,
    parse_intrinsics,
    read_calib,
    relative_pose,
    save_poses,
    scan_dataset,
)
from .sample import KittiWindows, SceneWindows, SequenceSample, load_image
from .synthetic import SynthConfig, load_synth_config, motion_matrix, synth_scene

__all__ = [
    "DatasetIndex",
    "KittiWindows",
    "SceneWindows",
    "SequenceSample",
    "SynthConfig",
    "load_gt_poses",
    "load_image",
    "load_synth_config",
    "motion_matrix",
    "parse_intrinsics",
    "read_calib",
    "relative_pose",
    "save_poses",
    "scan_dataset",
    "synth_scene",
]
