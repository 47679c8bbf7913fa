"""KITTI odometry layout: calibration, ground-truth poses and sequence windows.

Expected tree::

    root/sequences/<id>/image_2/000000.png ...
    root/sequences/<id>/calib.txt
    root/poses/<id>.txt            (optional, sequences 00-10 only)
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import IngestionError, ParseError
from ..geometry import CameraIntrinsics

TRAIN_SEQUENCES = tuple(f"{i:02d}" for i in range(0, 9))
EVAL_SEQUENCES = ("09", "10")
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def read_calib(calib_path) -> dict:
    """All ``KEY: floats`` lines of a calib file as float arrays."""
    path = Path(calib_path)
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if ":" not in line:
            raise ParseError("expected 'KEY: values'", path=path, line=lineno)
        key, rest = line.split(":", 1)
        key = key.strip()
        try:
            vals = np.array([float(x) for x in rest.split()], dtype=np.float64)
        except ValueError:
            raise ParseError("non-numeric value", path=path, line=lineno, field=key) from None
        if key[:1] == "P" and key[1:].isdigit() and vals.size != 12:
            raise ParseError(f"projection matrix needs 12 values, found {vals.size}",
                             path=path, line=lineno, field=key)
        out[key] = vals
    return out


def parse_intrinsics(calib_path, image_size, camera: str = "P2", resize=None) -> CameraIntrinsics:
    """Pinhole intrinsics of ``camera`` for images of ``image_size = (width, height)``.

    ``resize = (width, height)`` rescales them for resized images.
    """
    calib = read_calib(calib_path)
    if camera not in calib:
        raise ParseError(f"missing '{camera}:' line", path=calib_path, field=camera)
    P = calib[camera].reshape(3, 4)
    width, height = image_size
    K = CameraIntrinsics(float(P[0, 0]), float(P[1, 1]), float(P[0, 2]), float(P[1, 2]), int(width), int(height))
    if resize is not None:
        K = K.resized(*resize)
    return K


def load_gt_poses(pose_file) -> np.ndarray:
    """Camera-to-world transforms, one 3x4 row-major matrix per line -> (N, 4, 4)."""
    path = Path(pose_file)
    rows = []
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        tokens = raw.split()
        if not tokens:
            continue
        if len(tokens) != 12:
            raise ParseError(f"expected 12 values, found {len(tokens)}", path=path, line=lineno)
        try:
            rows.append([float(t) for t in tokens])
        except ValueError:
            raise ParseError("non-numeric value", path=path, line=lineno) from None
    poses = np.zeros((len(rows), 4, 4))
    if rows:
        poses[:, :3, :] = np.asarray(rows).reshape(-1, 3, 4)
    poses[:, 3, 3] = 1.0
    return poses


def save_poses(path, transforms):
    """Write transforms in the 12-values-per-line format read by :func:`load_gt_poses`."""
    T = np.asarray(transforms, dtype=np.float64).reshape(-1, 4, 4)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for m in T:
            f.write(" ".join(repr(float(x)) for x in m[:3, :].ravel()) + "\n")
    return path


def relative_pose(T_i, T_j):
    """Pose of frame ``j`` expressed in frame ``i``: ``inv(T_i) @ T_j``."""
    R = T_i[:3, :3]
    inv = np.eye(4)
    inv[:3, :3] = R.T
    inv[:3, 3] = -R.T @ T_i[:3, 3]
    return inv @ T_j


@dataclass(frozen=True)
class DatasetIndex:
    windows: tuple  # ((sequence_id, start_frame), ...)
    split: str
    window: int
    stride: int
    frame_counts: tuple  # ((sequence_id, n_frames), ...)

    def __len__(self):
        return len(self.windows)


def split_sequences(split) -> tuple | None:
    """Sequence ids for a split name; ``None`` means every sequence present."""
    if isinstance(split, (list, tuple)):
        return tuple(split)
    if split == "train":
        return TRAIN_SEQUENCES
    if split in ("val", "eval", "test"):
        return EVAL_SEQUENCES
    if split == "all":
        return None
    return tuple(s.strip() for s in str(split).split(",") if s.strip())


def list_frames(seq_dir: Path, image_dir="image_2"):
    d = seq_dir / image_dir
    if not d.is_dir():
        return []
    return sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def scan_dataset(root, split="train", window: int = 15, stride: int = 1, image_dir="image_2") -> DatasetIndex:
    """Index every ``window``-frame window of the split's sequences under ``root``."""
    root = Path(root)
    seq_root = root / "sequences"
    if not seq_root.is_dir():
        raise IngestionError(f"{seq_root} does not exist")
    wanted = split_sequences(split)
    present = sorted(p.name for p in seq_root.iterdir() if p.is_dir())
    seqs = present if wanted is None else [s for s in wanted if s in present]
    if not seqs:
        raise IngestionError(f"no sequences of split '{split}' under {seq_root}")
    windows, counts = [], []
    for seq in seqs:
        seq_dir = seq_root / seq
        if not (seq_dir / "calib.txt").is_file():
            raise IngestionError(f"sequence {seq}: missing calib.txt")
        frames = list_frames(seq_dir, image_dir)
        if not frames:
            raise IngestionError(f"sequence {seq}: no images in {seq_dir / image_dir}")
        counts.append((seq, len(frames)))
        for start in range(0, len(frames) - window + 1, stride):
            windows.append((seq, start))
    name = split if isinstance(split, str) else ",".join(split)
    return DatasetIndex(tuple(windows), name, window, stride, tuple(counts))
