"""Sequence windows fed to the trainer."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image

from ..flow import OnTheFlyFlow
from ..geometry import CameraIntrinsics


@dataclass
class SequenceSample:
    """Consecutive frames with their pairwise flows.

    ``frames`` is (L, H, W, 3) float32 in [0, 1]; ``flows`` (L-1, h, w, 2) holds
    the flow from frame k to k+1 at the resolution it was computed; ``gt_poses``
    are camera-to-world transforms (L, 4, 4).
    """

    frames: np.ndarray
    intrinsics: CameraIntrinsics
    flows: np.ndarray | None = None
    gt_depth: np.ndarray | None = None
    gt_poses: np.ndarray | None = None
    seq_id: str = ""
    start: int = 0

    def __post_init__(self):
        if self.frames.ndim != 4 or self.frames.shape[-1] != 3:
            raise ValueError(f"frames must be (L, H, W, 3), got {self.frames.shape}")
        if self.flows is not None and len(self.flows) != len(self.frames) - 1:
            raise ValueError(f"{len(self.frames)} frames need {len(self.frames) - 1} flows, got {len(self.flows)}")

    def __len__(self):
        return len(self.frames)

    def window(self, start: int, length: int) -> "SequenceSample":
        stop = start + length
        if start < 0 or stop > len(self):
            raise IndexError(f"window [{start}, {stop}) outside {len(self)} frames")
        return replace(
            self,
            frames=self.frames[start:stop],
            flows=None if self.flows is None else self.flows[start:stop - 1],
            gt_depth=None if self.gt_depth is None else self.gt_depth[start:stop],
            gt_poses=None if self.gt_poses is None else self.gt_poses[start:stop],
            start=self.start + start,
        )

    def with_flows(self, provider=None) -> "SequenceSample":
        provider = provider or OnTheFlyFlow()
        flows = [
            provider.flow((self.seq_id, self.start + k), self.frames[k], self.frames[k + 1])
            for k in range(len(self) - 1)
        ]
        return replace(self, flows=np.stack(flows))

    def gt_target_to_source(self, target: int, source: int) -> np.ndarray:
        """Ground-truth transform mapping target-frame points into the source frame."""
        Ts = self.gt_poses[source]
        inv = np.eye(4)
        inv[:3, :3] = Ts[:3, :3].T
        inv[:3, 3] = -Ts[:3, :3].T @ Ts[:3, 3]
        return inv @ self.gt_poses[target]


class SceneWindows:
    """Overlapping windows of one long in-memory sequence (e.g. a synthetic scene)."""

    def __init__(self, scene: SequenceSample, length: int, stride: int = 1, provider=None):
        if scene.flows is None:
            scene = scene.with_flows(provider)
        self.scene = scene
        self.length = length
        self.starts = list(range(0, len(scene) - length + 1, stride))

    def __len__(self):
        return len(self.starts)

    def __getitem__(self, i):
        return self.scene.window(self.starts[i], self.length)


def load_image(path, size=None) -> np.ndarray:
    """RGB image as float32 (H, W, 3) in [0, 1]; ``size = (width, height)`` resizes."""
    with Image.open(path) as im:
        im = im.convert("RGB")
        if size is not None and im.size != tuple(size):
            im = im.resize(tuple(size), Image.BILINEAR)
        return np.asarray(im, dtype=np.float32) / 255.0


class KittiWindows:
    """Windows from a :class:`~seqvo.data.kitti.DatasetIndex`, resized to the network resolution.

    Flow is computed on the full-resolution frames through ``provider``.
    """

    def __init__(self, root, index, size=(416, 128), provider=None, camera="P2", image_dir="image_2"):
        from .kitti import list_frames, load_gt_poses, parse_intrinsics

        self.root = Path(root)
        self.index = index
        self.size = tuple(size)
        self.provider = provider or OnTheFlyFlow()
        self._frames = {}
        self._K = {}
        self._poses = {}
        for seq, _ in index.frame_counts:
            seq_dir = self.root / "sequences" / seq
            files = list_frames(seq_dir, image_dir)
            self._frames[seq] = files
            with Image.open(files[0]) as im:
                full = im.size
            self._K[seq] = parse_intrinsics(seq_dir / "calib.txt", full, camera, resize=self.size)
            pose_file = self.root / "poses" / f"{seq}.txt"
            self._poses[seq] = load_gt_poses(pose_file) if pose_file.is_file() else None

    def __len__(self):
        return len(self.index)

    def __getitem__(self, i) -> SequenceSample:
        seq, start = self.index.windows[i]
        L = self.index.window
        files = self._frames[seq][start:start + L]
        full = [load_image(f) for f in files]
        flows = np.stack([
            self.provider.flow((seq, start + k), full[k], full[k + 1]) for k in range(L - 1)
        ])
        frames = np.stack([load_image(f, self.size) for f in files])
        poses = self._poses[seq]
        return SequenceSample(
            frames=frames,
            intrinsics=self._K[seq],
            flows=flows,
            gt_poses=None if poses is None else poses[start:start + L],
            seq_id=seq,
            start=start,
        )
