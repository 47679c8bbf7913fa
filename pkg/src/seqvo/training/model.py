"""Generator-side forward pass: flow codes -> sequence codes -> disparity and pose -> view synthesis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .. import losses as L
from ..flow import flow_to_encoder_input
from ..geometry import inverse_warp, invert, pose_vec_to_transform, transform_to_pose_vec
from ..nets import DispNet, FlowEncoder, PoseExpNet, SequenceLSTM

N_SCALES = 4


@dataclass
class Batch:
    frames: torch.Tensor  # (B, L, 3, H, W)
    flows: torch.Tensor  # (B, L-1, 2, H, W), normalized
    K: torch.Tensor  # (B, 3, 3) at network resolution

    @property
    def size(self):
        return self.frames.shape[0]


def collate(samples, size) -> Batch:
    """Stack :class:`SequenceSample` windows into network-resolution tensors; ``size = (h, w)``."""
    h, w = size
    frames, flows, Ks = [], [], []
    for s in samples:
        f = torch.from_numpy(np.ascontiguousarray(s.frames)).permute(0, 3, 1, 2).float()
        K = s.intrinsics
        if f.shape[-2:] != (h, w):
            f = F.interpolate(f, size=(h, w), mode="bilinear", align_corners=False, antialias=True)
            K = K.resized(w, h)
        frames.append(f.clamp(0, 1))
        if s.flows is None:
            raise ValueError("sample has no flow; call with_flows() first")
        flows.append(torch.stack([flow_to_encoder_input(fl, (h, w)) for fl in s.flows]))
        Ks.append(K.matrix())
    return Batch(torch.stack(frames), torch.stack(flows), torch.stack(Ks))


def scale_intrinsics(K, level):
    if level == 0:
        return K
    K = K.clone()
    K[..., :2, :] = K[..., :2, :] / (2**level)
    return K


class SeqVOModel(nn.Module):
    """Flow encoder, optional LSTM, disparity network and pose/explainability network."""

    def __init__(self, use_lstm=True, n_sources=2, disp_alpha=10.0, disp_beta=0.01, pose_scale=0.01):
        super().__init__()
        self.encoder = FlowEncoder()
        self.lstm = SequenceLSTM(self.encoder.code_dim, 128) if use_lstm else None
        self.dispnet = DispNet(code_dim=128, alpha=disp_alpha, beta=disp_beta)
        self.posenet = PoseExpNet(n_sources=n_sources, pose_scale=pose_scale)

    def groups(self) -> dict:
        g = {"encoder": self.encoder, "dispnet": self.dispnet, "posenet": self.posenet}
        if self.lstm is not None:
            g["lstm"] = self.lstm
        return g

    def sequence_codes(self, flows):
        B, T = flows.shape[:2]
        codes = self.encoder(flows.flatten(0, 1)).view(B, T, -1)
        return self.lstm(codes) if self.lstm is not None else codes

    def forward(self, batch: Batch) -> dict:
        """Predictions for every target frame ``k = 1 .. L-2`` with sources ``k-1`` and ``k+1``."""
        frames = batch.frames
        B, Lf = frames.shape[:2]
        T = Lf - 2
        seq = self.sequence_codes(batch.flows)
        # target k is conditioned on the code of pair (k-1, k)
        codes = seq[:, :T].flatten(0, 1)
        tgt = frames[:, 1:-1].flatten(0, 1)
        prev = frames[:, :-2].flatten(0, 1)
        nxt = frames[:, 2:].flatten(0, 1)
        disps = self.dispnet(tgt, codes)
        poses, masks = self.posenet(tgt, [prev, nxt])
        K = batch.K.repeat_interleave(T, 0)
        return {"tgt": tgt, "sources": [prev, nxt], "disps": disps, "poses": poses, "masks": masks,
                "K": K, "n_targets": T}

    def single_step_poses(self, out, batch_size):
        """(B, L-1, 6) target->source poses from frame k to k+1, reusing the tuple outputs."""
        poses = out["poses"].view(batch_size, out["n_targets"], 2, 6)
        fwd = poses[:, :, 1]  # k -> k+1 for k = 1 .. L-2
        first = transform_to_pose_vec(invert(pose_vec_to_transform(poses[:, 0, 0]), validate=False))
        return torch.cat([first[:, None], fwd], 1)

    def direct_poses(self, frames, intervals=L.TRAJECTORY_INTERVALS):
        """(B, A, len(intervals), 6) poses predicted straight from frame ``i`` to ``i + t``.

        The backward source slot gets frame ``i - t``, or the target itself when
        that falls before the window.
        """
        B, Lf = frames.shape[:2]
        anchors = L.trajectory_anchors(Lf, intervals)
        tgt, back, fwd = [], [], []
        for a in anchors:
            for t in intervals:
                tgt.append(frames[:, a])
                back.append(frames[:, a - t] if a - t >= 0 else frames[:, a])
                fwd.append(frames[:, a + t])
        stack = lambda xs: torch.stack(xs, 1).flatten(0, 1)  # noqa: E731
        poses, _ = self.posenet(stack(tgt), [stack(back), stack(fwd)])
        return poses[:, 1].view(B, len(anchors), len(intervals), 6)


def synthesis_terms(out, alpha=0.85, n=1):
    """Per-scale photometric, SSIM and mask terms averaged over scales and sources.

    Returns a dict with tensors ``pho``, ``ssim``, ``reg``, ``ap`` and the list of
    full-resolution synthesized views (invalid pixels filled from the target).
    """
    tgt = out["tgt"]
    pho_s, ssim_s, reg_s, ap_s = [], [], [], []
    views = []
    for s in range(N_SCALES):
        disp = out["disps"][s]
        depth = 1.0 / disp
        tgt_s = L.downsample(tgt, s)
        K_s = scale_intrinsics(out["K"], s)
        masks = out["masks"][s] if out["masks"] is not None else None
        pho_j, ssim_j, reg_j = [], [], []
        for j, src in enumerate(out["sources"]):
            warped, valid = inverse_warp(L.downsample(src, s), depth, out["poses"][:, j], K_s)
            m = masks[:, j:j + 1] if masks is not None else None
            pho_j.append(L.photometric_loss(warped, tgt_s, m, valid))
            # out-of-view pixels carry no information; copy the target there
            filled = warped * valid + tgt_s * (1 - valid)
            ssim_j.append(L.ssim_loss(filled, tgt_s))
            reg_j.append(L.bce_to_ones(m) if m is not None else tgt.new_zeros(()))
            if s == 0:
                views.append(filled)
        pho = torch.stack(pho_j).mean()
        ssim = torch.stack(ssim_j).mean()
        reg = torch.stack(reg_j).mean()
        pho_s.append(pho)
        ssim_s.append(ssim)
        reg_s.append(reg)
        ap_s.append(L.appearance_loss(pho, ssim, reg, alpha, n))
    return {
        "pho": torch.stack(pho_s).mean(),
        "ssim": torch.stack(ssim_s).mean(),
        "reg": torch.stack(reg_s).mean(),
        "ap": torch.stack(ap_s).mean(),
        "ap_per_scale": ap_s,
        "views": views,
    }
