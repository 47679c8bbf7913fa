"""Trainable networks: flow encoder, sequence LSTM, disparity, pose/mask, discriminators."""

from .checkpoint import FORMAT_VERSION, load_checkpoint, read_checkpoint, save_checkpoint
from .depth_pose import DispNet, PoseExpNet
from .discriminators import PatchDiscriminator, WGANCritic, receptive_field
from .sequence import FlowEncoder, SequenceLSTM

__all__ = [
    "DispNet",
    "FORMAT_VERSION",
    "FlowEncoder",
    "PatchDiscriminator",
    "PoseExpNet",
    "SequenceLSTM",
    "WGANCritic",
    "load_checkpoint",
    "read_checkpoint",
    "receptive_field",
    "save_checkpoint",
]
