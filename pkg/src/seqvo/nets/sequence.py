"""Flow encoder and the recurrent sequence model that turns flow codes into sequence codes."""

import torch
import torch.nn as nn

from .blocks import check_channels, down_block, xavier_init

ENCODER_CHANNELS = (16, 32, 64, 128, 128, 128)
ENCODER_KERNELS = (7, 5, 3, 3, 3, 3)


class FlowEncoder(nn.Module):
    """Six down-sampling blocks and a global average pool: (B, 2, H, W) -> (B, 128)."""

    def __init__(self, channels=ENCODER_CHANNELS, kernels=ENCODER_KERNELS):
        super().__init__()
        layers = []
        in_planes = 2
        for out_planes, k in zip(channels, kernels):
            layers.append(down_block(in_planes, out_planes, k))
            in_planes = out_planes
        self.blocks = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.code_dim = in_planes
        xavier_init(self)

    def features(self, x):
        check_channels(x, 2, "FlowEncoder")
        return self.blocks(x)

    def forward(self, x):
        return self.pool(self.features(x)).flatten(1)


LSTMState = tuple  # (h, c), each (B, hidden)


class SequenceLSTM(nn.Module):
    """Single-layer LSTM over per-pair flow codes; its hidden state is the sequence code."""

    def __init__(self, input_dim=128, hidden_dim=128):
        super().__init__()
        self.cell = nn.LSTMCell(input_dim, hidden_dim)
        self.hidden_dim = hidden_dim

    def initial_state(self, batch, dtype=torch.float32, device=None) -> LSTMState:
        z = torch.zeros(batch, self.hidden_dim, dtype=dtype, device=device)
        return z, z.clone()

    def sequence_update(self, state: LSTMState, code):
        h, c = self.cell(code, state)
        return (h, c), h

    def forward(self, codes, state=None):
        """``codes`` is (B, T, D); returns the hidden states (B, T, hidden)."""
        B, T, _ = codes.shape
        if state is None:
            state = self.initial_state(B, codes.dtype, codes.device)
        outs = []
        for t in range(T):
            state, h = self.sequence_update(state, codes[:, t])
            outs.append(h)
        return torch.stack(outs, 1)
