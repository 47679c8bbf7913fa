"""Binary flow cache format.

Layout (little-endian)::

    b"VOFL" | width: u32 | height: u32 | height*width*2 float32 (u, v per pixel, row-major)
"""

import os
import struct
from pathlib import Path

import numpy as np

from ..errors import ParseError

MAGIC = b"VOFL"
_HEADER = struct.Struct("<4sII")
# guard against absurd headers before allocating
MAX_DIM = 1 << 16


def write_flow(path, flow):
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"flow must be (H, W, 2), got {flow.shape}")
    H, W = flow.shape[:2]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(_HEADER.pack(MAGIC, W, H))
        f.write(np.ascontiguousarray(flow, dtype="<f4").tobytes())
    os.replace(tmp, path)
    return path


def load_precomputed_flow(path):
    """Read a flow file written by :func:`write_flow`; returns float32 (H, W, 2)."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise ParseError("file does not exist", path=path, field="path") from None
    if len(data) < _HEADER.size:
        raise ParseError(f"truncated header ({len(data)} bytes)", path=path, field="header")
    magic, W, H = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ParseError(f"bad magic bytes {magic!r}", path=path, field="magic")
    if W == 0 or W > MAX_DIM:
        raise ParseError(f"width {W} out of range", path=path, field="width")
    if H == 0 or H > MAX_DIM:
        raise ParseError(f"height {H} out of range", path=path, field="height")
    expected = H * W * 2 * 4
    payload = len(data) - _HEADER.size
    if payload != expected:
        raise ParseError(
            f"payload has {payload} bytes, header implies {expected}", path=path, field="data"
        )
    flow = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(H, W, 2)
    return flow.astype(np.float32)
