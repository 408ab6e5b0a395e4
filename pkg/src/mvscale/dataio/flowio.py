"""Middlebury .flo optical flow files.

Layout, all little-endian: float32 magic 202021.25, int32 width, int32
height, then height*width*2 float32 values interleaved (u, v) row-major.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import DataError

FLOW_MAGIC = 202021.25


def write_flow(path, flow: np.ndarray) -> None:
    """Write an (H, W, 2) float32 flow field."""
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise DataError(f"flow must have shape (H, W, 2), got {flow.shape}")
    h, w = flow.shape[:2]
    with open(path, "wb") as fh:
        fh.write(struct.pack("<fii", FLOW_MAGIC, w, h))
        fh.write(flow.astype("<f4", copy=False).tobytes())


def read_flow(path) -> np.ndarray:
    """Read a .flo file into an (H, W, 2) float32 array."""
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise DataError(f"flow file too short: {len(data)} bytes, need >= 12")
    magic, w, h = struct.unpack("<fii", data[:12])
    if magic != np.float32(FLOW_MAGIC):
        raise DataError(f"bad flow magic {magic!r}, expected {FLOW_MAGIC}")
    if w < 1 or h < 1:
        raise DataError(f"bad flow dimensions {w}x{h}")
    expected = 12 + w * h * 2 * 4
    if len(data) != expected:
        raise DataError(
            f"truncated flow payload: expected {expected} bytes, got {len(data)}"
        )
    arr = np.frombuffer(data, dtype="<f4", offset=12)
    return arr.reshape(h, w, 2).copy()
