"""PFM depth maps (grayscale "Pf" variant only).

Header: b"Pf\\n", b"{width} {height}\\n", b"{scale}\\n". A negative scale
marks little-endian payload. Rows are stored bottom-to-top.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import DataError

_MAX_DIM = 1 << 20  # dimension sanity bound


def write_pfm(path, grid: np.ndarray) -> None:
    """Write a (H, W) float32 grid as little-endian PFM (scale -1)."""
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise DataError(f"PFM grid must be 2-D, got shape {grid.shape}")
    h, w = grid.shape
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{w} {h}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(grid[::-1].astype("<f4", copy=False).tobytes())


def _read_token(data: bytes, pos: int):
    while pos < len(data) and data[pos : pos + 1].isspace():
        pos += 1
    start = pos
    while pos < len(data) and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise DataError(f"PFM header truncated at byte {start}")
    return data[start:pos], pos


def read_pfm(path) -> np.ndarray:
    """Read a grayscale PFM file into an (H, W) float32 array, top row first."""
    data = Path(path).read_bytes()
    tok, pos = _read_token(data, 0)
    if tok != b"Pf":
        raise DataError(f"bad PFM header {tok!r}, expected b'Pf'")
    wtok, pos = _read_token(data, pos)
    htok, pos = _read_token(data, pos)
    stok, pos = _read_token(data, pos)
    try:
        w, h = int(wtok), int(htok)
        scale = float(stok)
    except ValueError as exc:
        raise DataError(f"bad PFM dimensions/scale: {exc}") from None
    if not (1 <= w <= _MAX_DIM and 1 <= h <= _MAX_DIM):
        raise DataError(f"PFM dimensions out of range: {w}x{h}")
    if scale == 0.0:
        raise DataError("PFM scale must be nonzero")
    pos += 1  # single whitespace byte after the scale line
    expected = w * h * 4
    payload = data[pos : pos + expected]
    if len(payload) != expected:
        raise DataError(
            f"truncated PFM payload: expected {expected} bytes, got {len(payload)}"
        )
    dtype = "<f4" if scale < 0 else ">f4"
    arr = np.frombuffer(payload, dtype=dtype).reshape(h, w)
    return arr[::-1].astype(np.float32)
