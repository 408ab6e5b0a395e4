"""8/16-bit grayscale PNG via Pillow."""

from __future__ import annotations

import numpy as np
from PIL import Image

from ..errors import DataError


def write_gray_png(path, img: np.ndarray) -> None:
    """Write a uint8 or uint16 2-D array as grayscale PNG."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise DataError(f"grayscale image must be 2-D, got shape {img.shape}")
    if img.dtype not in (np.uint8, np.uint16):
        raise DataError(f"unsupported image dtype {img.dtype}, want uint8 or uint16")
    # Pillow picks L for uint8 and I;16 for uint16 on its own
    Image.fromarray(img).save(path, format="PNG")


def read_gray_png(path) -> np.ndarray:
    """Read a grayscale PNG into uint8 or uint16 depending on bit depth."""
    with Image.open(path) as im:
        if im.mode == "L":
            return np.asarray(im, dtype=np.uint8)
        if im.mode in ("I;16", "I;16B", "I"):
            return np.asarray(im, dtype=np.uint16)
        raise DataError(f"unsupported PNG mode {im.mode!r}, want 8/16-bit grayscale")


def to_uint8(values: np.ndarray, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Quantize floats in [lo, hi] to uint8 with clipping."""
    x = (np.asarray(values, dtype=float) - lo) / (hi - lo)
    return np.clip(np.rint(x * 255.0), 0, 255).astype(np.uint8)
