"""PNG loading and saving (8-bit grayscale, 0 = contour, 255 = background)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def load_image(path: str | Path) -> np.ndarray:
    """Load a PNG as an H x W float32 array in [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"), dtype=np.float32)
    return arr / 255.0


def save_image(path: str | Path, img: np.ndarray) -> None:
    """Save an H x W array in [0, 1] as 8-bit grayscale."""
    arr = np.asarray(img, dtype=np.float64)
    data = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path)
