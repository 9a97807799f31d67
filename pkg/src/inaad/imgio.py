"""8-bit grayscale image files <-> float arrays in [-1, 1].

The uint8 mapping is v/127.5 - 1 on load and round((x+1)*127.5) on save,
so 0 maps to -1 and 255 maps to +1 exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

__all__ = ["save_image", "load_image", "save_mask", "load_mask"]


def save_image(path: str | Path, img: np.ndarray) -> None:
    img = np.asarray(img, dtype=np.float64)
    u8 = np.rint(np.clip((img + 1.0) * 127.5, 0.0, 255.0)).astype(np.uint8)
    Image.fromarray(u8, mode="L").save(path)


def load_image(path: str | Path) -> np.ndarray:
    u8 = np.asarray(Image.open(path).convert("L"), dtype=np.float64)
    return u8 / 127.5 - 1.0


def save_mask(path: str | Path, mask: np.ndarray) -> None:
    """Binary mask as {0, 255} 8-bit grayscale."""
    mask = np.asarray(mask)
    if not np.all((mask == 0) | (mask == 1)):
        raise ValueError("mask must be binary")
    Image.fromarray((mask * 255).astype(np.uint8), mode="L").save(path)


def load_mask(path: str | Path) -> np.ndarray:
    u8 = np.asarray(Image.open(path).convert("L"))
    return (u8 >= 128).astype(np.float64)
