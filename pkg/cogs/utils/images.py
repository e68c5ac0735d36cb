"""Strip renders of 1D views as binary (P6) PPM files."""

from typing import Optional, Sequence

import numpy as np
from PIL import Image

from constants import HIGHLIGHT, STRIP_ROWS

from .utils import atomic_write


def to_strip(view: np.ndarray, rows: int = STRIP_ROWS) -> np.ndarray:
    """Replicate a (width, 3) view into a (rows, width, 3) uint8 picture."""
    view = np.clip(np.asarray(view, dtype=np.float64), 0.0, 1.0)
    pixels = np.round(view * 255.0).astype(np.uint8)
    return np.repeat(pixels[None, :, :], rows, axis=0)


def overlay(base: np.ndarray, weights: np.ndarray, color: Sequence[float] = HIGHLIGHT) -> np.ndarray:
    """Blend ``color`` into a (width, 3) view with per-pixel weights in [0, 1]."""
    weights = np.clip(np.asarray(weights, dtype=np.float64), 0.0, 1.0)[:, None]
    return (1.0 - weights) * np.asarray(base, dtype=np.float64) + weights * np.asarray(color)[None, :]


def cells_to_pixels(values: np.ndarray, width: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return np.repeat(values, width // len(values))


def intensity(values: np.ndarray, width: int) -> np.ndarray:
    """Per-pixel weights from per-cell values, scaled so the maximum is 1."""
    pixels = cells_to_pixels(values, width)
    peak = pixels.max() if pixels.size else 0.0
    return pixels / peak if peak > 0 else np.zeros_like(pixels)


def write_ppm(path, view: np.ndarray, rows: int = STRIP_ROWS) -> None:
    picture = Image.fromarray(to_strip(view, rows))
    with atomic_write(path, "wb") as fh:
        picture.save(fh, format="PPM")


def read_ppm(path) -> np.ndarray:
    with Image.open(path) as picture:
        return np.asarray(picture.convert("RGB"))


def signal_strip(values: np.ndarray, width: int, base: Optional[np.ndarray] = None) -> np.ndarray:
    if base is None:
        base = np.full((width, 3), 0.1)
    return overlay(base, intensity(values, width))
