from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np
import pandas as pd

from constants import BACKGROUND, PALETTE, PIXEL_SCALE

_BCE_CLIP = 1e-7


def mae(prediction: np.ndarray, target: np.ndarray) -> float:
    return float(np.mean(np.abs(prediction - target)))


def rmse(prediction: np.ndarray, target: np.ndarray) -> float:
    return float(np.sqrt(np.mean((prediction - target) ** 2)))


def bce(prediction: np.ndarray, target: np.ndarray) -> float:
    p = np.clip(prediction, _BCE_CLIP, 1.0 - _BCE_CLIP)
    return float(np.mean(-(target * np.log(p) + (1.0 - target) * np.log(1.0 - p))))


def image_errors(prediction: np.ndarray, target: np.ndarray) -> Dict[str, float]:
    return {"mae": mae(prediction, target), "rmse": rmse(prediction, target), "bce": bce(prediction, target)}


@dataclass
class MetricSummary:
    per_scene: pd.DataFrame  # one row per scene: scene, mae, rmse, bce
    pooled_rmse: float

    def mean(self, metric: str) -> float:
        return float(self.per_scene[metric].mean())

    def std(self, metric: str) -> float:
        return float(self.per_scene[metric].std(ddof=0))

    def table(self) -> pd.DataFrame:
        """Mean and std per metric in [0, 1] units and in 0-255 pixel units."""
        rows = []
        for metric in ("mae", "rmse", "bce"):
            scale = PIXEL_SCALE if metric != "bce" else 1.0
            rows.append(
                {
                    "metric": metric,
                    "mean": self.mean(metric),
                    "std": self.std(metric),
                    "mean_pixels": self.mean(metric) * scale if metric != "bce" else np.nan,
                    "std_pixels": self.std(metric) * scale if metric != "bce" else np.nan,
                }
            )
        return pd.DataFrame(rows)


def summarize(predictions: Sequence[np.ndarray], targets: Sequence[np.ndarray]) -> MetricSummary:
    rows = []
    for scene, (p, t) in enumerate(zip(predictions, targets)):
        rows.append({"scene": scene, **image_errors(p, t)})
    pooled = rmse(np.stack(predictions), np.stack(targets))
    return MetricSummary(pd.DataFrame(rows, columns=["scene", "mae", "rmse", "bce"]), pooled)


def nearest_palette_labels(image: np.ndarray, tolerance: float = 0.08) -> np.ndarray:
    """Label each pixel with the palette colour whose hue it matches, -1 for background.

    Depth shading scales a colour uniformly, so pixels are compared after
    normalizing their brightness away.
    """
    colors = np.asarray(PALETTE)
    background = np.asarray(BACKGROUND)

    def unit(x):
        norm = np.linalg.norm(x, axis=-1, keepdims=True)
        return x / np.where(norm > 0, norm, 1.0)

    directions = unit(image)
    distance = np.linalg.norm(directions[:, None, :] - unit(colors)[None, :, :], axis=-1)
    labels = np.argmin(distance, axis=1)
    near_background = np.linalg.norm(image - background[None, :], axis=1) < tolerance
    labels[near_background | (distance.min(axis=1) > 2 * tolerance)] = -1
    return labels


def count_color_regions(image: np.ndarray, tolerance: float = 0.08, min_length: int = 2) -> int:
    """Number of contiguous runs of one non-background palette colour.

    Runs shorter than ``min_length`` pixels are treated as noise.
    """
    labels = nearest_palette_labels(np.asarray(image, dtype=np.float64), tolerance)
    regions = 0
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            if labels[start] >= 0 and i - start >= min_length:
                regions += 1
            start = i
    return regions
