import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Pose:
    """Camera position plus heading stored as (cos, sin)."""

    x: float
    y: float
    cos: float
    sin: float

    def __post_init__(self):
        values = (self.x, self.y, self.cos, self.sin)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"Pose components must be finite, got {values}")
        if abs(self.cos * self.cos + self.sin * self.sin - 1.0) > 1e-9:
            raise ValueError(f"Pose orientation ({self.cos}, {self.sin}) is not unit length")

    @classmethod
    def from_heading(cls, x: float, y: float, heading: float) -> "Pose":
        return cls(float(x), float(y), math.cos(heading), math.sin(heading))

    @classmethod
    def from_array(cls, values) -> "Pose":
        # stored poses are single precision, so the orientation is renormalized
        x, y, c, s = (float(v) for v in values)
        norm = math.hypot(c, s)
        if not math.isfinite(norm) or norm == 0:
            raise ValueError(f"Cannot build a pose from {list(values)}")
        return cls(x, y, c / norm, s / norm)

    @property
    def heading(self) -> float:
        return math.atan2(self.sin, self.cos)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def forward(self) -> np.ndarray:
        return np.array([self.cos, self.sin])

    @property
    def right(self) -> np.ndarray:
        # pixel index grows towards this side of the optical axis
        return np.array([self.sin, -self.cos])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.cos, self.sin], dtype=np.float64)
