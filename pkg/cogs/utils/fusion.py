"""Fusing world cells from several observations into one scene representation.

Under occupancy concept mapping each world-cell channel is the log
likelihood ratio an observation contributes for a concept. Starting from a
zero log-odds prior, the Bayesian posterior after N observations is the
sigmoid of their sum, which is what :func:`fuse` computes in ``ocm`` mode.
"""

import enum
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import tensor as T
from .errors import ShapeError
from .routing import WorldCells
from .tensor import Tensor


class FusionMode(str, enum.Enum):
    OCM = "ocm"
    SUM = "sum"
    NORM = "norm"


@dataclass
class SceneRepresentation:
    cells: Tensor  # (K, c)
    mode: FusionMode
    observation_count: int
    pre_activation: Tensor  # summed world cells

    @property
    def shape(self):
        return self.cells.shape


def activate(pre_activation: Tensor, mode: FusionMode) -> Tensor:
    mode = FusionMode(mode)
    if mode is FusionMode.OCM:
        return T.sigmoid(pre_activation)
    if mode is FusionMode.NORM:
        return T.l2_normalize_rows(pre_activation)
    return pre_activation


def fuse(
    world_cells_per_obs: Sequence[Union[WorldCells, Tensor]], mode: FusionMode
) -> SceneRepresentation:
    if not world_cells_per_obs:
        raise ValueError("Cannot fuse an empty list of observations")
    values = [w.values if isinstance(w, WorldCells) else w for w in world_cells_per_obs]
    for v in values[1:]:
        if v.shape != values[0].shape:
            raise ShapeError("fuse", values[0].shape, v.shape)
    mode = FusionMode(mode)
    pre = T.stack_sum(values)
    return SceneRepresentation(activate(pre, mode), mode, len(values), pre)


def bayes_update_oracle(log_odds_prior, wc_obs) -> np.ndarray:
    """One Bayesian step in log-odds form: posterior = prior + log likelihood ratio."""
    return np.asarray(log_odds_prior, dtype=np.float64) + np.asarray(wc_obs, dtype=np.float64)


def geometric_mean_check(view_probs, weights) -> float:
    """Weighted geometric mean prod(p_i ** w_i) of interior probabilities."""
    probs = np.asarray(view_probs, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if probs.shape != weights.shape:
        raise ShapeError("geometric_mean_check", probs.shape, weights.shape)
    if np.any(probs <= 0) or np.any(probs >= 1):
        raise ValueError("Probabilities must lie strictly inside (0, 1); log-odds diverge otherwise")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("Weights must be non-negative and sum to 1")
    return float(np.exp(np.dot(weights, np.log(probs))))


def scene_arithmetic(
    a: SceneRepresentation, b: SceneRepresentation, c: SceneRepresentation
) -> SceneRepresentation:
    """A - B + C on the summed world cells, then the mode's activation again."""
    if not a.mode == b.mode == c.mode:
        raise ValueError(
            f"Scene arithmetic needs one fusion mode, got {a.mode.value}, {b.mode.value}, {c.mode.value}"
        )
    if not a.shape == b.shape == c.shape:
        raise ShapeError("scene_arithmetic", a.shape, b.shape, c.shape)
    pre = (a.pre_activation - b.pre_activation) + c.pre_activation
    count = max(1, a.observation_count + c.observation_count)
    return SceneRepresentation(activate(pre, a.mode), a.mode, count, pre)
