"""Message passing between view cells and world cells."""

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError
from .pose import Pose
from .strn import RoutingBundle, StrnParams, strn_forward, view_cell_codes
from .tensor import Tensor


@dataclass
class ViewCells:
    values: Tensor  # (V, c)
    grid: Tuple[int, ...]

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] != int(np.prod(self.grid)):
            raise ShapeError("ViewCells", self.values.shape, self.grid)

    @property
    def channels(self) -> int:
        return self.values.shape[1]


@dataclass
class WorldCells:
    values: Tensor  # (K, c)

    @property
    def channels(self) -> int:
        return self.values.shape[1]


def _column(vector: Tensor) -> Tensor:
    return T.reshape(vector, (vector.shape[0], 1))


def view_to_world(vc: ViewCells, bundle: RoutingBundle) -> WorldCells:
    """wc_k = act_k * sum_i softmax_i(R[:, k]) vc_i"""
    if vc.values.shape[0] != bundle.view_cells:
        raise ShapeError("view_to_world", vc.values.shape, bundle.relation.shape)
    gathered = bundle.view_to_world_distribution().T @ vc.values
    return WorldCells(gathered * _column(bundle.frustum_act))


def world_to_view(sc: Union[Tensor, WorldCells], bundle: RoutingBundle) -> ViewCells:
    """vc_i = sum_k softmax_k(R[i, :]) act_k sc_k, with the bundle of the query pose."""
    values = sc.values if isinstance(sc, WorldCells) else sc
    if values.ndim != 2 or values.shape[0] != bundle.world_cells:
        raise ShapeError("world_to_view", values.shape, bundle.relation.shape)
    masked = values * _column(bundle.frustum_act)
    return ViewCells(bundle.world_to_view_distribution() @ masked, bundle.view_grid)


@dataclass
class SignalSpread:
    raw: np.ndarray
    normalized: np.ndarray


def propagate_signal(
    signal,
    pose_a: Pose,
    pose_b: Pose,
    params: StrnParams,
    resolution: Optional[int] = None,
) -> SignalSpread:
    """Send a one-channel signal from view A through the world cells into view B.

    ``raw`` keeps the mass that survives both frustum activations;
    ``normalized`` rescales it to sum to one for display.
    """
    signal = np.asarray(signal, dtype=np.float64)
    if np.any(signal < 0):
        raise ConfigError("Routing signals must be non-negative")
    bundle_a = strn_forward(params, pose_a, resolution)
    bundle_b = strn_forward(params, pose_b, resolution)
    vc = ViewCells(Tensor(signal.reshape(-1, 1)), bundle_a.view_grid)
    spread = world_to_view(view_to_world(vc, bundle_a), bundle_b).values.data[:, 0]
    total = spread.sum()
    normalized = spread / total if total > 0 else np.zeros_like(spread)
    return SignalSpread(spread.copy(), normalized)


def gaussian_signal(center: float, sigma: float, cells: int) -> np.ndarray:
    """Bump over the view cell centres, or a one-hot at the nearest cell for sigma 0."""
    if not -1.0 <= center <= 1.0:
        raise ConfigError(f"Signal centre {center} lies outside [-1, 1]")
    if sigma < 0:
        raise ConfigError(f"Signal width must be non-negative, got {sigma}")
    codes = view_cell_codes(cells)[:, 0]
    if sigma == 0:
        signal = np.zeros(cells)
        signal[int(np.argmin(np.abs(codes - center)))] = 1.0
        return signal
    bump = np.exp(-0.5 * ((codes - center) / sigma) ** 2)
    return bump / bump.sum()
