"""Spatial transformation routing network.

A pose goes through ``world_to_camera`` to give every world cell a code in
camera space; ``world_embedding`` lifts those codes into the shared
embedding space (plus one frustum channel) and ``view_embedding`` does the
same for the view grid coordinates. Their inner products form the relation
matrix used by both routing directions.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from . import tensor as T
from .nn import Mlp
from .pose import Pose
from .tensor import Tensor


def view_cell_codes(*counts: int) -> np.ndarray:
    """Centres of a regular view grid mapped into [-1, 1] per axis.

    Cell ``i`` of ``n`` sits at ``(2i + 1) / n - 1``; for several axes the
    grid is flattened row-major.
    """
    if not counts or any(n <= 0 for n in counts):
        raise ValueError(f"View grid extents must be positive, got {counts}")
    axes = [(2.0 * np.arange(n) + 1.0) / n - 1.0 for n in counts]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


@dataclass
class StrnParams:
    world_to_camera: Mlp
    world_embedding: Mlp
    view_embedding: Mlp
    world_cells: int
    embedding_dim: int
    camera_dim: int
    view_grid: Tuple[int, ...]

    @classmethod
    def initialize(
        cls,
        rng: np.random.Generator,
        *,
        world_cells: int = 256,
        embedding_dim: int = 16,
        camera_dim: int = 2,
        pose_dim: int = 4,
        view_grid: Tuple[int, ...] = (16,),
        camera_hidden: int = 256,
        embedding_hidden: int = 64,
    ) -> "StrnParams":
        view_dim = len(view_grid)
        return cls(
            world_to_camera=Mlp(
                "strn.w2c",
                (pose_dim, camera_hidden, camera_hidden, camera_dim * world_cells),
                rng,
            ),
            world_embedding=Mlp(
                "strn.wce",
                (camera_dim, embedding_hidden, embedding_hidden, embedding_dim + 1),
                rng,
            ),
            view_embedding=Mlp(
                "strn.vce",
                (view_dim, embedding_hidden, embedding_hidden, embedding_dim),
                rng,
            ),
            world_cells=world_cells,
            embedding_dim=embedding_dim,
            camera_dim=camera_dim,
            view_grid=tuple(view_grid),
        )

    @property
    def view_dim(self) -> int:
        return len(self.view_grid)

    @property
    def view_cells(self) -> int:
        return int(np.prod(self.view_grid))

    @property
    def pose_dim(self) -> int:
        return self.world_to_camera.in_features

    def named_parameters(self) -> Dict[str, Tensor]:
        params = {}
        for net in (self.world_to_camera, self.world_embedding, self.view_embedding):
            params.update(net.named_parameters())
        return params


@dataclass
class RoutingBundle:
    relation: Tensor  # (V, K)
    frustum_act: Tensor  # (K,)
    pose: Pose
    view_grid: Tuple[int, ...]
    view_codes: Optional[Tensor] = None  # (V, E), shared by every pose

    @property
    def view_cells(self) -> int:
        return self.relation.shape[0]

    @property
    def world_cells(self) -> int:
        return self.relation.shape[1]

    def view_to_world_distribution(self) -> Tensor:
        """Column k is the distribution of world cell k over the view cells."""
        return T.softmax(self.relation, axis=0)

    def world_to_view_distribution(self) -> Tensor:
        """Row i is the distribution of view cell i over the world cells."""
        return T.softmax(self.relation, axis=1)


def world_cell_embeddings(params: StrnParams, pose: Pose) -> Tuple[Tensor, Tensor]:
    """Per-cell spatial embeddings (K, E) and frustum activations (K,) for a pose."""
    if pose.as_array().shape[0] != params.pose_dim:
        raise ValueError(f"Expected a pose of {params.pose_dim} components")
    v = Tensor(pose.as_array().reshape(1, -1))
    codes = T.reshape(params.world_to_camera(v), (params.world_cells, params.camera_dim))
    out = params.world_embedding(codes)
    embeddings = out[:, : params.embedding_dim]
    frustum_act = T.sigmoid(out[:, params.embedding_dim])
    return embeddings, frustum_act


def view_cell_embeddings(params: StrnParams, codes: np.ndarray) -> Tensor:
    return params.view_embedding(Tensor(codes))


def strn_interpolated_view_codes(params: StrnParams, resolution: int) -> Tensor:
    """View embeddings on a ``resolution`` grid along every view axis."""
    grid = (int(resolution),) * params.view_dim
    return view_cell_embeddings(params, view_cell_codes(*grid))


def strn_forward(
    params: StrnParams, pose: Pose, resolution: Optional[int] = None
) -> RoutingBundle:
    """Relation matrix and frustum activations for ``pose``.

    ``resolution`` routes to a view grid other than the one the model was
    built for; the view embedding is a function of the continuous grid
    coordinate, so any resolution is valid.
    """
    if not np.all(np.isfinite(pose.as_array())):
        raise ValueError(f"Pose {pose} is not finite")
    grid = params.view_grid if resolution is None else (int(resolution),) * params.view_dim
    world, frustum_act = world_cell_embeddings(params, pose)
    view = view_cell_embeddings(params, view_cell_codes(*grid))
    relation = view @ world.T
    return RoutingBundle(relation, frustum_act, pose, grid, view)
