"""STRD flatland datasets.

Layout, little-endian throughout::

    "STRD" | version u32 | scene_count u32 | views_per_scene u32 | width u32
    | channels u32 | pose_dim u32 | flags u32 (bit 0: metadata present)

then per scene an optional metadata block (object_count u32, then per
object shape_id u32 and 8 float32 params) followed by, per view, pose_dim
float32 pose values and width * channels float32 pixels (pixel-major).
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from constants import DATASET_MAGIC, DATASET_VERSION, IMAGE_CHANNELS, POSE_DIM

from .errors import FormatError
from .flatland import (
    CameraModel,
    FlatlandScene,
    primitive_from_params,
    render_view,
    sample_pose,
    sample_scene,
    sample_scene_triple,
)
from .pose import Pose
from .utils import ByteReader, write_bytes_atomic

log = logging.getLogger(__name__)

_FLAG_METADATA = 1
_HEADER_FIELDS = 7


@dataclass
class FlatlandDataset:
    poses: np.ndarray  # (scenes, views, pose_dim) float32
    images: np.ndarray  # (scenes, views, width, channels) float32
    scenes: Optional[List[FlatlandScene]] = None

    def __post_init__(self):
        self.poses = np.asarray(self.poses, dtype="<f4")
        self.images = np.asarray(self.images, dtype="<f4")
        if self.poses.ndim != 3 or self.images.ndim != 4 or self.poses.shape[:2] != self.images.shape[:2]:
            raise FormatError(
                "Pose and image arrays disagree", expected=self.poses.shape[:2], found=self.images.shape[:2]
            )
        if self.scenes is not None and len(self.scenes) != self.scene_count:
            raise FormatError("Scene metadata count", expected=self.scene_count, found=len(self.scenes))

    @property
    def scene_count(self) -> int:
        return self.poses.shape[0]

    @property
    def views_per_scene(self) -> int:
        return self.poses.shape[1]

    @property
    def width(self) -> int:
        return self.images.shape[2]

    @property
    def channels(self) -> int:
        return self.images.shape[3]

    @property
    def pose_dim(self) -> int:
        return self.poses.shape[2]

    @property
    def has_metadata(self) -> bool:
        return self.scenes is not None

    def pose(self, scene: int, view: int) -> Pose:
        return Pose.from_array(self.poses[scene, view])

    def image(self, scene: int, view: int) -> np.ndarray:
        return self.images[scene, view].astype(np.float64)

    def views(self, scene: int, indices: Sequence[int]) -> List[Tuple[np.ndarray, Pose]]:
        return [(self.image(scene, v), self.pose(scene, v)) for v in indices]

    def subset(self, scenes: Sequence[int]) -> "FlatlandDataset":
        idx = list(scenes)
        meta = [self.scenes[i] for i in idx] if self.scenes is not None else None
        return FlatlandDataset(self.poses[idx], self.images[idx], meta)


def encode_dataset(dataset: FlatlandDataset) -> bytes:
    flags = _FLAG_METADATA if dataset.has_metadata else 0
    header = np.array(
        [
            DATASET_VERSION,
            dataset.scene_count,
            dataset.views_per_scene,
            dataset.width,
            dataset.channels,
            dataset.pose_dim,
            flags,
        ],
        dtype="<u4",
    )
    chunks = [DATASET_MAGIC, header.tobytes()]
    for s in range(dataset.scene_count):
        if dataset.has_metadata:
            objects = dataset.scenes[s].objects
            chunks.append(np.array([len(objects)], dtype="<u4").tobytes())
            for obj in objects:
                chunks.append(np.array([obj.shape_id], dtype="<u4").tobytes())
                chunks.append(np.array(obj.params(), dtype="<f4").tobytes())
        for v in range(dataset.views_per_scene):
            chunks.append(dataset.poses[s, v].tobytes())
            chunks.append(dataset.images[s, v].tobytes())
    return b"".join(chunks)


def decode_dataset(payload: bytes) -> FlatlandDataset:
    reader = ByteReader(payload, "STRD dataset")
    magic = reader.raw(4)
    if magic != DATASET_MAGIC:
        raise FormatError("Not an STRD dataset", expected=DATASET_MAGIC, found=magic)
    version, scenes, views, width, channels, pose_dim, flags = (
        int(v) for v in reader.take("<u4", _HEADER_FIELDS)
    )
    if version != DATASET_VERSION:
        raise FormatError("Unsupported STRD version", expected=DATASET_VERSION, found=version)

    poses = np.empty((scenes, views, pose_dim), dtype="<f4")
    images = np.empty((scenes, views, width, channels), dtype="<f4")
    metadata = [] if flags & _FLAG_METADATA else None
    for s in range(scenes):
        if metadata is not None:
            count = int(reader.take("<u4", 1)[0])
            objects = []
            for _ in range(count):
                shape_id = int(reader.take("<u4", 1)[0])
                objects.append(primitive_from_params(shape_id, reader.take("<f4", 8)))
            metadata.append(FlatlandScene(tuple(objects)))
        for v in range(views):
            poses[s, v] = reader.take("<f4", pose_dim)
            images[s, v] = reader.take("<f4", width * channels).reshape(width, channels)
    reader.finish()
    return FlatlandDataset(poses, images, metadata)


def write_dataset(dataset: FlatlandDataset, path) -> None:
    write_bytes_atomic(path, encode_dataset(dataset))
    log.info("Wrote %d scenes x %d views to %s", dataset.scene_count, dataset.views_per_scene, path)


def read_dataset(path) -> FlatlandDataset:
    with open(path, "rb") as fh:
        return decode_dataset(fh.read())


def _as_stored(scene: FlatlandScene) -> FlatlandScene:
    # round object parameters through float32 so rendering and metadata agree
    objects = tuple(
        primitive_from_params(o.shape_id, np.array(o.params(), dtype="<f4")) for o in scene.objects
    )
    return FlatlandScene(objects, scene.background, scene.arena)


def _render_scene(scene: FlatlandScene, camera: CameraModel, seed, views: int):
    rng = np.random.default_rng(seed)
    poses = np.empty((views, POSE_DIM), dtype="<f4")
    images = np.empty((views, camera.width, IMAGE_CHANNELS), dtype="<f4")
    for v in range(views):
        pose = sample_pose(rng, scene)
        poses[v] = pose.as_array()
        images[v] = render_view(scene, camera, Pose.from_array(poses[v]))
    return poses, images


def make_dataset(config, seed: Optional[int] = None, *, paired: bool = False) -> FlatlandDataset:
    """Sample scenes and render ``views_per_scene`` views of each.

    Every scene draws from its own child of one seed sequence, so scene ``i``
    does not depend on how many scenes come before it. With ``paired`` the
    scenes come in (A, B, C) triples for scene arithmetic.
    """
    seed = config.seed if seed is None else seed
    camera = config.camera()
    count = config.scenes
    if paired:
        count -= count % 3
        if count == 0:
            raise FormatError("Paired datasets need at least three scenes", expected=">= 3", found=config.scenes)
    children = np.random.SeedSequence(seed).spawn(count)

    scenes: List[FlatlandScene] = []
    if paired:
        for t in range(0, count, 3):
            triple = sample_scene_triple(children[t].generate_state(2), config.object_range)
            scenes.extend(_as_stored(s) for s in triple)
    else:
        for child in children:
            scene = sample_scene(child.generate_state(2), config.object_range, wall_count=config.walls)
            scenes.append(_as_stored(scene))

    poses = np.empty((count, config.views_per_scene, POSE_DIM), dtype="<f4")
    images = np.empty((count, config.views_per_scene, camera.width, IMAGE_CHANNELS), dtype="<f4")
    for i, (scene, child) in enumerate(zip(scenes, children)):
        poses[i], images[i] = _render_scene(scene, camera, child.spawn(1)[0], config.views_per_scene)
        if (i + 1) % 500 == 0:
            log.info("Rendered %d/%d scenes", i + 1, count)
    return FlatlandDataset(poses, images, scenes)
