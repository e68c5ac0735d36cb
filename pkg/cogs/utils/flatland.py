"""Flatland: a 2D world of circles and walls seen through 1D pinhole cameras.

Rendering is exact ray casting, so the geometry of a view is known in
closed form. :func:`epipolar_support` uses that to say where a pixel's ray
can appear in a second view, which grades the routing the model learns.
"""

import logging
import math
from dataclasses import dataclass
from typing import FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np

from constants import (
    ARENA_HALF_SIZE,
    BACKGROUND,
    DEPTH_SHADING,
    PALETTE,
    POSE_MARGIN,
    REJECTION_BUDGET,
)

from .errors import FlatlandError
from .pose import Pose

log = logging.getLogger(__name__)

Color = Tuple[float, float, float]
_EPS = 1e-9


@dataclass(frozen=True)
class Circle:
    x: float
    y: float
    radius: float
    color: Color

    shape_id = 0

    def __post_init__(self):
        if self.radius <= 0:
            raise FlatlandError(f"Circle radius must be positive, got {self.radius}")

    def params(self) -> Tuple[float, ...]:
        return (self.x, self.y, self.radius, *self.color, 0.0, 0.0)

    def overlaps(self, other: "Circle", gap: float = 0.0) -> bool:
        return math.hypot(self.x - other.x, self.y - other.y) < self.radius + other.radius + gap

    def intersect(self, origin: np.ndarray, directions: np.ndarray) -> np.ndarray:
        """Distance along each unit ray to the first hit, inf on a miss."""
        oc = origin - np.array([self.x, self.y])
        b = directions @ oc
        disc = b * b - (oc @ oc - self.radius**2)
        root = np.sqrt(np.maximum(disc, 0.0))
        near = -b - root
        far = -b + root
        t = np.where(near > _EPS, near, far)
        return np.where((disc >= 0) & (t > _EPS), t, np.inf)


@dataclass(frozen=True)
class Segment:
    x0: float
    y0: float
    x1: float
    y1: float
    color: Color

    shape_id = 1

    def params(self) -> Tuple[float, ...]:
        return (self.x0, self.y0, self.x1, self.y1, *self.color, 0.0)

    @property
    def ends(self) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        return (self.x0, self.y0), (self.x1, self.y1)

    def distance_to(self, point) -> float:
        p0 = np.array([self.x0, self.y0])
        edge = np.array([self.x1, self.y1]) - p0
        offset = np.asarray(point, dtype=np.float64) - p0
        s = float(np.clip(offset @ edge / max(edge @ edge, _EPS), 0.0, 1.0))
        return float(np.hypot(*(offset - s * edge)))

    def crosses(self, other: "Segment") -> bool:
        def side(p, q, r):
            return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

        a0, a1 = self.ends
        b0, b1 = other.ends
        return side(a0, a1, b0) * side(a0, a1, b1) < 0 and side(b0, b1, a0) * side(b0, b1, a1) < 0

    def intersect(self, origin: np.ndarray, directions: np.ndarray) -> np.ndarray:
        p0 = np.array([self.x0, self.y0])
        edge = np.array([self.x1, self.y1]) - p0
        offset = p0 - origin
        denom = directions[:, 0] * edge[1] - directions[:, 1] * edge[0]
        safe = np.where(np.abs(denom) > 1e-12, denom, 1.0)
        t = (offset[0] * edge[1] - offset[1] * edge[0]) / safe
        s = (offset[0] * directions[:, 1] - offset[1] * directions[:, 0]) / safe
        hit = (np.abs(denom) > 1e-12) & (t > _EPS) & (s >= 0) & (s <= 1)
        return np.where(hit, t, np.inf)


Primitive = Union[Circle, Segment]


def primitive_from_params(shape_id: int, params: Sequence[float]) -> Primitive:
    p = [float(v) for v in params]
    if shape_id == Circle.shape_id:
        return Circle(p[0], p[1], p[2], (p[3], p[4], p[5]))
    if shape_id == Segment.shape_id:
        return Segment(p[0], p[1], p[2], p[3], (p[4], p[5], p[6]))
    raise FlatlandError(f"Unknown primitive shape id {shape_id}")


@dataclass(frozen=True)
class FlatlandScene:
    objects: Tuple[Primitive, ...] = ()
    background: Color = BACKGROUND
    arena: float = ARENA_HALF_SIZE  # half side of the bounding square

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        for obj in self.objects:
            if not all(0.0 <= c <= 1.0 for c in obj.color):
                raise FlatlandError(f"Colour {obj.color} lies outside [0, 1]")
            if isinstance(obj, Circle):
                limit = self.arena + 1e-6
                inside = abs(obj.x) + obj.radius <= limit and abs(obj.y) + obj.radius <= limit
            else:
                inside = all(abs(v) <= self.arena + 1e-6 for v in (obj.x0, obj.y0, obj.x1, obj.y1))
            if not inside:
                raise FlatlandError(f"{obj} does not fit inside the arena of half size {self.arena}")

    @property
    def diagonal(self) -> float:
        return 2.0 * math.sqrt(2.0) * self.arena

    def contains_point(self, point, clearance: float = 0.0) -> bool:
        """True when ``point`` lies inside (or within ``clearance`` of) a circle, or within ``clearance`` of a wall."""
        px, py = point
        for o in self.objects:
            if isinstance(o, Circle):
                if math.hypot(px - o.x, py - o.y) < o.radius + clearance:
                    return True
            elif o.distance_to((px, py)) < clearance:
                return True
        return False


@dataclass(frozen=True)
class CameraModel:
    fov: float = math.pi / 2
    width: int = 64
    kappa: float = 0.0

    def __post_init__(self):
        if not 0 < self.fov < math.pi:
            raise FlatlandError(f"Field of view must lie in (0, pi), got {self.fov}")
        if self.width <= 0:
            raise FlatlandError(f"Image width must be positive, got {self.width}")
        if self.kappa < 0:
            raise FlatlandError(f"Distortion must be non-negative, got {self.kappa}")

    @property
    def half_tan(self) -> float:
        return math.tan(self.fov / 2)

    def pixel_coords(self) -> np.ndarray:
        return (2.0 * np.arange(self.width) + 1.0) / self.width - 1.0

    def plane_offsets(self, u: np.ndarray) -> np.ndarray:
        """Distorted image-plane offsets s' = u tan(fov/2) (1 + kappa u^2)."""
        return u * self.half_tan * (1.0 + self.kappa * u * u)

    def undistort(self, offsets: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`plane_offsets`: normalized coordinate u for each offset."""
        a = np.asarray(offsets, dtype=np.float64) / self.half_tan
        if self.kappa == 0:
            return a
        # kappa u^3 + u - a = 0 has exactly one real root since it is monotone
        p = 1.0 / (3.0 * self.kappa)
        q = a / (2.0 * self.kappa)
        root = np.sqrt(q * q + p**3)
        return np.cbrt(q + root) + np.cbrt(q - root)

    def ray_directions(self, pose: Pose, u: Optional[np.ndarray] = None) -> np.ndarray:
        u = self.pixel_coords() if u is None else np.asarray(u, dtype=np.float64)
        s = self.plane_offsets(u)
        dirs = pose.forward[None, :] + s[:, None] * pose.right[None, :]
        return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)

    def project(self, points: np.ndarray, pose: Pose) -> Tuple[np.ndarray, np.ndarray]:
        """Normalized image coordinate of each point and whether it is in view."""
        rel = np.atleast_2d(points) - pose.position[None, :]
        depth = rel @ pose.forward
        lateral = rel @ pose.right
        in_front = depth > _EPS
        u = self.undistort(np.where(in_front, lateral / np.where(in_front, depth, 1.0), 0.0))
        return u, in_front & (np.abs(u) <= 1.0)

    def pixel_of(self, u: np.ndarray) -> np.ndarray:
        return np.clip(np.floor((u + 1.0) / 2.0 * self.width), 0, self.width - 1).astype(int)


def render_view(scene: FlatlandScene, camera: CameraModel, pose: Pose) -> np.ndarray:
    """Ray-cast one (width, 3) view; nearest hit wins, shaded by planar depth."""
    dirs = camera.ray_directions(pose)
    origin = pose.position
    image = np.tile(np.asarray(scene.background, dtype=np.float64), (camera.width, 1))
    nearest = np.full(camera.width, np.inf)
    for obj in scene.objects:
        t = obj.intersect(origin, dirs)
        closer = t < nearest
        if not np.any(closer):
            continue
        nearest = np.where(closer, t, nearest)
        depth = t[closer] * (dirs[closer] @ pose.forward)
        shade = 1.0 / (1.0 + DEPTH_SHADING * depth)
        image[closer] = np.asarray(obj.color)[None, :] * shade[:, None]
    return np.clip(image, 0.0, 1.0)


def epipolar_support(
    pixel: int,
    pose_a: Pose,
    pose_b: Pose,
    camera: CameraModel,
    *,
    patch_size: int = 4,
    arena: float = ARENA_HALF_SIZE,
    samples: int = 4096,
) -> FrozenSet[int]:
    """View cells of view B that pixel ``pixel`` of view A can project onto."""
    u = camera.pixel_coords()[pixel]
    direction = camera.ray_directions(pose_a, np.array([u]))[0]
    diagonal = 2.0 * math.sqrt(2.0) * arena
    depths = np.linspace(diagonal / samples, diagonal, samples)
    points = pose_a.position[None, :] + depths[:, None] * direction[None, :]
    coords, visible = camera.project(points, pose_b)
    if not np.any(visible):
        return frozenset()
    cells = camera.pixel_of(coords[visible]) // patch_size
    return frozenset(int(c) for c in np.unique(cells))


def dilate(cells: FrozenSet[int], radius: int, view_cells: int) -> FrozenSet[int]:
    grown = set()
    for c in cells:
        grown.update(range(max(0, c - radius), min(view_cells, c + radius + 1)))
    return frozenset(grown)


def _pick_colors(rng: np.random.Generator, count: int) -> List[Color]:
    replace = count > len(PALETTE)
    picks = rng.choice(len(PALETTE), size=count, replace=replace)
    return [PALETTE[int(i)] for i in picks]


def _place_circle(
    rng: np.random.Generator,
    placed: Sequence[Circle],
    color: Color,
    budget: List[int],
    radius_range: Tuple[float, float],
    arena: float,
) -> Circle:
    while budget[0] > 0:
        budget[0] -= 1
        radius = float(rng.uniform(*radius_range))
        limit = arena - radius
        candidate = Circle(
            float(rng.uniform(-limit, limit)), float(rng.uniform(-limit, limit)), radius, color
        )
        if not any(candidate.overlaps(other, gap=0.05) for other in placed):
            return candidate
        log.debug("Rejected %s, %d attempts left", candidate, budget[0])
    raise FlatlandError(f"Rejection budget of {REJECTION_BUDGET} attempts exhausted")


def _wall_clears(wall: Segment, other: Primitive, gap: float) -> bool:
    if isinstance(other, Circle):
        return wall.distance_to((other.x, other.y)) >= other.radius + gap
    if wall.crosses(other):
        return False
    ends = [(wall, p) for p in other.ends] + [(other, p) for p in wall.ends]
    return min(seg.distance_to(p) for seg, p in ends) >= gap


def _place_wall(
    rng: np.random.Generator,
    placed: Sequence[Primitive],
    color: Color,
    budget: List[int],
    length_range: Tuple[float, float],
    arena: float,
) -> Segment:
    while budget[0] > 0:
        budget[0] -= 1
        length = float(rng.uniform(*length_range))
        angle = float(rng.uniform(0.0, math.pi))
        x0, y0 = (float(v) for v in rng.uniform(-arena, arena, size=2))
        x1, y1 = x0 + length * math.cos(angle), y0 + length * math.sin(angle)
        if abs(x1) > arena or abs(y1) > arena:
            continue
        candidate = Segment(x0, y0, x1, y1, color)
        if all(_wall_clears(candidate, other, gap=0.05) for other in placed):
            return candidate
        log.debug("Rejected %s, %d attempts left", candidate, budget[0])
    raise FlatlandError(f"Rejection budget of {REJECTION_BUDGET} attempts exhausted placing a wall")


def sample_scene(
    rng_seed,
    object_count_range: Tuple[int, int] = (2, 2),
    *,
    wall_count: int = 0,
    radius_range: Tuple[float, float] = (0.1, 0.25),
    wall_length_range: Tuple[float, float] = (0.3, 0.8),
    arena: float = ARENA_HALF_SIZE,
) -> FlatlandScene:
    """Non-overlapping circles with palette colours, then ``wall_count`` walls, fixed by ``rng_seed``.

    Walls are drawn after every circle, so adding walls leaves the circles of
    a seed where they were. Circles and walls share one rejection budget.
    """
    lo, hi = object_count_range
    if lo < 0 or hi < lo:
        raise FlatlandError(f"Object count range {lo}..{hi} is empty")
    if wall_count < 0:
        raise FlatlandError(f"Wall count must be non-negative, got {wall_count}")
    rng = np.random.default_rng(rng_seed)
    count = int(rng.integers(lo, hi + 1))
    budget = [REJECTION_BUDGET]
    placed: List[Primitive] = []
    for color in _pick_colors(rng, count):
        placed.append(_place_circle(rng, placed, color, budget, radius_range, arena))
    if wall_count:
        for color in _pick_colors(rng, wall_count):
            placed.append(_place_wall(rng, placed, color, budget, wall_length_range, arena))
    return FlatlandScene(tuple(placed), arena=arena)


def sample_scene_triple(
    rng_seed,
    object_count_range: Tuple[int, int] = (2, 2),
    *,
    radius_range: Tuple[float, float] = (0.1, 0.25),
    arena: float = ARENA_HALF_SIZE,
) -> Tuple[FlatlandScene, FlatlandScene, FlatlandScene]:
    """Scenes (A, B, C) with B = one object of A and C = one new object.

    The composite A - B + C is then well defined: A without B's object, plus C's.
    """
    lo, hi = object_count_range
    a = sample_scene(rng_seed, (max(lo, 2), max(hi, 2)), radius_range=radius_range, arena=arena)
    rng = np.random.default_rng([*np.atleast_1d(rng_seed), 1])
    shared = a.objects[int(rng.integers(len(a.objects)))]
    kept = [o for o in a.objects if o is not shared]
    used = {o.color for o in a.objects}
    fresh = [c for c in PALETTE if c not in used] or list(PALETTE)
    color = fresh[int(rng.integers(len(fresh)))]
    extra = _place_circle(rng, kept, color, [REJECTION_BUDGET], radius_range, arena)
    b = FlatlandScene((shared,), arena=arena)
    c = FlatlandScene((extra,), arena=arena)
    return a, b, c


def composite_scene(a: FlatlandScene, b: FlatlandScene, c: FlatlandScene) -> FlatlandScene:
    """Ground truth for A - B + C: A's objects not in B plus C's objects not in B."""
    missing = [o for o in b.objects if o not in a.objects]
    if missing:
        raise FlatlandError(
            "Scene B has objects that scene A does not contain, so A - B + C is undefined; "
            "generate paired scenes with --paired"
        )
    objects = [o for o in a.objects if o not in b.objects]
    objects += [o for o in c.objects if o not in b.objects]
    return FlatlandScene(tuple(objects), a.background, a.arena)


def sample_pose(
    rng: np.random.Generator,
    scene: FlatlandScene,
    margin: float = POSE_MARGIN,
) -> Pose:
    """Uniform position away from the walls and outside every object, uniform heading."""
    limit = scene.arena - margin
    for _ in range(REJECTION_BUDGET):
        x, y = rng.uniform(-limit, limit, size=2)
        heading = rng.uniform(-math.pi, math.pi)
        if not scene.contains_point((x, y), clearance=margin / 2):
            return Pose.from_heading(float(x), float(y), float(heading))
    raise FlatlandError(f"Rejection budget of {REJECTION_BUDGET} attempts exhausted placing a camera")
