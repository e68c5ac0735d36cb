"""Routing inspection: spread of a view-A signal into view B against the epipolar support."""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

import click
import numpy as np
import pandas as pd

from .utils.checkpoint import load_checkpoint
from .utils.checks import check_compatible
from .utils.cli import camera_for, config_option, ensure_dir, load_config, parse_pose
from .utils.dataset import FlatlandDataset, read_dataset
from .utils.errors import ConfigError, ExperimentError
from .utils.flatland import CameraModel, dilate, epipolar_support
from .utils.images import signal_strip, write_ppm
from .utils.model import ModelParams
from .utils.pose import Pose
from .utils.routing import gaussian_signal, propagate_signal
from .utils.utils import write_csv_atomic

log = logging.getLogger(__name__)

ROUTE_COLUMNS = ["cell", "signal", "raw_spread", "normalized_spread", "support"]

_existing_file = click.Path(exists=True, dir_okay=False, path_type=Path)


@dataclass(frozen=True)
class SignalSpec:
    """``pixel:<index>`` for a one-cell signal, ``gaussian:<center>:<sigma>`` for a bump."""

    kind: str
    center: float
    sigma: float = 0.0

    @classmethod
    def parse(cls, text: str, width: int) -> "SignalSpec":
        kind, _, rest = text.partition(":")
        parts = rest.split(":") if rest else []
        try:
            if kind == "pixel" and len(parts) == 1:
                pixel = int(parts[0])
                if not 0 <= pixel < width:
                    raise ConfigError(f"Signal pixel {pixel} lies outside 0..{width - 1}")
                return cls("pixel", (2.0 * pixel + 1.0) / width - 1.0)
            if kind == "gaussian" and len(parts) == 2:
                return cls("gaussian", float(parts[0]), float(parts[1]))
        except ValueError:
            pass
        raise ConfigError(f"Expected a signal like pixel:12 or gaussian:0.2:0.1, got {text!r}")

    def source_pixel(self, width: int) -> int:
        return int(np.clip(math.floor((self.center + 1.0) / 2.0 * width), 0, width - 1))

    def build(self, cells: int) -> np.ndarray:
        return gaussian_signal(self.center, self.sigma, cells)


def _patch_size(camera: CameraModel, cells: int) -> int:
    if cells <= 0 or camera.width % cells:
        raise ExperimentError(f"A {cells}-cell view grid does not tile a {camera.width}-pixel view")
    return camera.width // cells


@dataclass
class RouteViz:
    frame: pd.DataFrame
    paths: Dict[str, Path]


def route_frame(
    params: ModelParams,
    pose_a: Pose,
    pose_b: Pose,
    signal: np.ndarray,
    source_pixel: int,
    camera: CameraModel,
    resolution: Optional[int] = None,
) -> pd.DataFrame:
    """One row per view-B cell: signal, raw and normalized spread, support flag."""
    cells = resolution or params.hyper.view_cells
    patch = _patch_size(camera, cells)
    signal = np.asarray(signal, dtype=np.float64)
    if signal.shape != (cells,):
        raise ExperimentError(f"Signal has {signal.size} cells, the view grid has {cells}")
    spread = propagate_signal(signal, pose_a, pose_b, params.strn, resolution)
    support = epipolar_support(source_pixel, pose_a, pose_b, camera, patch_size=patch)
    return pd.DataFrame(
        {
            "cell": np.arange(cells),
            "signal": signal,
            "raw_spread": spread.raw,
            "normalized_spread": spread.normalized,
            "support": [int(c in support) for c in range(cells)],
        },
        columns=ROUTE_COLUMNS,
    )


def route_viz(
    params: ModelParams,
    pose_a: Pose,
    pose_b: Pose,
    signal: np.ndarray,
    source_pixel: int,
    camera: CameraModel,
    out_dir,
    *,
    resolution: Optional[int] = None,
    view_a: Optional[np.ndarray] = None,
    view_b: Optional[np.ndarray] = None,
) -> RouteViz:
    """Write ``route.csv`` and the ``signal.ppm``/``spread.ppm`` strips to ``out_dir``."""
    frame = route_frame(params, pose_a, pose_b, signal, source_pixel, camera, resolution)
    out_dir = ensure_dir(Path(out_dir))
    paths = {
        "csv": out_dir / "route.csv",
        "signal": out_dir / "signal.ppm",
        "spread": out_dir / "spread.ppm",
    }
    write_csv_atomic(frame, paths["csv"])
    write_ppm(paths["signal"], signal_strip(frame["signal"].to_numpy(), camera.width, view_a))
    write_ppm(paths["spread"], signal_strip(frame["normalized_spread"].to_numpy(), camera.width, view_b))
    return RouteViz(frame, paths)


@dataclass
class EpipolarScore:
    frame: pd.DataFrame  # per sample: scene, view_a, view_b, pixel, score, baseline

    @property
    def mean(self) -> float:
        return float(self.frame["score"].mean())

    @property
    def std(self) -> float:
        return float(self.frame["score"].std(ddof=0))

    @property
    def baseline_mean(self) -> float:
        return float(self.frame["baseline"].mean())


def epipolar_score(
    params: ModelParams,
    dataset: FlatlandDataset,
    camera: CameraModel,
    samples: int = 500,
    dilation: int = 2,
    seed: int = 0,
) -> EpipolarScore:
    """Mean share of spread mass inside the dilated epipolar support.

    Draws (scene, view pair, source pixel) triples; pairs whose support is
    empty (B cannot see the ray at all) are redrawn. ``baseline`` is the
    score a uniform spread would get.
    """
    if samples < 1:
        raise ExperimentError(f"At least one sample is needed, got {samples}")
    if dataset.views_per_scene < 2:
        raise ExperimentError("Epipolar scoring needs two views per scene")
    check_compatible(params.hyper, dataset)
    cells = params.hyper.view_cells
    patch = _patch_size(camera, cells)
    rng = np.random.default_rng(seed)
    rows = []
    attempts = 0
    while len(rows) < samples:
        attempts += 1
        if attempts > 50 * samples:
            raise ExperimentError(f"Only {len(rows)} of {samples} view pairs had a visible epipolar line")
        scene = int(rng.integers(dataset.scene_count))
        view_a, view_b = (int(v) for v in rng.choice(dataset.views_per_scene, size=2, replace=False))
        pixel = int(rng.integers(camera.width))
        pose_a, pose_b = dataset.pose(scene, view_a), dataset.pose(scene, view_b)
        support = epipolar_support(pixel, pose_a, pose_b, camera, patch_size=patch)
        if not support:
            continue
        region = sorted(dilate(support, dilation, cells))
        signal = np.zeros(cells)
        signal[pixel // patch] = 1.0
        spread = propagate_signal(signal, pose_a, pose_b, params.strn)
        rows.append(
            {
                "scene": scene,
                "view_a": view_a,
                "view_b": view_b,
                "pixel": pixel,
                "score": float(spread.normalized[region].sum()),
                "baseline": len(region) / cells,
            }
        )
    log.debug("Scored %d samples in %d draws", samples, attempts)
    return EpipolarScore(pd.DataFrame(rows))


@click.command(name="route-viz")
@config_option
@click.option("--ckpt", "ckpt_path", type=_existing_file, required=True)
@click.option("--pose-a", default=None, help="x,y,heading_degrees")
@click.option("--pose-b", default=None, help="x,y,heading_degrees")
@click.option("--data", "data_path", type=_existing_file, default=None, help="Take poses and views from a dataset.")
@click.option("--scene", type=int, default=0, show_default=True)
@click.option("--views", default="0,1", show_default=True, help="View indices A,B within --scene.")
@click.option("--signal", "signal_text", default="pixel:32", show_default=True)
@click.option("--resolution", type=int, default=None, help="Route through a view grid of this many cells.")
@click.option("--distortion", type=float, default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), required=True)
def route_viz_command(
    config_path, ckpt_path, pose_a, pose_b, data_path, scene, views, signal_text, resolution, distortion, out_dir
):
    """Spread a signal from view A into view B and compare it with the epipolar line."""
    params = load_checkpoint(ckpt_path).params
    camera = camera_for(load_config(config_path, distortion=distortion), params.hyper.width)
    view_a = view_b = None
    if data_path is not None:
        dataset = read_dataset(data_path)
        check_compatible(params.hyper, dataset)
        try:
            a, b = (int(v) for v in views.split(","))
        except ValueError:
            raise ConfigError(f"--views expects two indices like 0,1, got {views!r}") from None
        pose_a, pose_b = dataset.pose(scene, a), dataset.pose(scene, b)
        view_a, view_b = dataset.image(scene, a), dataset.image(scene, b)
    elif pose_a is None or pose_b is None:
        raise ConfigError("Give --pose-a and --pose-b, or --data with --scene and --views")
    else:
        pose_a, pose_b = parse_pose(pose_a), parse_pose(pose_b)

    spec = SignalSpec.parse(signal_text, camera.width)
    cells = resolution or params.hyper.view_cells
    result = route_viz(
        params,
        pose_a,
        pose_b,
        spec.build(cells),
        spec.source_pixel(camera.width),
        camera,
        out_dir,
        resolution=resolution,
        view_a=view_a,
        view_b=view_b,
    )
    inside = result.frame.loc[result.frame["support"] == 1, "normalized_spread"].sum()
    click.echo(f"Spread mass inside the epipolar support: {inside:.3f}")
    for path in result.paths.values():
        click.echo(str(path))


@click.command(name="epipolar-score")
@config_option
@click.option("--ckpt", "ckpt_path", type=_existing_file, required=True)
@click.option("--data", "data_path", type=_existing_file, required=True)
@click.option("--samples", type=int, default=500, show_default=True)
@click.option("--dilation", type=int, default=2, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
def epipolar_score_command(config_path, ckpt_path, data_path, samples, dilation, seed, out_path):
    """Share of routed mass that lands on the epipolar line, against a uniform baseline."""
    dataset = read_dataset(data_path)
    params = load_checkpoint(ckpt_path).params
    camera = camera_for(load_config(config_path), params.hyper.width)
    score = epipolar_score(params, dataset, camera, samples, dilation, seed)
    click.echo(f"epipolar score: {score.mean:.4f} +/- {score.std:.4f}")
    click.echo(f"uniform baseline: {score.baseline_mean:.4f}")
    if out_path is not None:
        write_csv_atomic(score.frame, out_path)


def setup(cli):
    cli.add_command(route_viz_command)
    cli.add_command(epipolar_score_command)
