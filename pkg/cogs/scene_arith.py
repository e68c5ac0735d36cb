"""Scene arithmetic in representation space."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import click
import numpy as np
import pandas as pd

from .utils.checkpoint import load_checkpoint
from .utils.checks import check_compatible, require_metadata
from .utils.cli import camera_for, config_option, ensure_dir, load_config, parse_ints
from .utils.dataset import FlatlandDataset, read_dataset
from .utils.errors import ConfigError, ExperimentError, FlatlandError
from .utils.flatland import CameraModel, composite_scene, render_view
from .utils.fusion import scene_arithmetic
from .utils.images import write_ppm
from .utils.model import ModelParams, render, represent
from .utils.utils import write_csv_atomic

log = logging.getLogger(__name__)

_existing_file = click.Path(exists=True, dir_okay=False, path_type=Path)


@dataclass
class ArithResult:
    rendered: np.ndarray
    composite_truth: np.ndarray
    scene_a_truth: np.ndarray
    paths: Dict[str, Path] = field(default_factory=dict)

    @property
    def mse_composite(self) -> float:
        return float(np.mean((self.rendered - self.composite_truth) ** 2))

    @property
    def mse_a(self) -> float:
        return float(np.mean((self.rendered - self.scene_a_truth) ** 2))


def _observed_views(dataset: FlatlandDataset, query_view: int, obs_count: int):
    views = [v for v in range(dataset.views_per_scene) if v != query_view][:obs_count]
    if len(views) < obs_count or obs_count < 1:
        raise ExperimentError(f"Cannot take {obs_count} observations besides query view {query_view}")
    return views


def scene_arith_experiment(
    params: ModelParams,
    dataset: FlatlandDataset,
    a: int,
    b: int,
    c: int,
    query_view: int,
    camera: CameraModel,
    out_dir=None,
    obs_count: int = 3,
) -> ArithResult:
    """Render rep(A) - rep(B) + rep(C) at A's query pose and compare it with the composite scene."""
    require_metadata(dataset, "Scene arithmetic")
    check_compatible(params.hyper, dataset)
    for index in (a, b, c):
        if not 0 <= index < dataset.scene_count:
            raise ExperimentError(f"Scene {index} is outside 0..{dataset.scene_count - 1}")
    query_view = query_view % dataset.views_per_scene
    try:
        composite = composite_scene(dataset.scenes[a], dataset.scenes[b], dataset.scenes[c])
    except FlatlandError as e:
        raise ExperimentError(str(e)) from None

    views = _observed_views(dataset, query_view, obs_count)
    reps = [represent(params, dataset.views(s, views)) for s in (a, b, c)]
    query = dataset.pose(a, query_view)
    rendered = render(params, scene_arithmetic(*reps), query).image.data.copy()
    result = ArithResult(
        rendered,
        render_view(composite, camera, query),
        render_view(dataset.scenes[a], camera, query),
    )

    if out_dir is not None:
        out_dir = ensure_dir(Path(out_dir))
        for name, image in (
            ("arith", result.rendered),
            ("composite", result.composite_truth),
            ("scene_a", result.scene_a_truth),
        ):
            result.paths[name] = out_dir / f"{name}.ppm"
            write_ppm(result.paths[name], image)
        result.paths["csv"] = out_dir / "arith.csv"
        frame = pd.DataFrame(
            [
                {"reference": "composite", "mse": result.mse_composite},
                {"reference": "scene_a", "mse": result.mse_a},
            ]
        )
        write_csv_atomic(frame, result.paths["csv"])
    return result


def scene_arith_sweep(
    params: ModelParams,
    dataset: FlatlandDataset,
    camera: CameraModel,
    triples: Optional[int] = None,
    query_view: int = -1,
    obs_count: int = 3,
) -> pd.DataFrame:
    """Run the experiment on consecutive (A, B, C) triples of a paired dataset."""
    available = dataset.scene_count // 3
    count = available if triples is None else min(triples, available)
    if count == 0:
        raise ExperimentError("The dataset holds no complete scene triple; generate it with --paired")
    rows = []
    for t in range(count):
        a, b, c = 3 * t, 3 * t + 1, 3 * t + 2
        result = scene_arith_experiment(params, dataset, a, b, c, query_view, camera, obs_count=obs_count)
        rows.append(
            {
                "triple": t,
                "mse_composite": result.mse_composite,
                "mse_scene_a": result.mse_a,
                "closer_to_composite": result.mse_composite < result.mse_a,
            }
        )
    return pd.DataFrame(rows)


@click.command(name="scene-arith")
@config_option
@click.option("--ckpt", "ckpt_path", type=_existing_file, required=True)
@click.option("--data", "data_path", type=_existing_file, required=True)
@click.option("--scenes", "scene_text", default=None, help="A,B,C scene indices; omit to sweep all triples.")
@click.option("--triples", type=int, default=None, help="Limit the sweep to this many triples.")
@click.option("--query-view", type=int, default=-1, show_default=True)
@click.option("--obs", "obs_count", type=int, default=3, show_default=True)
@click.option("--distortion", type=float, default=None)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
def scene_arith_command(
    config_path, ckpt_path, data_path, scene_text, triples, query_view, obs_count, distortion, out_path
):
    """Render A - B + C and compare it with the composite and with scene A."""
    dataset = read_dataset(data_path)
    params = load_checkpoint(ckpt_path).params
    camera = camera_for(load_config(config_path, distortion=distortion), params.hyper.width)

    if scene_text is not None:
        scenes = parse_ints(scene_text)
        if len(scenes) != 3:
            raise ConfigError(f"--scenes expects three indices A,B,C, got {scene_text!r}")
        result = scene_arith_experiment(params, dataset, *scenes, query_view, camera, out_path, obs_count)
        click.echo(f"mse vs composite: {result.mse_composite:.6f}")
        click.echo(f"mse vs scene A:   {result.mse_a:.6f}")
        for path in result.paths.values():
            click.echo(str(path))
        return

    frame = scene_arith_sweep(params, dataset, camera, triples, query_view, obs_count)
    write_csv_atomic(frame, out_path)
    click.echo(f"closer to the composite on {frame['closer_to_composite'].mean():.0%} of {len(frame)} triples")
    click.echo(str(out_path))


def setup(cli):
    cli.add_command(scene_arith_command)
