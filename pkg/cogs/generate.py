"""Dataset generation commands."""

import logging
import time
from pathlib import Path

import click
import humanize

from constants import DISTORTION_LEVELS

from .utils.cli import config_option, load_config, seed_option
from .utils.dataset import make_dataset, write_dataset
from .utils.formats import plural

log = logging.getLogger(__name__)


def _distortion(value: str) -> float:
    if value in DISTORTION_LEVELS:
        return DISTORTION_LEVELS[value]
    return float(value)


@click.command()
@config_option
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
@seed_option
@click.option("--distortion", default=None, help="Kappa, or one of original, low, high.")
@click.option("--scenes", type=int, default=None)
@click.option("--views", "views_per_scene", type=int, default=None)
@click.option("--objects", type=int, default=None, help="Objects per scene (sets both bounds).")
@click.option("--walls", type=int, default=None, help="Wall segments per scene.")
@click.option("--paired", is_flag=True, help="Write (A, B, C) scene triples for scene arithmetic.")
def generate(config_path, out_path, seed, distortion, scenes, views_per_scene, objects, walls, paired):
    """Render a flatland dataset to an STRD file."""
    config = load_config(
        config_path,
        seed=seed,
        distortion=None if distortion is None else _distortion(distortion),
        scenes=scenes,
        views_per_scene=views_per_scene,
        objects_min=objects,
        objects_max=objects,
        walls=walls,
    )
    started = time.perf_counter()
    dataset = make_dataset(config, paired=paired)
    write_dataset(dataset, out_path)
    elapsed = humanize.precisedelta(time.perf_counter() - started, minimum_unit="seconds", format="%0.1f")
    click.echo(
        f"Wrote {plural(dataset.scene_count, 'scene')} x {plural(dataset.views_per_scene, 'view')} "
        f"to {out_path} in {elapsed}"
    )


def setup(cli):
    cli.add_command(generate)
