"""Fusion mode comparison across observation counts."""

import logging
from pathlib import Path
from typing import Mapping, Sequence

import click
import pandas as pd

from constants import PIXEL_SCALE

from .evaluate import evaluate, load_model
from .utils.cli import parse_ints
from .utils.dataset import FlatlandDataset, read_dataset
from .utils.errors import ExperimentError
from .utils.formats import rst_table, with_delta
from .utils.fusion import FusionMode
from .utils.model import ModelParams
from .utils.utils import write_csv_atomic

log = logging.getLogger(__name__)

DEFAULT_OBS_COUNTS = tuple(range(3, 9))
BASELINE_OBS = 3

_existing_file = click.Path(exists=True, dir_okay=False, path_type=Path)


def fusion_ablation(
    checkpoints: Mapping[FusionMode, ModelParams],
    dataset: FlatlandDataset,
    obs_counts: Sequence[int] = DEFAULT_OBS_COUNTS,
) -> pd.DataFrame:
    """RMSE in pixel units per (mode, obs count) and its change from the 3-observation run."""
    missing = [m.value for m in FusionMode if m not in checkpoints]
    if missing:
        raise ExperimentError(f"Missing checkpoints for fusion modes: {', '.join(missing)}")
    obs_counts = list(dict.fromkeys(obs_counts))
    if BASELINE_OBS not in obs_counts:
        raise ExperimentError(f"Observation counts must include the {BASELINE_OBS}-observation baseline")
    rows = []
    for mode in FusionMode:
        params = checkpoints[mode]
        if params.hyper.fusion is not mode:
            raise ExperimentError(f"The {mode.value} checkpoint was trained with {params.hyper.fusion.value} fusion")
        for count in obs_counts:
            value = evaluate(params, dataset, count).mean("rmse") * PIXEL_SCALE
            rows.append({"mode": mode.value, "obs": count, "rmse": value})
            log.info("%s with %d observations: rmse %.2f", mode.value, count, value)
    frame = pd.DataFrame(rows, columns=["mode", "obs", "rmse"])
    baseline = frame[frame["obs"] == BASELINE_OBS].set_index("mode")["rmse"]
    frame["delta"] = frame["rmse"] - frame["mode"].map(baseline)
    return frame


def ablation_table(frame: pd.DataFrame) -> pd.DataFrame:
    """Modes as rows, observation counts as columns, ``rmse (delta)`` cells."""
    counts = sorted(frame["obs"].unique())
    rows = []
    for mode, group in frame.groupby("mode", sort=False):
        by_count = group.set_index("obs")["rmse"]
        rows.append([mode] + [with_delta(by_count[c], by_count[BASELINE_OBS]) for c in counts])
    return pd.DataFrame(rows, columns=["mode"] + [f"{c} obs" for c in counts])


@click.command(name="fusion-ablation")
@click.option("--ckpt", "checkpoints", type=(str, _existing_file), multiple=True, required=True, help="MODE CKPT, once per fusion mode.")
@click.option("--data", "data_path", type=_existing_file, required=True)
@click.option("--obs", "obs_text", default="3..8", show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
def fusion_ablation_command(checkpoints, data_path, obs_text, out_path):
    """Compare fusion modes as the number of observations grows."""
    dataset = read_dataset(data_path)
    models = {}
    for mode, ckpt_path in checkpoints:
        try:
            mode = FusionMode(mode.lower())
        except ValueError:
            raise ExperimentError(f"Unknown fusion mode {mode!r}") from None
        models[mode] = load_model(ckpt_path, dataset)
    frame = fusion_ablation(models, dataset, parse_ints(obs_text))
    click.echo(rst_table(ablation_table(frame)))
    if out_path is not None:
        write_csv_atomic(frame, out_path)
        click.echo(str(out_path))


def setup(cli):
    cli.add_command(fusion_ablation_command)
