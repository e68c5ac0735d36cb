"""Held-out evaluation: pixel metrics, generalization and distortion reports."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Sequence, Tuple

import click
import numpy as np
import pandas as pd

from constants import PIXEL_SCALE

from .utils.checkpoint import load_checkpoint
from .utils.checks import check_compatible, check_obs_count
from .utils.dataset import FlatlandDataset, read_dataset
from .utils.errors import ExperimentError
from .utils.formats import rst_table, with_delta
from .utils.metrics import MetricSummary, count_color_regions, mae, summarize
from .utils.model import ModelParams, Observation, predict
from .utils.pose import Pose
from .utils.utils import write_csv_atomic

log = logging.getLogger(__name__)

PredictFn = Callable[[int, Sequence[Observation], Pose], np.ndarray]

_existing_file = click.Path(exists=True, dir_okay=False, path_type=Path)


def query_split(dataset: FlatlandDataset, obs_count: int) -> Tuple[List[int], int]:
    """The first ``obs_count`` views observe, the last view is the query."""
    check_obs_count(dataset, obs_count)
    return list(range(obs_count)), dataset.views_per_scene - 1


def score_predictions(dataset: FlatlandDataset, obs_count: int, predict_fn: PredictFn) -> MetricSummary:
    observed, query = query_split(dataset, obs_count)
    predictions, targets = [], []
    for scene in range(dataset.scene_count):
        prediction = predict_fn(scene, dataset.views(scene, observed), dataset.pose(scene, query))
        predictions.append(np.asarray(prediction, dtype=np.float64))
        targets.append(dataset.image(scene, query))
    return summarize(predictions, targets)


def model_predictor(params: ModelParams) -> PredictFn:
    def predict_fn(scene, observations, query):
        return predict(params, observations, query)

    return predict_fn


def evaluate(params: ModelParams, dataset: FlatlandDataset, obs_count: int) -> MetricSummary:
    check_compatible(params.hyper, dataset)
    return score_predictions(dataset, obs_count, model_predictor(params))


def load_model(ckpt_path, dataset: FlatlandDataset) -> ModelParams:
    params = load_checkpoint(ckpt_path).params
    check_compatible(params.hyper, dataset)
    return params


@dataclass
class GeneralizationReport:
    reference_mae: float
    harder_mae: float
    regions: List[int]

    @property
    def ratio(self) -> float:
        return self.harder_mae / self.reference_mae if self.reference_mae > 0 else float("inf")

    @property
    def region_fraction(self) -> float:
        """Share of queries whose render shows at least three palette regions."""
        if not self.regions:
            return 0.0
        return float(np.mean([r >= 3 for r in self.regions]))


def generalization_report(
    params: ModelParams, reference: FlatlandDataset, harder: FlatlandDataset, obs_count: int
) -> GeneralizationReport:
    reference_mae = evaluate(params, reference, obs_count).mean("mae")
    check_compatible(params.hyper, harder)
    observed, query = query_split(harder, obs_count)
    errors, regions = [], []
    for scene in range(harder.scene_count):
        rendered = predict(params, harder.views(scene, observed), harder.pose(scene, query))
        errors.append(mae(rendered, harder.image(scene, query)))
        regions.append(count_color_regions(rendered))
    return GeneralizationReport(reference_mae, float(np.mean(errors)), regions)


@dataclass
class DistortionReport:
    frame: pd.DataFrame  # kappa, bce, rmse (pixels), increase over the undistorted level

    @property
    def monotone(self) -> bool:
        ordered = self.frame.sort_values("kappa")
        return bool(ordered["bce"].is_monotonic_increasing and ordered["rmse"].is_monotonic_increasing)

    def table(self) -> pd.DataFrame:
        """``kappa``, ``bce`` and ``rmse`` cells, each with its change from the undistorted level."""
        ordered = self.frame.sort_values("kappa")
        base = ordered.iloc[0]
        return pd.DataFrame(
            {
                "kappa": [f"{k:g}" for k in ordered["kappa"]],
                "bce": [with_delta(v, base.bce, 4) for v in ordered["bce"]],
                "rmse": [with_delta(v, base.rmse) for v in ordered["rmse"]],
            }
        )


def distortion_report(
    runs: Sequence[Tuple[float, ModelParams, FlatlandDataset]], obs_count: int
) -> DistortionReport:
    """One (kappa, checkpoint, dataset) run per distortion level."""
    if not runs:
        raise ExperimentError("A distortion report needs at least one run")
    rows = []
    for kappa, params, dataset in runs:
        summary = evaluate(params, dataset, obs_count)
        rows.append({"kappa": float(kappa), "bce": summary.mean("bce"), "rmse": summary.mean("rmse") * PIXEL_SCALE})
        log.info("kappa=%g bce=%.4f rmse=%.2f", kappa, rows[-1]["bce"], rows[-1]["rmse"])
    frame = pd.DataFrame(rows).sort_values("kappa").reset_index(drop=True)
    frame["bce_increase"] = frame["bce"] - frame["bce"].iloc[0]
    frame["rmse_increase"] = frame["rmse"] - frame["rmse"].iloc[0]
    return DistortionReport(frame)


def _summary_table(summary: MetricSummary) -> str:
    table = rst_table(summary.table())
    return table + f"\npooled rmse: {summary.pooled_rmse:.4f} ({summary.pooled_rmse * PIXEL_SCALE:.2f} pixels)"


@click.command(name="eval")
@click.option("--ckpt", "ckpt_path", type=_existing_file, required=True)
@click.option("--data", "data_path", type=_existing_file, required=True)
@click.option("--obs", "obs_count", type=int, default=3, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
def eval_command(ckpt_path, data_path, obs_count, out_path):
    """MAE, RMSE and BCE of novel views rendered from the first --obs views."""
    dataset = read_dataset(data_path)
    summary = evaluate(load_model(ckpt_path, dataset), dataset, obs_count)
    click.echo(_summary_table(summary))
    if out_path is not None:
        write_csv_atomic(summary.per_scene, out_path)
        click.echo(f"Per-scene metrics: {out_path}")


@click.command()
@click.option("--ckpt", "ckpt_path", type=_existing_file, required=True)
@click.option("--data", "data_path", type=_existing_file, required=True, help="Reference dataset.")
@click.option("--harder", "harder_path", type=_existing_file, required=True, help="Dataset with more objects.")
@click.option("--obs", "obs_count", type=int, default=3, show_default=True)
def generalize(ckpt_path, data_path, harder_path, obs_count):
    """Compare errors on scenes with more objects than seen in training."""
    reference = read_dataset(data_path)
    harder = read_dataset(harder_path)
    report = generalization_report(load_model(ckpt_path, reference), reference, harder, obs_count)
    click.echo(f"reference mae: {report.reference_mae:.4f}")
    click.echo(f"harder mae: {report.harder_mae:.4f} ({report.ratio:.2f}x)")
    click.echo(f"queries with >= 3 regions: {report.region_fraction:.0%}")


@click.command(name="distortion-report")
@click.option(
    "--level",
    "levels",
    type=(float, _existing_file, _existing_file),
    multiple=True,
    required=True,
    help="KAPPA CKPT DATA, once per distortion level.",
)
@click.option("--obs", "obs_count", type=int, default=3, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
def distortion_report_command(levels, obs_count, out_path):
    """BCE and RMSE per distortion level with the increase over the lowest kappa."""
    runs = []
    for kappa, ckpt_path, data_path in levels:
        dataset = read_dataset(data_path)
        runs.append((kappa, load_model(ckpt_path, dataset), dataset))
    report = distortion_report(runs, obs_count)
    click.echo(rst_table(report.table()))
    click.echo(f"monotone in kappa: {'yes' if report.monotone else 'no'}")
    if out_path is not None:
        write_csv_atomic(report.frame, out_path)


def setup(cli):
    cli.add_command(eval_command)
    cli.add_command(generalize)
    cli.add_command(distortion_report_command)
