"""Training loop: batched loss over sampled scenes, Adam, periodic checkpoints."""

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

import click
import humanize
import numpy as np
import pandas as pd

from .utils import tensor as T
from .utils.checkpoint import load_checkpoint, save_checkpoint
from .utils.checks import check_compatible
from .utils.cli import config_option, load_config, seed_option
from .utils.config import RunConfig
from .utils.dataset import FlatlandDataset, read_dataset
from .utils.errors import ConfigError, FormatError, TrainingDiverged
from .utils.model import ModelParams, loss
from .utils.utils import write_csv_atomic

log = logging.getLogger(__name__)

LOG_COLUMNS = ["step", "loss", "reconstruction", "regularization", "wall_time"]


@dataclass(frozen=True)
class TrainingRecord:
    step: int
    loss: float
    reconstruction: float
    regularization: float
    wall_time: float


class TrainingLog:
    def __init__(self, records: Optional[List[TrainingRecord]] = None):
        self.records: List[TrainingRecord] = []
        for record in records or ():
            self.append(record)

    def __len__(self):
        return len(self.records)

    @property
    def last_step(self) -> int:
        return self.records[-1].step if self.records else 0

    def append(self, record: TrainingRecord) -> None:
        if record.step <= self.last_step:
            raise ValueError(f"Training log steps must increase: {record.step} after {self.last_step}")
        self.records.append(record)

    def truncate(self, step: int) -> "TrainingLog":
        return TrainingLog([r for r in self.records if r.step <= step])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.records], columns=LOG_COLUMNS)

    def write(self, path) -> None:
        write_csv_atomic(self.to_frame(), path)

    @classmethod
    def read(cls, path) -> "TrainingLog":
        frame = pd.read_csv(path, float_precision="round_trip")
        if list(frame.columns) != LOG_COLUMNS:
            raise FormatError("Training log columns", expected=LOG_COLUMNS, found=list(frame.columns))
        return cls(
            [
                TrainingRecord(int(r.step), float(r.loss), float(r.reconstruction), float(r.regularization), float(r.wall_time))
                for r in frame.itertuples(index=False)
            ]
        )


@dataclass(frozen=True)
class TrainingSample:
    scene: int
    observations: List[int]
    query: int


def sample_batch(config: RunConfig, dataset: FlatlandDataset, rng: np.random.Generator) -> List[TrainingSample]:
    """Scenes for one step; each gets N in the obs range plus one distinct query view."""
    replace = dataset.scene_count < config.batch_size
    scenes = rng.choice(dataset.scene_count, size=config.batch_size, replace=replace)
    batch = []
    for scene in scenes:
        count = int(rng.integers(config.obs_min, config.obs_max + 1))
        views = rng.choice(dataset.views_per_scene, size=count + 1, replace=False)
        batch.append(TrainingSample(int(scene), [int(v) for v in views[:count]], int(views[count])))
    return batch


@dataclass
class TrainingResult:
    params: ModelParams
    adam: T.AdamState
    log: TrainingLog = field(repr=False)


def _step_rng(config: RunConfig, step: int) -> np.random.Generator:
    return np.random.default_rng([config.seed, step])


def train_step(params: ModelParams, adam: T.AdamState, config: RunConfig, dataset: FlatlandDataset, step: int):
    rng = _step_rng(config, step)
    params.zero_grad()
    total = None
    reconstruction = regularization = 0.0
    batch = sample_batch(config, dataset, rng)
    for sample in batch:
        terms = loss(
            params,
            dataset.views(sample.scene, sample.observations),
            dataset.pose(sample.scene, sample.query),
            dataset.image(sample.scene, sample.query),
            rng,
        )
        total = terms.total if total is None else total + terms.total
        reconstruction += terms.reconstruction
        regularization += terms.regularization

    batch_loss = total * (1.0 / len(batch))
    value = batch_loss.item()
    if not math.isfinite(value):
        raise TrainingDiverged(step, value)
    T.backward(batch_loss)
    T.adam_step(adam, params.named_parameters())
    return value, reconstruction / len(batch), regularization / len(batch)


def train(
    config: RunConfig,
    dataset: FlatlandDataset,
    checkpoint_path,
    log_path=None,
    *,
    resume_from=None,
) -> TrainingResult:
    """Train until ``config.steps``; with ``resume_from`` continue a saved run.

    Every step draws from its own generator seeded by ``(seed, step)`` so a
    resumed run replays the same batches as an uninterrupted one.
    """
    hyper = config.model_hyperparams()
    check_compatible(hyper, dataset)

    history = TrainingLog()
    if resume_from is not None:
        saved = load_checkpoint(resume_from)
        if saved.params.hyper != hyper:
            raise ConfigError(f"Checkpoint {resume_from} was trained with different model settings")
        if saved.adam is None:
            raise FormatError("Checkpoint has no optimizer state to resume from", expected="adam/hyper")
        params, adam = saved.params, saved.adam
        if log_path is not None and Path(log_path).exists():
            history = TrainingLog.read(log_path).truncate(adam.step)
        log.info("Resuming from %s at step %s", resume_from, humanize.intcomma(adam.step))
    else:
        params = ModelParams.initialize(hyper, seed=config.seed)
        adam = T.AdamState(config.learning_rate, config.beta1, config.beta2, config.epsilon)

    started = time.perf_counter()
    offset = history.records[-1].wall_time if history.records else 0.0
    for step in range(adam.step + 1, config.steps + 1):
        value, rec, reg = train_step(params, adam, config, dataset, step)
        elapsed = time.perf_counter() - started
        history.append(TrainingRecord(step, value, rec, reg, offset + elapsed))

        if step % config.log_interval == 0:
            log.info(
                "step %s/%s loss=%.6f rec=%.6f reg=%.6f (%s)",
                humanize.intcomma(step),
                humanize.intcomma(config.steps),
                value,
                rec,
                reg,
                humanize.precisedelta(elapsed, minimum_unit="seconds", format="%0.1f"),
            )
        if step % config.checkpoint_interval == 0 and step != config.steps:
            save_checkpoint(params, adam, checkpoint_path)
            if log_path is not None:
                history.write(log_path)

    save_checkpoint(params, adam, checkpoint_path)
    if log_path is not None:
        history.write(log_path)
    return TrainingResult(params, adam, history)


@click.command(name="train")
@config_option
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--ckpt", "ckpt_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--log", "log_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option("--resume", "resume_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@seed_option
@click.option("--steps", type=int, default=None)
@click.option("--fusion", default=None)
@click.option("--obs", default=None, help="Observation range for training, e.g. 1..5 or 3.")
def train_command(config_path, data_path, ckpt_path, log_path, resume_path, seed, steps, fusion, obs):
    """Train a model on an STRD dataset and write an STRC checkpoint."""
    obs_min = obs_max = None
    if obs is not None:
        lo, _, hi = obs.partition("..")
        try:
            obs_min, obs_max = int(lo), int(hi or lo)
        except ValueError:
            raise ConfigError(f"--obs expects N or LO..HI, got {obs!r}") from None
    config = load_config(config_path, seed=seed, steps=steps, fusion=fusion, obs_min=obs_min, obs_max=obs_max)
    dataset = read_dataset(data_path)
    log_path = log_path or ckpt_path.with_suffix(".csv")
    result = train(config, dataset, ckpt_path, log_path, resume_from=resume_path)
    final = result.log.records[-1] if result.log.records else None
    click.echo(f"Checkpoint: {ckpt_path}")
    click.echo(f"Log: {log_path}")
    if final is not None:
        click.echo(f"Final loss at step {final.step}: {final.loss:.6f}")


def setup(cli):
    cli.add_command(train_command)
