"""Click options and argument parsing shared by the harness commands."""

import math
from pathlib import Path
from typing import List, Optional

import click

from .config import RunConfig
from .errors import ConfigError
from .flatland import CameraModel
from .pose import Pose


def config_option(f):
    return click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        default=None,
        help="Run configuration file (key = value lines).",
    )(f)


def seed_option(f):
    return click.option("--seed", type=int, default=None, help="Overrides the configured seed.")(f)


def load_config(config_path: Optional[Path], **overrides) -> RunConfig:
    if config_path is None:
        return RunConfig.build(**{k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_file(config_path, **overrides)


def parse_pose(text: str) -> Pose:
    """``x,y,heading_degrees`` -> Pose."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ConfigError(f"Expected a pose as x,y,heading_degrees, got {text!r}")
    try:
        x, y, heading = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"Pose {text!r} has a value that is not a number") from None
    return Pose.from_heading(x, y, math.radians(heading))


def parse_ints(text: str) -> List[int]:
    """``"3,4"`` or ``"3..8"`` -> list of ints."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = (int(p) for p in text.split("..", 1))
            return list(range(lo, hi + 1))
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"Expected integers like 3,4 or 3..8, got {text!r}") from None


def parse_floats(text: str) -> List[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"Expected comma separated numbers, got {text!r}") from None


def ensure_dir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def camera_for(config: RunConfig, width: int) -> CameraModel:
    """The configured lens at a checkpoint's image width."""
    return CameraModel(math.radians(config.fov_degrees), width, config.distortion)
