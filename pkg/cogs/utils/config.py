"""Run configuration: defaults, ``key = value`` files and validation."""

import dataclasses
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Tuple

import simpleeval

from constants import IMAGE_CHANNELS, POSE_DIM

from . import fuzzy
from .errors import ConfigError
from .flatland import CameraModel
from .fusion import FusionMode
from .model import LossKind, ModelHyperparams
from .utils import isbool, parse_bool

log = logging.getLogger(__name__)

_CHOICES = {"fusion": [m.value for m in FusionMode], "loss": [k.value for k in LossKind]}


@dataclass(frozen=True)
class RunConfig:
    # model
    world_cells: int = 256
    embedding_dim: int = 16
    channels: int = 32
    width: int = 64
    patch_size: int = 4
    latent_dim: int = 16
    hidden: int = 64
    camera_hidden: int = 256
    fusion: str = "ocm"
    variational: bool = True
    loss: str = "mse"
    gamma: float = 0.001
    # optimizer
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    # training
    steps: int = 50_000
    batch_size: int = 32
    obs_min: int = 1
    obs_max: int = 5
    eval_obs: int = 3
    seed: int = 0
    checkpoint_interval: int = 5_000
    log_interval: int = 100
    # flatland
    distortion: float = 0.0
    fov_degrees: float = 90.0
    scenes: int = 5_000
    views_per_scene: int = 8
    objects_min: int = 2
    objects_max: int = 2
    walls: int = 0

    @classmethod
    def keys(cls) -> List[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_file(cls, path, **overrides) -> "RunConfig":
        text = Path(path).read_text(encoding="utf-8")
        values = parse_config_text(text, source=str(path))
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.build(**values)

    @classmethod
    def build(cls, **values) -> "RunConfig":
        unknown = [k for k in values if k not in cls.keys()]
        if unknown:
            key = unknown[0]
            raise ConfigError(f"Unknown config key {key!r}.{fuzzy.did_you_mean(key, cls.keys())}")
        config = cls(**{k: _coerce(k, v) for k, v in values.items()})
        config.validate()
        return config

    def replace(self, **overrides) -> "RunConfig":
        values = dataclasses.asdict(self)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return type(self).build(**values)

    def validate(self) -> None:
        problems = []

        def require(ok: bool, message: str):
            if not ok:
                problems.append(message)

        for name in (
            "world_cells", "embedding_dim", "channels", "width", "patch_size", "latent_dim",
            "hidden", "camera_hidden", "steps", "batch_size", "scenes", "views_per_scene",
            "checkpoint_interval", "log_interval",
        ):
            require(getattr(self, name) > 0, f"{name} must be positive, got {getattr(self, name)}")
        require(
            self.patch_size > 0 and self.width % self.patch_size == 0,
            f"width ({self.width}) must be a multiple of patch_size ({self.patch_size})",
        )
        for name, choices in _CHOICES.items():
            value = getattr(self, name)
            require(value in choices, f"{name} must be one of {choices}, got {value!r}")
        require(self.gamma >= 0, f"gamma must be non-negative, got {self.gamma}")
        require(self.learning_rate > 0, f"learning_rate must be positive, got {self.learning_rate}")
        require(0 <= self.beta1 < 1, f"beta1 must lie in [0, 1), got {self.beta1}")
        require(0 <= self.beta2 < 1, f"beta2 must lie in [0, 1), got {self.beta2}")
        require(self.epsilon > 0, f"epsilon must be positive, got {self.epsilon}")
        require(
            1 <= self.obs_min <= self.obs_max,
            f"obs_min..obs_max must be a non-empty range starting at 1 or more, got {self.obs_min}..{self.obs_max}",
        )
        require(
            self.obs_max <= self.views_per_scene - 1,
            f"obs_max ({self.obs_max}) must leave one query view out of views_per_scene ({self.views_per_scene})",
        )
        require(
            1 <= self.eval_obs <= self.views_per_scene - 1,
            f"eval_obs must lie in 1..{self.views_per_scene - 1}, got {self.eval_obs}",
        )
        require(self.seed >= 0, f"seed must be non-negative, got {self.seed}")
        require(self.walls >= 0, f"walls must be non-negative, got {self.walls}")
        require(self.distortion >= 0, f"distortion must be non-negative, got {self.distortion}")
        require(0 < self.fov_degrees < 180, f"fov_degrees must lie in (0, 180), got {self.fov_degrees}")
        require(
            0 <= self.objects_min <= self.objects_max,
            f"objects_min..objects_max must be a non-empty range, got {self.objects_min}..{self.objects_max}",
        )
        if problems:
            raise ConfigError("Invalid configuration:\n  " + "\n  ".join(problems))

    @property
    def obs_range(self) -> Tuple[int, int]:
        return self.obs_min, self.obs_max

    @property
    def object_range(self) -> Tuple[int, int]:
        return self.objects_min, self.objects_max

    def camera(self) -> CameraModel:
        return CameraModel(math.radians(self.fov_degrees), self.width, self.distortion)

    def model_hyperparams(self) -> ModelHyperparams:
        return ModelHyperparams(
            world_cells=self.world_cells,
            embedding_dim=self.embedding_dim,
            channels=self.channels,
            width=self.width,
            patch_size=self.patch_size,
            latent_dim=self.latent_dim,
            fusion=FusionMode(self.fusion),
            variational=self.variational,
            loss_kind=LossKind(self.loss),
            gamma=self.gamma,
            image_channels=IMAGE_CHANNELS,
            pose_dim=POSE_DIM,
            hidden=self.hidden,
            camera_hidden=self.camera_hidden,
        )

    def to_text(self) -> str:
        lines = ["# run configuration"]
        for key, value in dataclasses.asdict(self).items():
            if isinstance(value, bool):
                value = str(value).lower()
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if key not in RunConfig.keys():
            raise ConfigError(
                f"{source}:{lineno}: unknown config key {key!r}.{fuzzy.did_you_mean(key, RunConfig.keys())}"
            )
        if key in values:
            raise ConfigError(f"{source}:{lineno}: {key!r} is set twice")
        values[key] = value
    return values


def _evaluate(key: str, text: str):
    try:
        return simpleeval.simple_eval(text, names={}, functions={})
    except (simpleeval.InvalidExpression, SyntaxError, TypeError, ZeroDivisionError) as e:
        raise ConfigError(f"{key}: cannot evaluate {text!r} ({e})") from None


def _coerce(key: str, value):
    kind = {f.name: f.type for f in dataclasses.fields(RunConfig)}[key]
    kind = kind if isinstance(kind, type) else {"int": int, "float": float, "bool": bool, "str": str}[kind]

    if kind is str:
        value = str(value).strip().lower()
        if value not in _CHOICES[key]:
            raise ConfigError(f"{key}: {value!r} is not one of {_CHOICES[key]}.{fuzzy.did_you_mean(value, _CHOICES[key])}")
        return value
    if kind is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and isbool(value):
            return parse_bool(value)
        raise ConfigError(f"{key}: expected true or false, got {value!r}")

    number = _evaluate(key, value) if isinstance(value, str) else value
    if isinstance(number, bool) or not isinstance(number, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if kind is int:
        if float(number) != int(number):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return int(number)
    if not math.isfinite(number):
        raise ConfigError(f"{key}: expected a finite number, got {value!r}")
    return float(number)
