# Preconditions shared by the harness commands. Each raises a named error
# instead of letting a mismatch surface as a shape error deep in the model.

from .dataset import FlatlandDataset
from .errors import ExperimentError, FormatError
from .model import ModelHyperparams


def check_compatible(hyper: ModelHyperparams, dataset: FlatlandDataset) -> None:
    expected = (hyper.width, hyper.image_channels, hyper.pose_dim)
    found = (dataset.width, dataset.channels, dataset.pose_dim)
    if expected != found:
        raise FormatError("Dataset does not match the model (width, channels, pose_dim)", expected=expected, found=found)


def check_obs_count(dataset: FlatlandDataset, obs_count: int) -> None:
    if not 1 <= obs_count <= dataset.views_per_scene - 1:
        raise ExperimentError(
            f"Observation count {obs_count} needs 1..{dataset.views_per_scene - 1} "
            f"for a dataset with {dataset.views_per_scene} views per scene"
        )


def require_metadata(dataset: FlatlandDataset, purpose: str) -> None:
    if not dataset.has_metadata:
        raise ExperimentError(f"{purpose} needs scene metadata, but the dataset was written without it")
