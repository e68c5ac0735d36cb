import numpy as np
import pytest

from cogs.utils.config import RunConfig
from cogs.utils.dataset import make_dataset
from cogs.utils.fusion import FusionMode
from cogs.utils.model import ModelHyperparams, ModelParams

TINY = dict(
    world_cells=8,
    embedding_dim=4,
    channels=4,
    width=8,
    patch_size=2,
    latent_dim=2,
    hidden=6,
    camera_hidden=8,
)


@pytest.fixture
def tiny_hyper():
    return ModelHyperparams(**TINY)


@pytest.fixture
def tiny_params(tiny_hyper):
    return ModelParams.initialize(tiny_hyper, seed=0)


@pytest.fixture
def tiny_config():
    return RunConfig.build(
        **TINY,
        scenes=6,
        views_per_scene=5,
        steps=3,
        batch_size=2,
        obs_min=1,
        obs_max=3,
        eval_obs=2,
        checkpoint_interval=2,
        log_interval=1,
    )


@pytest.fixture
def tiny_dataset(tiny_config):
    return make_dataset(tiny_config)


@pytest.fixture
def paired_dataset(tiny_config):
    return make_dataset(tiny_config, paired=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def make_params():
    def make(mode: FusionMode = FusionMode.OCM, seed: int = 0, **overrides) -> ModelParams:
        return ModelParams.initialize(ModelHyperparams(**{**TINY, "fusion": mode, **overrides}), seed=seed)

    return make
