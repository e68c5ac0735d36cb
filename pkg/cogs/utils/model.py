"""Encoder, routing, fusion and decoder wired into one renderer."""

import enum
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from . import tensor as T
from .errors import ShapeError
from .fusion import FusionMode, SceneRepresentation, fuse
from .nn import Mlp
from .pose import Pose
from .routing import ViewCells, view_to_world, world_to_view
from .strn import StrnParams, strn_forward
from .tensor import Tensor

Observation = Tuple[np.ndarray, Pose]


class LossKind(str, enum.Enum):
    MSE = "mse"
    BCE = "bce"


@dataclass(frozen=True)
class ModelHyperparams:
    world_cells: int = 256
    embedding_dim: int = 16
    channels: int = 32
    width: int = 64
    patch_size: int = 4
    latent_dim: int = 16
    fusion: FusionMode = FusionMode.OCM
    variational: bool = True
    loss_kind: LossKind = LossKind.MSE
    gamma: float = 0.001
    image_channels: int = 3
    camera_dim: int = 2
    pose_dim: int = 4
    hidden: int = 64
    camera_hidden: int = 256

    def __post_init__(self):
        if self.patch_size <= 0 or self.width % self.patch_size:
            raise ShapeError(
                "ModelHyperparams",
                (self.width,),
                (self.patch_size,),
                detail="image width must be a multiple of the patch size",
            )
        object.__setattr__(self, "fusion", FusionMode(self.fusion))
        object.__setattr__(self, "loss_kind", LossKind(self.loss_kind))

    @property
    def view_cells(self) -> int:
        return self.width // self.patch_size

    @property
    def patch_features(self) -> int:
        return self.patch_size * self.image_channels


@dataclass
class LatentParams:
    mu: Tensor
    log_sigma: Tensor
    role: str = "prior"

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(self.log_sigma.data)

    def __len__(self):
        return self.mu.shape[-1]


@dataclass
class ModelParams:
    hyper: ModelHyperparams
    encoder: Mlp
    strn: StrnParams
    prior_head: Mlp
    posterior_head: Mlp
    decoder: Mlp

    @classmethod
    def initialize(cls, hyper: ModelHyperparams, seed: int = 0) -> "ModelParams":
        rng = np.random.default_rng(seed)
        c, h, latent = hyper.channels, hyper.hidden, hyper.latent_dim
        return cls(
            hyper=hyper,
            encoder=Mlp("encoder", (hyper.patch_features, h, c), rng),
            strn=StrnParams.initialize(
                rng,
                world_cells=hyper.world_cells,
                embedding_dim=hyper.embedding_dim,
                camera_dim=hyper.camera_dim,
                pose_dim=hyper.pose_dim,
                view_grid=(hyper.view_cells,),
                camera_hidden=hyper.camera_hidden,
                embedding_hidden=h,
            ),
            prior_head=Mlp("prior", (c, h, 2 * latent), rng),
            posterior_head=Mlp("posterior", (2 * c, h, 2 * latent), rng),
            decoder=Mlp("decoder", (c + latent, h, h, hyper.patch_features), rng),
        )

    def groups(self) -> Dict[str, Dict[str, Tensor]]:
        return {
            "encoder": self.encoder.named_parameters(),
            "strn.w2c": self.strn.world_to_camera.named_parameters(),
            "strn.wce": self.strn.world_embedding.named_parameters(),
            "strn.vce": self.strn.view_embedding.named_parameters(),
            "prior": self.prior_head.named_parameters(),
            "posterior": self.posterior_head.named_parameters(),
            "decoder": self.decoder.named_parameters(),
        }

    def named_parameters(self) -> Dict[str, Tensor]:
        params = {}
        for group in self.groups().values():
            params.update(group)
        return params

    def zero_grad(self) -> None:
        for p in self.named_parameters().values():
            p.zero_grad()


def as_image(image, width: Optional[int] = None, channels: int = 3) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.shape[1] != channels:
        raise ShapeError("image", image.shape, detail=f"expected (width, {channels})")
    if width is not None and image.shape[0] != width:
        raise ShapeError("image", image.shape, (width, channels))
    if not np.all(np.isfinite(image)) or image.min() < 0 or image.max() > 1:
        raise ValueError("Image values must be finite and lie in [0, 1]")
    return image


def encode(params: ModelParams, image) -> ViewCells:
    """Patch embedding: each non-overlapping patch goes through one shared MLP."""
    hyper = params.hyper
    image = as_image(image, channels=hyper.image_channels)
    if image.shape[0] % hyper.patch_size:
        raise ShapeError(
            "encode", image.shape, (hyper.patch_size,), detail="width is not a multiple of the patch size"
        )
    # pixel-major, channel-minor rows of patch_size * channels reals
    patches = image.reshape(-1, hyper.patch_features)
    return ViewCells(params.encoder(Tensor(patches)), (patches.shape[0],))


def represent(params: ModelParams, observations: Sequence[Observation]) -> SceneRepresentation:
    if not observations:
        raise ValueError("At least one observation is needed to build a scene representation")
    world = []
    for image, pose in observations:
        bundle = strn_forward(params.strn, pose)
        world.append(view_to_world(encode(params, image), bundle))
    return fuse(world, params.hyper.fusion)


def _latent(head: Mlp, features: Tensor, latent_dim: int, role: str) -> LatentParams:
    out = head(features)
    return LatentParams(out[0, :latent_dim], out[0, latent_dim:], role)


@dataclass
class Rendering:
    image: Tensor  # (W, 3) in [0, 1]
    logits: Tensor
    prior: LatentParams
    posterior: Optional[LatentParams] = None
    latent: Optional[Tensor] = None


def render(
    params: ModelParams,
    rep: SceneRepresentation,
    query: Pose,
    target=None,
    rng: Optional[np.random.Generator] = None,
) -> Rendering:
    """Route the scene into the query view and decode one patch per view cell.

    The latent comes from the posterior when a target is given and from the
    prior otherwise. It is sampled only in variational mode with an ``rng``;
    without one the distribution mean is used.
    """
    hyper = params.hyper
    if rep.cells.shape != (hyper.world_cells, hyper.channels):
        raise ShapeError("render", rep.cells.shape, (hyper.world_cells, hyper.channels))
    bundle = strn_forward(params.strn, query)
    query_cells = world_to_view(rep.cells, bundle).values
    pooled = T.mean(query_cells, axis=0, keepdims=True)
    prior = _latent(params.prior_head, pooled, hyper.latent_dim, "prior")

    posterior = None
    if target is not None and hyper.variational:
        target_cells = encode(params, target).values
        evidence = T.concat([pooled, T.mean(target_cells, axis=0, keepdims=True)], axis=1)
        posterior = _latent(params.posterior_head, evidence, hyper.latent_dim, "posterior")

    source = posterior if posterior is not None else prior
    if hyper.variational and rng is not None:
        eps = rng.standard_normal(hyper.latent_dim)
        z = source.mu + T.exp(source.log_sigma) * eps
    else:
        z = source.mu

    z_rows = T.broadcast_to(T.reshape(z, (1, hyper.latent_dim)), (query_cells.shape[0], hyper.latent_dim))
    logits = params.decoder(T.concat([query_cells, z_rows], axis=1))
    logits = T.reshape(logits, (hyper.width, hyper.image_channels))
    return Rendering(T.sigmoid(logits), logits, prior, posterior, z)


def kl_gaussian(post: LatentParams, prior: LatentParams) -> Tensor:
    """KL(N(mu_e, sigma_e) || N(mu_g, sigma_g)) summed over latent dimensions."""
    if post.mu.shape != prior.mu.shape or post.log_sigma.shape != prior.log_sigma.shape:
        raise ShapeError("kl_gaussian", post.mu.shape, prior.mu.shape)
    var_post = T.exp(post.log_sigma * 2.0)
    var_prior = T.exp(prior.log_sigma * 2.0)
    diff = post.mu - prior.mu
    per_dim = (prior.log_sigma - post.log_sigma) + (var_post + T.square(diff)) / (var_prior * 2.0) - 0.5
    return T.sum(per_dim)


@dataclass
class LossTerms:
    total: Tensor
    reconstruction: float
    regularization: float
    rendering: Rendering = field(repr=False, default=None)


def reconstruction_loss(rendering: Rendering, target: np.ndarray, kind: LossKind) -> Tensor:
    if LossKind(kind) is LossKind.BCE:
        # binary cross-entropy from logits: softplus(l) - t * l
        return T.mean(T.softplus(rendering.logits) - rendering.logits * target)
    return T.mean(T.square(rendering.image - target))


def loss(
    params: ModelParams,
    observations: Sequence[Observation],
    query_pose: Pose,
    target,
    rng: Optional[np.random.Generator] = None,
) -> LossTerms:
    """L = L_rec + gamma * KL(posterior || prior); L_reg is zero in deterministic mode."""
    hyper = params.hyper
    target = as_image(target, hyper.width, hyper.image_channels)
    rep = represent(params, observations)
    rendering = render(params, rep, query_pose, target, rng)
    rec = reconstruction_loss(rendering, target, hyper.loss_kind)
    if rendering.posterior is None:
        return LossTerms(rec, rec.item(), 0.0, rendering)
    reg = kl_gaussian(rendering.posterior, rendering.prior)
    total = rec + reg * hyper.gamma
    return LossTerms(total, rec.item(), reg.item(), rendering)


def predict(params: ModelParams, observations: Sequence[Observation], query: Pose) -> np.ndarray:
    """Deterministic novel view: latent fixed at the prior mean."""
    rendering = render(params, represent(params, observations), query)
    return rendering.image.data.copy()
