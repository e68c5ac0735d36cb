import math

import numpy as np
import pytest

from cogs.utils import tensor as T
from cogs.utils.errors import ShapeError
from cogs.utils.fusion import FusionMode
from cogs.utils.model import (
    LatentParams,
    LossKind,
    ModelHyperparams,
    encode,
    kl_gaussian,
    loss,
    predict,
    render,
    represent,
)
from cogs.utils.pose import Pose
from cogs.utils.tensor import Tensor


def observations(rng, n, width=8):
    return [
        (rng.uniform(size=(width, 3)), Pose.from_heading(*rng.uniform(-0.8, 0.8, size=2), rng.uniform(-3, 3)))
        for _ in range(n)
    ]


def latent(mu, sigma, dims=3):
    return LatentParams(Tensor(np.full(dims, mu)), Tensor(np.full(dims, math.log(sigma))), "test")


class TestHyperparams:
    def test_default_view_cells(self):
        assert ModelHyperparams().view_cells == 16

    def test_default_gamma(self):
        assert ModelHyperparams().gamma == 0.001

    def test_width_must_tile(self):
        with pytest.raises(ShapeError):
            ModelHyperparams(width=10, patch_size=4)


class TestEncode:
    def test_shape(self, tiny_params, rng):
        assert encode(tiny_params, rng.uniform(size=(8, 3))).values.shape == (4, 4)

    def test_identical_patches_share_codes(self, tiny_params, rng):
        image = rng.uniform(size=(8, 3))
        image[4:6] = image[0:2]
        out = encode(tiny_params, image).values.data
        np.testing.assert_array_equal(out[2], out[0])

    def test_zero_image_with_zero_biases(self, tiny_params):
        for _, bias in tiny_params.encoder.layers:
            bias.data[...] = 0.0
        np.testing.assert_array_equal(encode(tiny_params, np.zeros((8, 3))).values.data, 0.0)

    @pytest.mark.parametrize("image", [np.zeros((8, 2)), np.full((8, 3), 1.5), np.zeros((7, 3))])
    def test_rejects_bad_images(self, tiny_params, image):
        with pytest.raises(ValueError):
            encode(tiny_params, image)


class TestRepresent:
    @pytest.mark.parametrize("mode", list(FusionMode))
    def test_permutation_invariance(self, make_params, rng, mode):
        params = make_params(mode)
        obs = observations(rng, 4)
        reference = represent(params, obs).cells.data
        for order in ([3, 1, 0, 2], [2, 3, 1, 0]):
            np.testing.assert_array_equal(represent(params, [obs[i] for i in order]).cells.data, reference)

    def test_single_observation_ocm(self, tiny_params, rng):
        rep = represent(tiny_params, observations(rng, 1))
        np.testing.assert_array_equal(rep.cells.data, T.sigmoid(rep.pre_activation).data)

    def test_duplicate_doubles_sum(self, make_params, rng):
        params = make_params(FusionMode.SUM)
        obs = observations(rng, 1)
        once = represent(params, obs).pre_activation.data
        np.testing.assert_array_equal(represent(params, obs * 2).pre_activation.data, 2 * once)

    def test_needs_an_observation(self, tiny_params):
        with pytest.raises(ValueError):
            represent(tiny_params, [])


class TestRender:
    def test_deterministic_mode(self, make_params, rng):
        params = make_params(variational=False)
        rep = represent(params, observations(rng, 2))
        query = Pose.from_heading(0.1, 0.2, 0.3)
        a, b = render(params, rep, query), render(params, rep, query)
        np.testing.assert_array_equal(a.image.data, b.image.data)
        assert a.posterior is None

    def test_range_and_shape(self, tiny_params, rng):
        rendering = render(tiny_params, represent(tiny_params, observations(rng, 3)), Pose.from_heading(0, 0, 1))
        assert rendering.image.shape == (8, 3)
        assert np.all((rendering.image.data >= 0) & (rendering.image.data <= 1))

    def test_seeded_sampler_is_reproducible(self, tiny_params, rng):
        rep = represent(tiny_params, observations(rng, 2))
        target = rng.uniform(size=(8, 3))
        query = Pose.from_heading(0.0, 0.0, 0.0)
        a = render(tiny_params, rep, query, target, np.random.default_rng(9))
        b = render(tiny_params, rep, query, target, np.random.default_rng(9))
        np.testing.assert_array_equal(a.image.data, b.image.data)
        assert a.posterior is not None

    def test_wrong_representation_shape(self, tiny_params, make_params, rng):
        other = make_params(world_cells=6)
        rep = represent(other, observations(rng, 1))
        with pytest.raises(ShapeError):
            render(tiny_params, rep, Pose.from_heading(0, 0, 0))


class TestKl:
    def test_identical(self):
        assert kl_gaussian(latent(0.3, 1.7), latent(0.3, 1.7)).item() == 0.0

    def test_shifted_mean(self):
        assert kl_gaussian(latent(1.0, 1.0), latent(0.0, 1.0)).item() == pytest.approx(0.5 * 3, abs=1e-12)

    def test_wider_posterior(self):
        value = kl_gaussian(latent(0.0, 2.0), latent(0.0, 1.0)).item()
        assert value == pytest.approx(3 * (1.5 - math.log(2.0)), abs=1e-12)

    def test_non_negative(self, rng):
        for _ in range(50):
            post = LatentParams(Tensor(rng.normal(size=4)), Tensor(rng.normal(size=4)), "posterior")
            prior = LatentParams(Tensor(rng.normal(size=4)), Tensor(rng.normal(size=4)), "prior")
            assert kl_gaussian(post, prior).item() >= 0.0


class TestLoss:
    def test_perfect_reconstruction_is_zero(self, make_params, rng):
        params = make_params(variational=False)
        obs = observations(rng, 2)
        query = Pose.from_heading(0.2, 0.1, 0.5)
        target = predict(params, obs, query)
        terms = loss(params, obs, query, target)
        assert terms.total.item() == 0.0
        assert terms.regularization == 0.0

    def test_components(self, tiny_params, rng):
        obs = observations(rng, 2)
        terms = loss(tiny_params, obs, Pose.from_heading(0, 0, 0), rng.uniform(size=(8, 3)), np.random.default_rng(0))
        assert terms.total.item() == pytest.approx(terms.reconstruction + 0.001 * terms.regularization, rel=1e-12)
        assert terms.regularization >= 0.0

    def test_bce_from_logits(self, make_params, rng):
        params = make_params(loss_kind=LossKind.BCE, variational=False)
        obs = observations(rng, 1)
        query = Pose.from_heading(0, 0, 0)
        target = rng.uniform(size=(8, 3))
        terms = loss(params, obs, query, target)
        p = np.clip(terms.rendering.image.data, 1e-12, 1 - 1e-12)
        expected = np.mean(-(target * np.log(p) + (1 - target) * np.log(1 - p)))
        assert terms.reconstruction == pytest.approx(expected, rel=1e-9)

    @pytest.mark.parametrize("variational", [True, False])
    def test_gradients_of_every_group(self, make_params, variational):
        params = make_params(variational=variational)
        rng = np.random.default_rng(21)
        obs = observations(rng, 2)
        query = Pose.from_heading(0.3, -0.2, 2.0)
        target = rng.uniform(size=(8, 3))

        def objective():
            return loss(params, obs, query, target, np.random.default_rng(4)).total

        for group, named in params.groups().items():
            if group == "posterior" and not variational:
                continue
            for name, param in named.items():
                draws = np.random.default_rng(len(name)).integers(0, param.shape, size=(3, param.ndim))
                picks = sorted({tuple(int(v) for v in row) for row in draws})
                report = T.grad_check_parameter(objective, param, indices=picks)
                assert report.passed, (name, report.max_error)
