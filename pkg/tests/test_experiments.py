import numpy as np
import pandas as pd
import pytest

from cogs.ablation import ablation_table, fusion_ablation
from cogs.evaluate import distortion_report, evaluate, generalization_report, score_predictions
from cogs.routing_viz import ROUTE_COLUMNS, SignalSpec, epipolar_score, route_frame, route_viz
from cogs.scene_arith import scene_arith_experiment, scene_arith_sweep
from cogs.utils.dataset import FlatlandDataset, make_dataset
from cogs.utils.errors import ConfigError, ExperimentError
from cogs.utils.flatland import epipolar_support
from cogs.utils.formats import rst_table
from cogs.utils.fusion import FusionMode
from cogs.utils.images import read_ppm
from cogs.utils.model import render, represent
from cogs.utils.pose import Pose

POSE_A = Pose.from_heading(-0.5, -0.5, np.pi / 4)
POSE_B = Pose.from_heading(0.5, -0.5, 3 * np.pi / 4)


@pytest.fixture
def camera(tiny_config):
    return tiny_config.camera()


class TestEvaluate:
    def test_perfect_predictor(self, tiny_dataset):
        summary = score_predictions(tiny_dataset, 2, lambda scene, obs, query: tiny_dataset.image(scene, 4))
        assert summary.mean("mae") == 0.0 and summary.pooled_rmse == 0.0

    def test_mean_image_predictor(self, tiny_dataset):
        targets = tiny_dataset.images[:, -1].astype(np.float64)
        mean_image = targets.mean(axis=0)
        summary = score_predictions(tiny_dataset, 2, lambda scene, obs, query: mean_image)
        assert summary.pooled_rmse == pytest.approx(np.sqrt(targets.var(axis=0).mean()), rel=1e-9)

    def test_queries_are_the_last_view(self, tiny_dataset):
        seen = []

        def spy(scene, obs, query):
            seen.append((len(obs), query))
            return tiny_dataset.image(scene, 0)

        score_predictions(tiny_dataset, 3, spy)
        assert all(count == 3 for count, _ in seen)
        assert seen[1][1] == tiny_dataset.pose(1, 4)

    def test_deterministic(self, tiny_params, tiny_dataset):
        a = evaluate(tiny_params, tiny_dataset, 2).per_scene
        b = evaluate(tiny_params, tiny_dataset, 2).per_scene
        pd.testing.assert_frame_equal(a, b)

    @pytest.mark.parametrize("count", [0, 5])
    def test_observation_count_range(self, tiny_params, tiny_dataset, count):
        with pytest.raises(ExperimentError):
            evaluate(tiny_params, tiny_dataset, count)

    def test_generalization(self, tiny_params, tiny_config, tiny_dataset):
        harder = make_dataset(tiny_config.replace(objects_min=3, objects_max=3), seed=5)
        report = generalization_report(tiny_params, tiny_dataset, harder, 2)
        assert len(report.regions) == harder.scene_count
        assert report.ratio == pytest.approx(report.harder_mae / report.reference_mae)
        assert 0.0 <= report.region_fraction <= 1.0

    def test_distortion_report(self, tiny_params, tiny_config):
        runs = [
            (kappa, tiny_params, make_dataset(tiny_config.replace(distortion=kappa)))
            for kappa in (0.8, 0.0, 0.3)
        ]
        report = distortion_report(runs, 2)
        assert report.frame["kappa"].tolist() == [0.0, 0.3, 0.8]
        assert report.frame.loc[0, "bce_increase"] == 0.0 and report.frame.loc[0, "rmse_increase"] == 0.0
        assert isinstance(report.monotone, bool)
        assert "(+0.0000)" in rst_table(report.table())


class TestRouteFrame:
    def test_zero_signal(self, tiny_params, camera):
        frame = route_frame(tiny_params, POSE_A, POSE_B, np.zeros(4), 3, camera)
        assert list(frame.columns) == ROUTE_COLUMNS
        assert len(frame) == 4
        assert (frame["raw_spread"] == 0.0).all()

    def test_support_matches_the_epipolar_line(self, tiny_params, camera):
        signal = np.eye(4)[1]
        frame = route_frame(tiny_params, POSE_A, POSE_B, signal, 3, camera)
        support = epipolar_support(3, POSE_A, POSE_B, camera, patch_size=2)
        assert set(frame.loc[frame["support"] == 1, "cell"]) == set(support)
        assert frame["normalized_spread"].sum() == pytest.approx(1.0)

    def test_finer_resolution(self, tiny_params, camera):
        frame = route_frame(tiny_params, POSE_A, POSE_B, np.eye(8)[2], 2, camera, resolution=8)
        assert len(frame) == 8

    def test_grid_must_tile_the_view(self, tiny_params, camera):
        with pytest.raises(ExperimentError):
            route_frame(tiny_params, POSE_A, POSE_B, np.zeros(3), 0, camera, resolution=3)

    def test_writes_strips(self, tiny_params, camera, tmp_path):
        result = route_viz(tiny_params, POSE_A, POSE_B, np.eye(4)[0], 0, camera, tmp_path / "viz")
        assert read_ppm(result.paths["spread"]).shape == (16, 8, 3)
        assert pd.read_csv(result.paths["csv"])["cell"].tolist() == [0, 1, 2, 3]


class TestSignalSpec:
    def test_pixel(self):
        spec = SignalSpec.parse("pixel:3", 8)
        assert spec.source_pixel(8) == 3
        np.testing.assert_array_equal(spec.build(4), np.eye(4)[1])

    def test_gaussian(self):
        spec = SignalSpec.parse("gaussian:0.2:0.1", 8)
        assert spec.build(8).sum() == pytest.approx(1.0)

    @pytest.mark.parametrize("text", ["pixel:8", "pixel:x", "blob:1", "gaussian:0.2"])
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            SignalSpec.parse(text, 8)


class TestEpipolarScore:
    def test_range(self, tiny_params, tiny_dataset, camera):
        score = epipolar_score(tiny_params, tiny_dataset, camera, samples=20, dilation=0, seed=3)
        assert len(score.frame) == 20
        assert ((score.frame["score"] >= 0) & (score.frame["score"] <= 1 + 1e-12)).all()
        assert 0 < score.baseline_mean <= 1

    def test_full_dilation_captures_everything(self, tiny_params, tiny_dataset, camera):
        score = epipolar_score(tiny_params, tiny_dataset, camera, samples=10, dilation=4)
        assert score.mean == pytest.approx(1.0)
        assert score.baseline_mean == 1.0

    def test_same_seed_same_samples(self, tiny_params, tiny_dataset, camera):
        a = epipolar_score(tiny_params, tiny_dataset, camera, samples=5, seed=9).frame
        b = epipolar_score(tiny_params, tiny_dataset, camera, samples=5, seed=9).frame
        pd.testing.assert_frame_equal(a, b)


class TestSceneArithmetic:
    def test_subtracting_a_scene_from_itself(self, tiny_params, paired_dataset, camera):
        result = scene_arith_experiment(tiny_params, paired_dataset, 0, 0, 2, -1, camera)
        rep_c = represent(tiny_params, paired_dataset.views(2, [0, 1, 2]))
        expected = render(tiny_params, rep_c, paired_dataset.pose(0, 4)).image.data
        np.testing.assert_array_equal(result.rendered, expected)

    def test_outputs(self, tiny_params, paired_dataset, camera, tmp_path):
        result = scene_arith_experiment(tiny_params, paired_dataset, 0, 1, 2, -1, camera, tmp_path / "arith")
        for name in ("arith", "composite", "scene_a"):
            assert read_ppm(result.paths[name]).shape == (16, 8, 3)
        assert pd.read_csv(result.paths["csv"])["mse"].tolist() == pytest.approx([result.mse_composite, result.mse_a])

    def test_unpaired_scenes(self, tiny_params, tiny_dataset, camera):
        with pytest.raises(ExperimentError, match="--paired"):
            scene_arith_experiment(tiny_params, tiny_dataset, 0, 1, 2, -1, camera)

    def test_needs_metadata(self, tiny_params, paired_dataset, camera):
        bare = FlatlandDataset(paired_dataset.poses, paired_dataset.images)
        with pytest.raises(ExperimentError, match="metadata"):
            scene_arith_experiment(tiny_params, bare, 0, 1, 2, -1, camera)

    def test_scene_index_range(self, tiny_params, paired_dataset, camera):
        with pytest.raises(ExperimentError):
            scene_arith_experiment(tiny_params, paired_dataset, 0, 1, 6, -1, camera)

    def test_sweep(self, tiny_params, paired_dataset, camera):
        frame = scene_arith_sweep(tiny_params, paired_dataset, camera)
        assert frame["triple"].tolist() == [0, 1]
        assert frame["closer_to_composite"].dtype == bool


class TestFusionAblation:
    @pytest.fixture
    def models(self, make_params):
        return {mode: make_params(mode) for mode in FusionMode}

    @pytest.fixture
    def wide_dataset(self, tiny_config):
        return make_dataset(tiny_config.replace(scenes=2, views_per_scene=9))

    def test_grid(self, models, wide_dataset):
        frame = fusion_ablation(models, wide_dataset)
        assert len(frame) == 18
        assert (frame.loc[frame["obs"] == 3, "delta"] == 0.0).all()
        assert len(rst_table(ablation_table(frame)).splitlines()) == 3 + 4

    def test_deltas_are_against_three_observations(self, models, wide_dataset):
        frame = fusion_ablation(models, wide_dataset, [5, 3])
        for _, group in frame.groupby("mode"):
            by_count = group.set_index("obs")
            assert by_count.loc[3, "delta"] == 0.0
            assert by_count.loc[5, "delta"] == by_count.loc[5, "rmse"] - by_count.loc[3, "rmse"]
        assert list(ablation_table(frame).columns) == ["mode", "3 obs", "5 obs"]

    def test_needs_the_baseline_count(self, models, wide_dataset):
        with pytest.raises(ExperimentError, match="baseline"):
            fusion_ablation(models, wide_dataset, [4, 5])

    def test_missing_mode(self, models, wide_dataset):
        del models[FusionMode.NORM]
        with pytest.raises(ExperimentError, match="norm"):
            fusion_ablation(models, wide_dataset)

    def test_mismatched_checkpoint(self, models, wide_dataset):
        models[FusionMode.SUM] = models[FusionMode.OCM]
        with pytest.raises(ExperimentError, match="ocm fusion"):
            fusion_ablation(models, wide_dataset)

    def test_views_limit_the_counts(self, models, tiny_dataset):
        with pytest.raises(ExperimentError):
            fusion_ablation(models, tiny_dataset)
