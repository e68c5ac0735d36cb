import numpy as np
import pandas as pd
import pytest

from constants import BACKGROUND, PALETTE
from cogs.utils.formats import plural, rst_table, with_delta
from cogs.utils.metrics import bce, count_color_regions, mae, rmse, summarize


def strip(*runs):
    """Concatenate (colour, length) runs into a (width, 3) view."""
    return np.concatenate([np.tile(color, (length, 1)) for color, length in runs]).astype(np.float64)


class TestErrors:
    def test_identical(self, rng):
        image = rng.uniform(size=(16, 3))
        assert mae(image, image) == 0.0 and rmse(image, image) == 0.0

    def test_mae_never_exceeds_rmse(self, rng):
        for _ in range(100):
            a, b = rng.uniform(size=(16, 3)), rng.uniform(size=(16, 3))
            assert mae(a, b) <= rmse(a, b) + 1e-15

    def test_constant_offset(self):
        a = np.zeros((4, 3))
        assert mae(a, a + 0.25) == pytest.approx(0.25) and rmse(a, a + 0.25) == pytest.approx(0.25)

    def test_bce_is_finite_at_the_edges(self):
        assert np.isfinite(bce(np.array([0.0, 1.0]), np.array([1.0, 0.0])))

    def test_summary(self, rng):
        predictions = [rng.uniform(size=(8, 3)) for _ in range(5)]
        targets = [rng.uniform(size=(8, 3)) for _ in range(5)]
        summary = summarize(predictions, targets)
        assert list(summary.per_scene.columns) == ["scene", "mae", "rmse", "bce"]
        assert len(summary.per_scene) == 5
        assert summary.pooled_rmse == pytest.approx(rmse(np.stack(predictions), np.stack(targets)))
        table = summary.table().set_index("metric")
        assert table.loc["rmse", "mean_pixels"] == pytest.approx(255 * summary.mean("rmse"))


class TestColorRegions:
    def test_background_only(self):
        assert count_color_regions(strip((BACKGROUND, 32))) == 0

    def test_two_objects(self):
        view = strip((BACKGROUND, 5), (PALETTE[0], 8), (BACKGROUND, 4), (PALETTE[2], 6), (BACKGROUND, 9))
        assert count_color_regions(view) == 2

    def test_adjacent_colours(self):
        view = strip((PALETTE[0], 10), (PALETTE[1], 10), (PALETTE[3], 12))
        assert count_color_regions(view) == 3

    def test_depth_shading_keeps_the_colour(self):
        dim = tuple(0.6 * c for c in PALETTE[1])
        view = strip((BACKGROUND, 4), (PALETTE[1], 6), (dim, 6), (BACKGROUND, 4))
        assert count_color_regions(view) == 1

    def test_short_runs_are_noise(self):
        view = strip((BACKGROUND, 10), (PALETTE[4], 1), (BACKGROUND, 10))
        assert count_color_regions(view) == 0


class TestFormats:
    def test_plural(self):
        assert plural(1, "scene") == "1 scene"
        assert plural(3, "scene") == "3 scenes"
        assert plural(2, "query", "queries") == "2 queries"

    def test_with_delta(self):
        assert with_delta(9.02, 9.36) == "9.02 (-0.34)"
        assert with_delta(float("nan"), 1.0) == "nan"

    def test_table_from_frame(self):
        frame = pd.DataFrame({"mode": ["ocm", "sum"], "rmse": [9.36, 10.125]})
        lines = rst_table(frame).splitlines()
        assert lines[0] == lines[2] == lines[-1]
        assert len(lines) == 3 + len(frame) + 1
        assert "ocm" in lines[3] and "10.1250" in lines[4]
        assert len({len(line) for line in lines}) == 1
