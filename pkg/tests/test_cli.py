import pandas as pd
import pytest
from click.testing import CliRunner

from main import cli

TINY_CONFIG = """\
# tiny run for tests
world_cells = 8
embedding_dim = 4
channels = 4
width = 8
patch_size = 2
latent_dim = 2
hidden = 6
camera_hidden = 8
scenes = 6
views_per_scene = 5
steps = 2
batch_size = 2
obs_min = 1
obs_max = 3
eval_obs = 2
checkpoint_interval = 1
log_interval = 1
"""


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def workspace(tmp_path, runner):
    config = tmp_path / "tiny.cfg"
    config.write_text(TINY_CONFIG)
    data = tmp_path / "train.strd"
    result = runner.invoke(cli, ["generate", "--config", str(config), "--out", str(data), "--paired"])
    assert result.exit_code == 0, result.output
    ckpt = tmp_path / "model.strc"
    result = runner.invoke(cli, ["train", "--config", str(config), "--data", str(data), "--ckpt", str(ckpt)])
    assert result.exit_code == 0, result.output
    return tmp_path, config, data, ckpt


def test_generate_reports_counts(tmp_path, runner):
    config = tmp_path / "tiny.cfg"
    config.write_text(TINY_CONFIG)
    result = runner.invoke(
        cli, ["generate", "--config", str(config), "--out", str(tmp_path / "d.strd"), "--scenes", "1", "--distortion", "high"]
    )
    assert result.exit_code == 0, result.output
    assert "1 scene x 5 views" in result.output


def test_train_writes_a_log(workspace):
    tmp_path, _, _, ckpt = workspace
    frame = pd.read_csv(ckpt.with_suffix(".csv"))
    assert frame["step"].tolist() == [1, 2]


def test_eval(workspace, runner):
    tmp_path, _, data, ckpt = workspace
    out = tmp_path / "eval.csv"
    result = runner.invoke(cli, ["eval", "--ckpt", str(ckpt), "--data", str(data), "--obs", "2", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "pooled rmse" in result.output
    assert len(pd.read_csv(out)) == 6


def test_scene_arith(workspace, runner):
    tmp_path, config, data, ckpt = workspace
    args = ["scene-arith", "--config", str(config), "--ckpt", str(ckpt), "--data", str(data), "--obs", "2"]
    result = runner.invoke(cli, args + ["--scenes", "0,1,2", "--out", str(tmp_path / "arith")])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "arith" / "composite.ppm").exists()


def test_route_viz(workspace, runner):
    tmp_path, config, data, ckpt = workspace
    result = runner.invoke(
        cli,
        ["route-viz", "--config", str(config), "--ckpt", str(ckpt), "--data", str(data), "--signal", "pixel:5",
         "--out", str(tmp_path / "viz")],
    )
    assert result.exit_code == 0, result.output
    assert "Spread mass inside the epipolar support" in result.output


def test_signal_outside_the_view(workspace, runner):
    tmp_path, config, data, ckpt = workspace
    result = runner.invoke(
        cli,
        ["route-viz", "--config", str(config), "--ckpt", str(ckpt), "--data", str(data), "--signal", "gaussian:2:0.1",
         "--out", str(tmp_path / "viz")],
    )
    assert result.exit_code == 1
    assert "Signal centre 2.0 lies outside [-1, 1]" in result.output
    assert "Traceback" not in result.output


def test_bad_observation_count(workspace, runner):
    _, _, data, ckpt = workspace
    result = runner.invoke(cli, ["eval", "--ckpt", str(ckpt), "--data", str(data), "--obs", "9"])
    assert result.exit_code == 1
    assert "Observation count 9" in result.output


def test_unknown_config_key(tmp_path, runner):
    config = tmp_path / "bad.cfg"
    config.write_text("world_cels = 8\n")
    result = runner.invoke(cli, ["generate", "--config", str(config), "--out", str(tmp_path / "d.strd")])
    assert result.exit_code == 1
    assert "Configuration error" in result.output
    assert "Did you mean 'world_cells'" in result.output


def test_missing_file(tmp_path, runner):
    result = runner.invoke(cli, ["eval", "--ckpt", str(tmp_path / "none.strc"), "--data", str(tmp_path / "none.strd")])
    assert result.exit_code == 2
