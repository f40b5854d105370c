"""Test the command line interface end to end on a tiny configuration."""
import pandas as pd
import pytest

from pairedit.cli import main, parse_size, read_signal_file
from pairedit.interfaces.enums import SignalType
from pairedit.utilities.netpbm import read_pnm

TINY_CONFIG = """
data:
  frame_count: 10
  min_interval: 2
  tau_lo: 0.8
  max_speed: 1.0
model: !BackboneConfig
  base_channels: 8
  channel_multipliers: [1, 2]
  attention_levels: [0, 1]
  head_count: 2
  patch_factor: 2
  embed_dim: 8
  group_count: 2
train:
  steps: 2
sample:
  steps: 2
"""


@pytest.fixture()
def workspace(tmp_path):
    """Tiny configuration, generated dataset and trained sketch checkpoint."""
    config = tmp_path / "tiny.yaml"
    config.write_text(TINY_CONFIG)
    data = tmp_path / "data"
    ckpt = tmp_path / "sketch.fpck"
    assert main(["gen-data", "--out", str(data), "--num-pairs", "2", "--size", "16x16",
                 "--signal", "sketch", "--config", str(config)]) == 0
    assert main(["train", "--data", str(data), "--config", str(config), "--signal", "sketch",
                 "--ckpt-out", str(ckpt), "--quiet"]) == 0
    return tmp_path


def test_parse_size():
    """Sizes are given as HxW."""
    assert parse_size("16x32") == (16, 32)
    with pytest.raises(ValueError, match="HxW"):
        parse_size("16")
    with pytest.raises(ValueError, match="positive"):
        parse_size("0x4")


def test_read_signal_file(tmp_path):
    """The signal type follows from the suffix."""
    path = tmp_path / "points.txt"
    path.write_text("0 0 1 1\n")
    assert read_signal_file(path, 4, 4).kind is SignalType.DRAG
    with pytest.raises(ValueError, match="Unknown signal file"):
        read_signal_file(tmp_path / "signal.png", 4, 4)


def test_train_outputs(workspace):
    """Training writes the checkpoint, its sidecar and the loss log."""
    assert (workspace / "sketch.fpck").exists()
    assert (workspace / "sketch.fpck.yaml").exists()
    lines = (workspace / "sketch.fpck.loss.txt").read_text().splitlines()
    assert lines[0].startswith("# step")
    assert len(lines) == 3


def test_edit(workspace):
    """Editing writes an image of the model size."""
    out = workspace / "edited.ppm"
    pair = workspace / "data" / "pair_00000"
    assert main(["edit", "--ckpt", str(workspace / "sketch.fpck"), "--source", str(pair / "source.ppm"),
                 "--signal-file", str(pair / "signal.pgm"), "--out", str(out), "--steps", "2"]) == 0
    assert read_pnm(out).shape == (3, 16, 16)


def test_edit_errors(workspace, capsys):
    """Missing checkpoints and foreign signals fail with exit status 2."""
    pair = workspace / "data" / "pair_00000"
    drag = workspace / "drag.txt"
    drag.write_text("0 0 1 1\n")
    base = ["edit", "--source", str(pair / "source.ppm"), "--out", str(workspace / "out.ppm")]
    assert main([*base, "--ckpt", str(workspace / "missing.fpck"), "--signal-file", str(drag)]) == 2
    assert main([*base, "--ckpt", str(workspace / "sketch.fpck"), "--signal-file", str(drag)]) == 2
    assert "expects sketch signals" in capsys.readouterr().err


def test_viz_attn(workspace):
    """Heatmaps and overlays are written per query token."""
    pair = workspace / "data" / "pair_00000"
    out = workspace / "viz"
    assert main(["viz-attn", "--ckpt", str(workspace / "sketch.fpck"), "--source", str(pair / "source.ppm"),
                 "--target", str(pair / "target.ppm"), "--signal-file", str(pair / "signal.pgm"),
                 "--queries", "0", "5", "--out", str(out), "--overlay"]) == 0
    assert read_pnm(out / "attn_down0_q5.pgm").shape == (1, 16, 16)
    assert (out / "attn_down0_q0.png").exists()
    assert main(["viz-attn", "--ckpt", str(workspace / "sketch.fpck"), "--source", str(pair / "source.ppm"),
                 "--target", str(pair / "target.ppm"), "--signal-file", str(pair / "signal.pgm"),
                 "--queries", "0", "--out", str(out), "--layer", "mid"]) == 2


def test_ablate(workspace):
    """The ablation trains, evaluates and tabulates the selected arms."""
    out = workspace / "ablation"
    data = str(workspace / "data")
    assert main(["ablate", "--eval-data", data, "--data", data, "--train", "--ckpt-dir", str(workspace / "ckpts"),
                 "--signal", "sketch", "--out", str(out), "--modes", "matching", "temporal", "--seeds", "0",
                 "--steps", "1", "--config", str(workspace / "tiny.yaml"), "--quiet"]) == 0
    table = pd.read_csv(out / "ablation.csv", dtype={"seed": str})
    assert list(table["config"]) == ["matching_recon", "temporal_recon", "matching_recon", "temporal_recon"]
    assert (out / "ablation.txt").exists()


def test_invalid_log_level():
    """Unknown log levels are rejected by the parser."""
    with pytest.raises(SystemExit):
        main(["--log-level", "LOUD", "gen-data", "--out", "x", "--signal", "sketch"])
