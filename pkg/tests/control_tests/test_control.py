"""Test raster control encoding, target-only injection and drag token copies."""
import itertools

import numpy as np
import pytest

from pairedit.attention.attention import TokenGrid
from pairedit.control.drag import drag_cells, drag_token_inject
from pairedit.control.encoder import ControlEncoder, inject_target_only
from pairedit.interfaces.parameters import BackboneConfig
from pairedit.interfaces.sample_pair import DragPointSet
from pairedit.numerics import functional as F
from pairedit.numerics.gradcheck import grad_check
from pairedit.numerics.tensor import Param, ShapeError, Tensor


def test_feature_resolutions(tiny_config, random_image):
    """One feature map per attention level at the backbone resolution of that level."""
    config = tiny_config()
    encoder = ControlEncoder(3, config, np.random.default_rng(0))
    control = encoder.encode_signal(random_image(3, 16, 16))
    assert sorted(control.features) == config.attention_levels
    for level, features in control.features.items():
        assert features.shape == (1, config.level_channels(level), *config.level_grid(level))
        assert control.scales[level].value[0] == 0


def test_default_config_resolutions(random_image):
    """Features of the default configuration match levels 1 and 2 of a 64 x 64 image."""
    config = BackboneConfig()
    control = ControlEncoder(1, config, np.random.default_rng(0)).encode_signal(random_image(1, 64, 64))
    assert {level: f.shape[2:] for level, f in control.features.items()} == {1: (8, 8), 2: (4, 4)}


def test_wrong_raster_rejected(tiny_config):
    """Raster dims must match the configuration."""
    encoder = ControlEncoder(1, tiny_config(), np.random.default_rng(0))
    with pytest.raises(ShapeError, match="encode_signal"):
        encoder.encode_signal(np.zeros((1, 8, 8)))
    with pytest.raises(ShapeError, match="encode_signal"):
        encoder.encode_signal(np.zeros((3, 16, 16)))


def test_zero_sketch_zero_contribution(tiny_config):
    """All contributions vanish for an empty sketch and zero scales."""
    encoder = ControlEncoder(1, tiny_config(), np.random.default_rng(0))
    control = encoder.encode_signal(np.zeros((1, 16, 16)))
    for level, features in control.features.items():
        contribution = F.scale_by(features, control.scales[level])
        assert not contribution.data.any()


def test_inject_target_only(rng):
    """Source frame is passed through, the target frame is shifted by scale * control."""
    features = Tensor(rng.standard_normal((2, 4, 3, 3)))
    control = Tensor(np.ones((1, 4, 3, 3)))
    out = inject_target_only(features, control, Tensor(np.ones(1)))
    np.testing.assert_array_equal(out.data[0], features.data[0])
    np.testing.assert_allclose(out.data[1], features.data[1] + 1.0)

    identity = inject_target_only(features, Tensor(rng.standard_normal((4, 3, 3))), Tensor(np.zeros(1)))
    np.testing.assert_array_equal(identity.data, features.data)


def test_inject_shape_mismatch(rng):
    """Control resolution must match the features."""
    with pytest.raises(ShapeError, match="inject_target_only"):
        inject_target_only(Tensor(np.zeros((2, 4, 3, 3))), Tensor(np.zeros((1, 4, 2, 2))), Tensor(np.ones(1)))
    with pytest.raises(ShapeError, match="inject_target_only"):
        inject_target_only(Tensor(np.zeros((1, 4, 3, 3))), Tensor(np.zeros((1, 4, 3, 3))), Tensor(np.ones(1)))


def test_control_gradient(tiny_config, random_image, rng):
    """Gradients flow through the encoder and the injection into the target frame."""
    config = tiny_config()
    encoder = ControlEncoder(1, config, np.random.default_rng(0)).astype(np.float64)
    for scale in encoder.scales.values():
        scale.assign(np.full(1, 0.5))
    raster = random_image(1, 16, 16)
    features = Tensor(rng.standard_normal((2, config.level_channels(1), *config.level_grid(1))))
    weights = Tensor(rng.standard_normal(features.shape))

    def loss():
        control = encoder.encode_signal(raster)
        injected = inject_target_only(features, control.features[1], control.scales[1])
        return F.sum_all(F.mul(injected, weights))

    params = encoder.state()
    names = ["stem.weight", "blocks.1.conv_a.weight", "projections.1.weight", "scales.1"]
    report = grad_check(loss, {name: params[name] for name in names}, tolerance=1e-4, max_entries=5)
    assert report.passed, report.summary()


# >> Drag token injection


def _pair(rng: np.random.Generator, height: int = 4, width: int = 4, dim: int = 3) -> tuple[TokenGrid, TokenGrid]:
    n = height * width
    return (
        TokenGrid(height, width, Tensor(rng.standard_normal((n, dim)))),
        TokenGrid(height, width, Tensor(rng.standard_normal((n, dim)))),
    )


def test_drag_cells():
    """Pixels map to cells by integer division with the stride."""
    points = DragPointSet((((9, 1), (2, 15)),), 16, 16)
    source, target = drag_cells(points, 4, 4, 4)
    np.testing.assert_array_equal(source, [2])
    np.testing.assert_array_equal(target, [3 * 4])


def test_drag_cells_out_of_grid():
    """Pixels beyond the token grid are rejected."""
    points = DragPointSet((((15, 1), (2, 2)),), 16, 16)
    with pytest.raises(ValueError, match="token grid"):
        drag_cells(points, 4, 4, 3)


def test_empty_drag_is_identity(rng):
    """An empty point set changes nothing."""
    pair = _pair(rng)
    assert drag_token_inject(pair, DragPointSet((), 16, 16), 4) == pair


def test_single_drag_pair(rng):
    """The source token is added to the target token, other tokens are unchanged."""
    source, target = _pair(rng)
    points = DragPointSet((((4, 0), (12, 12)),), 16, 16)
    out_source, out_target = drag_token_inject((source, target), points, 4)
    assert out_source is source
    expected = target.tokens.data.copy()
    expected[15] += source.tokens.data[1]
    np.testing.assert_allclose(out_target.tokens.data, expected)


def test_shared_target_cell_sums(rng):
    """Pairs landing in the same target cell are summed in any order."""
    source, target = _pair(rng)
    pairs = (((0, 0), (5, 5)), ((8, 12), (6, 7)), ((15, 15), (0, 0)))
    outputs = [
        drag_token_inject((source, target), DragPointSet(order, 16, 16), 4)[1].tokens.data
        for order in itertools.permutations(pairs)
    ]
    expected = target.tokens.data.copy()
    expected[5] += source.tokens.data[0] + source.tokens.data[3 * 4 + 2]
    expected[0] += source.tokens.data[15]
    for out in outputs:
        np.testing.assert_array_equal(out, outputs[0])
    np.testing.assert_allclose(outputs[0], expected)


def test_drag_gradient(rng):
    """Gradients reach both the copied source tokens and the target tokens."""
    source = Param(rng.standard_normal((16, 3)), name="source")
    target = Param(rng.standard_normal((16, 3)), name="target")
    points = DragPointSet((((0, 0), (5, 5)), ((8, 12), (6, 7))), 16, 16)
    weights = Tensor(rng.standard_normal((16, 3)))

    def loss():
        _, out = drag_token_inject((TokenGrid(4, 4, source), TokenGrid(4, 4, target)), points, 4)
        return F.sum_all(F.mul(out.tokens, weights))

    report = grad_check(loss, [source, target])
    assert report.passed, report.summary()
    assert source.gradient[0].any() and not source.gradient[1].any()
