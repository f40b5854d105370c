"""Test the two-frame denoiser and the source embedder."""
import numpy as np
import pytest

from pairedit.backbone.embedder import ImageEmbedder, embed_source
from pairedit.backbone.latent import LatentPair, encode_image
from pairedit.backbone.unet import Denoiser, timestep_embedding
from pairedit.control.encoder import ControlEncoder
from pairedit.interfaces.enums import AttentionMode
from pairedit.interfaces.sample_pair import DragPointSet
from pairedit.numerics import functional as F
from pairedit.numerics.gradcheck import grad_check
from pairedit.numerics.tensor import ShapeError, Tensor

LATENT_SHAPE = (12, 8, 8)


@pytest.fixture()
def denoiser_inputs(random_image):
    """Source image, its latent, a noisy pair and the embedder of the tiny configuration."""

    def _inputs(dtype=np.float32):
        rng = np.random.default_rng(seed=1)
        image = random_image(3, 16, 16)
        embedder = ImageEmbedder(2, 8, rng, hidden_channels=8).astype(dtype)
        noisy = Tensor(rng.standard_normal((2, *LATENT_SHAPE)).astype(dtype))
        return image, encode_image(image, 2), noisy, embed_source(embedder, image)

    return _inputs


def test_timestep_embedding():
    """Sinusoidal embedding has sine and cosine halves."""
    emb = timestep_embedding(0, 8)
    np.testing.assert_array_equal(emb, [0, 0, 0, 0, 1, 1, 1, 1])
    assert timestep_embedding(10, 8, np.float64).dtype == np.float64


@pytest.mark.parametrize("mode", list(AttentionMode))
def test_output_shape_and_records(mode, tiny_config, denoiser_inputs):
    """Predicted noise has the noisy latent shape, only matching attention emits records."""
    config = tiny_config(mode)
    denoiser = Denoiser(config, np.random.default_rng(0))
    _, source_latent, noisy, embedding = denoiser_inputs()
    eps, records = denoiser(noisy, 10, source_latent, embedding)
    assert eps.shape == noisy.shape
    if mode is AttentionMode.MATCHING:
        assert [r.layer_id for r in records] == ["down0", "down1", "up1", "up0"]
        assert [(r.height_tokens, r.width_tokens) for r in records] == [(8, 8), (4, 4), (4, 4), (8, 8)]
    else:
        assert records == []


def test_denoise_latent_pair(tiny_config, denoiser_inputs):
    """``denoise`` maps a latent pair to a latent pair."""
    denoiser = Denoiser(tiny_config(), np.random.default_rng(0))
    _, source_latent, noisy, embedding = denoiser_inputs()
    eps, _ = denoiser.denoise(LatentPair.from_stacked(noisy, 2), 5, source_latent, embedding)
    assert isinstance(eps, LatentPair)
    assert eps.source.shape == LATENT_SHAPE


def test_parameter_counts_equal_across_modes(tiny_config):
    """Ablation models differ only in how the interaction branch is used."""
    counts = {mode: Denoiser(tiny_config(mode), np.random.default_rng(0)).parameter_count for mode in AttentionMode}
    assert len(set(counts.values())) == 1


def test_deterministic(tiny_config, denoiser_inputs):
    """Identical inputs and parameters give identical predictions."""
    denoiser = Denoiser(tiny_config(), np.random.default_rng(0))
    _, source_latent, noisy, embedding = denoiser_inputs()
    first, _ = denoiser(noisy, 100, source_latent, embedding)
    second, _ = denoiser(noisy, 100, source_latent, embedding)
    np.testing.assert_array_equal(first.data, second.data)


def test_zero_scale_control_is_identity(tiny_config, denoiser_inputs, random_image):
    """Control features with zero scales reproduce the unconditioned prediction."""
    config = tiny_config()
    rng = np.random.default_rng(0)
    denoiser = Denoiser(config, rng)
    control = ControlEncoder(1, config, rng).encode_signal(random_image(1, 16, 16))
    _, source_latent, noisy, embedding = denoiser_inputs()
    plain, _ = denoiser(noisy, 10, source_latent, embedding)
    controlled, _ = denoiser(noisy, 10, source_latent, embedding, control=control)
    assert np.abs(plain.data - controlled.data).max() < 1e-6


@pytest.mark.parametrize("mode", list(AttentionMode))
def test_source_frame_unaffected_by_signals(mode, tiny_config, denoiser_inputs, random_image):
    """Control features and drag points only change the target frame prediction."""
    config = tiny_config(mode)
    rng = np.random.default_rng(0)
    denoiser = Denoiser(config, rng)
    encoder = ControlEncoder(1, config, rng)
    for scale in encoder.scales.values():
        scale.assign(np.ones(1))
    control = encoder.encode_signal(random_image(1, 16, 16))
    points = DragPointSet((((1, 2), (9, 12)), ((14, 3), (4, 4))), 16, 16)
    _, source_latent, noisy, embedding = denoiser_inputs()

    plain, _ = denoiser(noisy, 10, source_latent, embedding)
    controlled, _ = denoiser(noisy, 10, source_latent, embedding, control=control)
    dragged, _ = denoiser(noisy, 10, source_latent, embedding, drag_points=points)
    np.testing.assert_array_equal(controlled.data[0], plain.data[0])
    np.testing.assert_array_equal(dragged.data[0], plain.data[0])
    assert not np.array_equal(controlled.data[1], plain.data[1])
    assert not np.array_equal(dragged.data[1], plain.data[1])


def test_invalid_inputs(tiny_config, denoiser_inputs):
    """Wrong shapes, negative steps and foreign drag points are rejected."""
    denoiser = Denoiser(tiny_config(), np.random.default_rng(0))
    _, source_latent, noisy, embedding = denoiser_inputs()
    with pytest.raises(ShapeError, match="denoise"):
        denoiser(Tensor(np.zeros((2, 12, 4, 4))), 10, source_latent, embedding)
    with pytest.raises(ValueError, match="negative"):
        denoiser(noisy, -1, source_latent, embedding)
    with pytest.raises(ValueError, match="image size"):
        denoiser(noisy, 10, source_latent, embedding, drag_points=DragPointSet((((0, 0), (1, 1)),), 32, 32))


def test_control_at_wrong_resolution(tiny_config, denoiser_inputs, random_image):
    """Control features of another configuration are rejected."""
    rng = np.random.default_rng(0)
    denoiser = Denoiser(tiny_config(), rng)
    other = tiny_config()
    other.attention_levels = [1]
    control = ControlEncoder(1, other, rng).encode_signal(random_image(1, 16, 16))
    _, source_latent, noisy, embedding = denoiser_inputs()
    with pytest.raises(ShapeError, match="control features"):
        denoiser(noisy, 10, source_latent, embedding, control=control)


@pytest.mark.parametrize("seed", range(20))
def test_denoiser_gradient(seed, tiny_config, denoiser_inputs):
    """Forward and backward through the denoiser agree with finite differences on sampled parameters."""
    rng = np.random.default_rng(seed)
    denoiser = Denoiser(tiny_config(), rng).astype(np.float64)
    _, source_latent, noisy, embedding = denoiser_inputs(np.float64)
    weights = Tensor(rng.standard_normal(noisy.shape))
    params = denoiser.state()
    names = rng.choice(sorted(params), size=6, replace=False)
    names = [*names, "down_sites.1.interaction.w_q"]

    def loss():
        eps, _ = denoiser(noisy, 50, source_latent, embedding)
        return F.sum_all(F.mul(eps, weights))

    report = grad_check(loss, {name: params[name] for name in names}, tolerance=1e-4, max_entries=4)
    assert report.passed, report.summary()


# >> Source embedder


def test_embedding_deterministic_and_finite(random_image):
    """Embeddings are deterministic and finite for constant images."""
    embedder = ImageEmbedder(2, 8, np.random.default_rng(0), hidden_channels=8)
    image = random_image(3, 16, 16)
    np.testing.assert_array_equal(embedder(image).tokens.data, embedder(image).tokens.data)
    for value in (0.0, 1.0):
        embedding = embed_source(embedder, np.full((3, 16, 16), value))
        assert embedding.num_tokens == 4
        assert np.isfinite(embedding.tokens.data).all()


def test_embedding_gradient(random_image):
    """A scalar head on the embedding passes the finite-difference check."""
    embedder = ImageEmbedder(2, 8, np.random.default_rng(0), hidden_channels=4).astype(np.float64)
    image = random_image(3, 16, 16)
    head = Tensor(np.random.default_rng(1).standard_normal((4, 8)))
    report = grad_check(lambda: F.sum_all(F.mul(embedder(image).tokens, head)), embedder.state(), max_entries=6)
    assert report.passed, report.summary()
