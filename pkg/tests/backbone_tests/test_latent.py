"""Test the space-to-depth latent space."""
import numpy as np
import pytest

from pairedit.backbone.latent import (
    LatentPair,
    decode_latent,
    encode_image,
    encode_pair,
    patchify,
    unpatchify,
)
from pairedit.numerics.tensor import ShapeError


def test_factor_one_identity(rng):
    """Patch factor one does not change the image."""
    image = rng.standard_normal((3, 4, 6))
    np.testing.assert_array_equal(patchify(image, 1).data, image)


def test_channel_order():
    """Channel ``i * f + j`` holds offset (i, j) of each patch."""
    a, b, c, d = 1.0, 2.0, 3.0, 4.0
    latent = patchify(np.array([[[a, b], [c, d]]]), 2)
    assert latent.shape == (4, 1, 1)
    np.testing.assert_array_equal(latent.data.ravel(), [a, b, c, d])


@pytest.mark.parametrize("factor", [1, 2, 4])
@pytest.mark.parametrize("channels", [1, 3])
def test_roundtrip_bit_exact(factor, channels, rng):
    """Unpatchify inverts patchify exactly."""
    image = rng.standard_normal((channels, 8, 16)).astype(np.float32)
    latent = patchify(image, factor)
    assert latent.shape == (channels * factor**2, 8 // factor, 16 // factor)
    np.testing.assert_array_equal(unpatchify(latent, factor).data, image)


def test_indivisible_rejected():
    """Image dims must be divisible by the factor."""
    with pytest.raises(ValueError, match="not divisible"):
        patchify(np.zeros((3, 6, 8)), 4)
    with pytest.raises(ValueError, match="patch factor"):
        unpatchify(np.zeros((5, 2, 2)), 2)


def test_encode_decode_images(random_image):
    """Images on the 8 bit grid survive the latent roundtrip."""
    image = np.round(random_image(3, 8, 8) * 255) / 255
    latent = encode_image(image, 2)
    assert latent.data.min() >= -1 and latent.data.max() <= 1
    np.testing.assert_allclose(decode_latent(latent, 2), image, atol=1e-6)


def test_decode_clips():
    """Decoded values are clipped to the unit range."""
    decoded = decode_latent(np.full((4, 1, 1), 3.0), 2)
    assert decoded.max() == 1.0


def test_latent_pair(random_image):
    """Pairs stack source first and split back."""
    pair = encode_pair(random_image(3, 8, 8), random_image(3, 8, 8), 2)
    stacked = pair.stacked()
    assert stacked.shape == (2, 12, 4, 4)
    np.testing.assert_array_equal(stacked.data[0], pair.source.data)
    back = LatentPair.from_stacked(stacked, 2)
    np.testing.assert_array_equal(back.target.data, pair.target.data)


def test_latent_pair_shape_mismatch(random_image):
    """Both frames share their shape."""
    with pytest.raises(ShapeError, match="LatentPair"):
        LatentPair(encode_image(random_image(3, 8, 8), 2), encode_image(random_image(3, 8, 8), 4), 2)
