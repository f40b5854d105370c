"""Trainable source image embedder consumed by the cross-attention of every attention site."""
from dataclasses import dataclass

import numpy as np

from pairedit.backbone.latent import encode_image
from pairedit.numerics import functional as F
from pairedit.numerics.modules import Conv2d, LayerNorm, Module
from pairedit.numerics.tensor import Tensor


@dataclass
class ImageEmbedding:
    """Embedding tokens of the source image."""

    tokens: Tensor
    """Shape [n_emb, embed_dim]."""

    @property
    def num_tokens(self) -> int:
        """Number of embedding tokens."""
        return self.tokens.shape[0]


class ImageEmbedder(Module):
    """Two strided convolutions over the patchified image followed by layer normalization."""

    def __init__(self, patch_factor: int, embed_dim: int, rng: np.random.Generator, hidden_channels: int = 32):
        self.patch_factor = patch_factor
        in_channels = 3 * patch_factor**2
        self.conv_in = Conv2d(in_channels, hidden_channels, rng, stride=2)
        self.conv_out = Conv2d(hidden_channels, embed_dim, rng, stride=2)
        self.norm = LayerNorm(embed_dim)

    def __call__(self, image: np.ndarray) -> ImageEmbedding:
        """Embed a [3, H, W] image with values in [0, 1]."""
        x = encode_image(image, self.patch_factor)
        x = F.reshape(x, (1, *x.shape))
        if x.dtype != self.conv_in.weight.dtype:
            x = Tensor(x.data.astype(self.conv_in.weight.dtype))
        x = self.conv_out(F.silu(self.conv_in(x)))
        _, channels, height, width = x.shape
        tokens = F.transpose(F.reshape(x, (channels, height * width)), (1, 0))
        return ImageEmbedding(self.norm(tokens))


def embed_source(embedder: ImageEmbedder, image: np.ndarray) -> ImageEmbedding:
    """Embed a source image, deterministic given the embedder parameters."""
    return embedder(image)
