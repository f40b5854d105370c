"""Lossless space-to-depth latent space."""
from dataclasses import dataclass

import numpy as np

from pairedit.numerics import functional as F
from pairedit.numerics.tensor import ShapeError, Tensor, as_tensor


def _check_divisible(op: str, shape: tuple[int, ...], factor: int) -> None:
    if len(shape) != 3:
        raise ShapeError(op, f"expected [C, H, W], got {shape}")
    if factor < 1 or shape[1] % factor or shape[2] % factor:
        raise ValueError(f"{op}: image dims {shape[1]}x{shape[2]} not divisible by patch factor {factor}")


def patchify(image: Tensor | np.ndarray, factor: int) -> Tensor:
    """Rearrange [C, H, W] into [C * f**2, H / f, W / f].

    Output channel ``c * f**2 + i * f + j`` holds the pixel at offset ``(i, j)`` of every f x f patch
    of input channel c.

    Raises
    ------
    ValueError
        Image dims not divisible by the factor.
    """
    x = as_tensor(image)
    _check_divisible("patchify", x.shape, factor)
    channels, height, width = x.shape
    x = F.reshape(x, (channels, height // factor, factor, width // factor, factor))
    x = F.transpose(x, (0, 2, 4, 1, 3))
    return F.reshape(x, (channels * factor * factor, height // factor, width // factor))


def unpatchify(latent: Tensor | np.ndarray, factor: int) -> Tensor:
    """Inverse of ``patchify``.

    Raises
    ------
    ValueError
        Channel count not divisible by the squared factor.
    """
    x = as_tensor(latent)
    if x.ndim != 3 or x.shape[0] % (factor * factor):
        raise ValueError(f"unpatchify: {x.shape} is not a latent of patch factor {factor}")
    channels, h, w = x.shape
    base = channels // (factor * factor)
    x = F.reshape(x, (base, factor, factor, h, w))
    x = F.transpose(x, (0, 3, 1, 4, 2))
    return F.reshape(x, (base, h * factor, w * factor))


@dataclass
class LatentPair:
    """Source and target latents of one pair, stacked along the frame axis by ``stacked``."""

    source: Tensor
    target: Tensor
    patch_factor: int

    def __post_init__(self) -> None:
        """Check that both frames share their shape."""
        if self.source.shape != self.target.shape or self.source.ndim != 3:
            raise ShapeError("LatentPair", f"frames differ: {self.source.shape} vs {self.target.shape}")

    def stacked(self) -> Tensor:
        """Return the frames as one [2, C, h, w] tensor, source first."""
        return F.stack([self.source, self.target], axis=0)

    @classmethod
    def from_stacked(cls, frames: Tensor, patch_factor: int) -> "LatentPair":
        """Split a [2, C, h, w] tensor into a pair."""
        if frames.ndim != 4 or frames.shape[0] != 2:
            raise ShapeError("LatentPair", f"expected [2, C, h, w], got {frames.shape}")
        return cls(F.index(frames, 0), F.index(frames, 1), patch_factor)


def encode_image(image: np.ndarray, factor: int) -> Tensor:
    """Map a [3, H, W] image in [0, 1] to its latent in [-1, 1]."""
    image = np.asarray(image, dtype=np.float32)
    return patchify(2.0 * image - 1.0, factor)


def decode_latent(latent: Tensor | np.ndarray, factor: int) -> np.ndarray:
    """Map a latent back to an image clipped to [0, 1]."""
    pixels = unpatchify(as_tensor(latent), factor).data
    return np.clip((pixels + 1.0) / 2.0, 0.0, 1.0).astype(np.float32)


def encode_pair(source: np.ndarray, target: np.ndarray, factor: int) -> LatentPair:
    """Encode both images of a pair."""
    return LatentPair(encode_image(source, factor), encode_image(target, factor), factor)
