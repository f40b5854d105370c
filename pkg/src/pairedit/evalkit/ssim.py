"""Structural similarity of images."""
import numpy as np
from skimage.metrics import structural_similarity

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
"""RGB weights of the luma channel."""

GAUSSIAN_SIGMA = 1.5
WINDOW_SIZE = 11


def to_luma(image: np.ndarray) -> np.ndarray:
    """Reduce a [3, H, W] image to luma, grayscale [H, W] or [1, H, W] input is passed through."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        return image
    if image.ndim == 3 and image.shape[0] == 1:
        return image[0]
    if image.ndim == 3 and image.shape[0] == 3:
        return np.tensordot(LUMA_WEIGHTS, image, axes=1)
    raise ValueError(f"Expected [H, W], [1, H, W] or [3, H, W] image, got {image.shape}")


def ssim(image_a: np.ndarray, image_b: np.ndarray, k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean local SSIM with an 11 x 11 Gaussian window (sigma 1.5) on luma, unit dynamic range.

    Parameters
    ----------
    image_a, image_b
        Images with values in [0, 1] and identical shape
    k1, k2, optional
        Stabilizing constants, ``C1 = k1**2`` and ``C2 = k2**2``

    Returns
    -------
        SSIM in [-1, 1]

    Raises
    ------
    ValueError
        Images differ in shape.
    """
    a, b = np.asarray(image_a), np.asarray(image_b)
    if a.shape != b.shape:
        raise ValueError(f"Images differ in shape: {a.shape} vs {b.shape}")
    luma_a, luma_b = to_luma(a), to_luma(b)
    if min(luma_a.shape) < WINDOW_SIZE:
        raise ValueError(f"Images must be at least {WINDOW_SIZE} pixels in both dims, got {luma_a.shape}")
    value = structural_similarity(
        luma_a,
        luma_b,
        data_range=1.0,
        gaussian_weights=True,
        sigma=GAUSSIAN_SIGMA,
        use_sample_covariance=False,
        K1=k1,
        K2=k2,
    )
    return float(value)
