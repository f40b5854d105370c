"""Exhaustive block-matching flow estimation."""
import numpy as np

from pairedit.interfaces.enums import FlowDirection
from pairedit.interfaces.sample_pair import FlowField


def _as_channels(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        return image[None]
    if image.ndim != 3:
        raise ValueError(f"Expected [H, W] or [C, H, W] image, got shape {image.shape}")
    return image


def _shifted(image: np.ndarray, dx: int, dy: int) -> np.ndarray:
    # out[:, y, x] = image[:, y + dy, x + dx], NaN where the position leaves the image
    _, height, width = image.shape
    out = np.full_like(image, np.nan)
    ys, yt = slice(max(dy, 0), height + min(dy, 0)), slice(max(-dy, 0), height + min(-dy, 0))
    xs, xt = slice(max(dx, 0), width + min(dx, 0)), slice(max(-dx, 0), width + min(-dx, 0))
    out[:, yt, xt] = image[:, ys, xs]
    return out


def _block_sums(cost: np.ndarray, block: int) -> np.ndarray:
    height, width = cost.shape
    rows, cols = -(-height // block), -(-width // block)
    padded = np.zeros((rows * block, cols * block))
    padded[:height, :width] = cost
    sums = padded.reshape(rows, block, cols, block).sum(axis=(1, 3))
    return np.where(np.isnan(sums), np.inf, sums)


def estimate_flow_block_matching(
    source: np.ndarray, target: np.ndarray, block: int = 4, radius: int = 16
) -> FlowField:
    """Estimate target-to-source flow by exhaustive block matching.

    Every ``block`` x ``block`` block of the target takes the integer displacement within
    ``radius`` (per axis) which minimizes the sum of squared differences to the source. Blocks
    whose displaced window leaves the source get infinite cost. Displacements are visited by
    increasing length and only strict improvements are taken, so ties resolve toward zero.

    Parameters
    ----------
    source
        Source image, [H, W] or [C, H, W]
    target
        Target image of the same shape
    block, optional
        Block edge length in pixels, by default 4
    radius, optional
        Search radius in pixels, by default 16

    Returns
    -------
        Flow in target-to-source direction, invalid where no displacement has finite cost

    Raises
    ------
    ValueError
        Shape mismatch, non-positive block or radius not smaller than the image.
    """
    src, tgt = _as_channels(source), _as_channels(target)
    if src.shape != tgt.shape:
        raise ValueError(f"Source {src.shape} and target {tgt.shape} differ")
    _, height, width = src.shape
    if block < 1:
        raise ValueError(f"Block size must be positive, got {block}")
    if not 0 <= radius < min(height, width):
        raise ValueError(f"Search radius {radius} must be smaller than the image size {height}x{width}")

    offsets = sorted(
        ((dx, dy) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)),
        key=lambda d: (d[0] ** 2 + d[1] ** 2, d[1], d[0]),
    )
    best_cost = np.full((-(-height // block), -(-width // block)), np.inf)
    best = np.zeros((2, *best_cost.shape))
    for dx, dy in offsets:
        cost = _block_sums(((tgt - _shifted(src, dx, dy)) ** 2).sum(axis=0), block)
        better = cost < best_cost
        best_cost[better] = cost[better]
        best[0][better], best[1][better] = dx, dy

    displacement = np.repeat(np.repeat(best, block, axis=1), block, axis=2)[:, :height, :width]
    valid = np.repeat(np.repeat(np.isfinite(best_cost), block, axis=0), block, axis=1)[:height, :width]
    return FlowField(displacement, FlowDirection.TARGET_TO_SOURCE, valid)
