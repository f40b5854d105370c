"""Editing signals extracted from the motion between source and target."""
import numpy as np
from scipy import ndimage

from pairedit.interfaces.enums import FlowDirection
from pairedit.interfaces.sample_pair import DragPointSet, FlowField, TrackSet


class NoMotionError(ValueError):
    """No pixel with nonzero flow and a visible track to sample drag points from."""


def _require_direction(flow: FlowField, direction: FlowDirection) -> None:
    if flow.direction is not direction:
        raise ValueError(f"Expected {direction.value} flow, got {flow.direction.value}")


def sketch_from_flow(flow: FlowField, threshold: float = 0.5) -> np.ndarray:
    """Binary sketch of the moved objects' outlines at their target position.

    The Sobel gradient magnitude of the flow magnitude field is thresholded at ``threshold``
    times its maximum. A field without gradient yields an empty sketch.

    Parameters
    ----------
    flow
        Target-to-source flow
    threshold, optional
        Relative threshold, by default 0.5

    Returns
    -------
        Raster of shape [1, H, W] with values in {0, 1}
    """
    _require_direction(flow, FlowDirection.TARGET_TO_SOURCE)
    magnitude = flow.magnitude
    edges = np.hypot(ndimage.sobel(magnitude, axis=0), ndimage.sobel(magnitude, axis=1))
    peak = edges.max()
    if peak <= 0:
        return np.zeros((1, *magnitude.shape), dtype=np.float32)
    return (edges > threshold * peak).astype(np.float32)[None]


def sample_drag_points(
    flow: FlowField, tracks: TrackSet, k: int, seed: int | np.random.Generator = 0
) -> DragPointSet:
    """Sample drag point pairs with probability proportional to the flow magnitude.

    ``k`` target pixels are drawn without replacement among pixels with a visible track, each
    paired with the nearest pixel to its tracked source position. Fewer pairs are returned when
    fewer than ``k`` pixels carry weight.

    Raises
    ------
    NoMotionError
        No pixel with nonzero flow and a visible track.
    ValueError
        ``k`` smaller than one or flow and tracks of different size.
    """
    _require_direction(flow, FlowDirection.TARGET_TO_SOURCE)
    if k < 1:
        raise ValueError(f"At least one drag point required, got {k}")
    if flow.shape != tracks.shape:
        raise ValueError(f"Flow {flow.shape} and tracks {tracks.shape} differ in size")
    weights = (flow.magnitude * tracks.visible).ravel()
    total = weights.sum()
    if total <= 0:
        raise NoMotionError("No moving pixel with a visible track")

    rng = np.random.default_rng(seed)
    count = min(k, int(np.count_nonzero(weights)))
    chosen = rng.choice(weights.size, size=count, replace=False, p=weights / total)
    height, width = flow.shape
    pairs = []
    for index in chosen:
        y, x = divmod(int(index), width)
        mx, my, _ = tracks.at(x, y)
        source = (int(np.floor(mx + 0.5)), int(np.floor(my + 0.5)))
        pairs.append((source, (x, y)))
    return DragPointSet(tuple(pairs), height, width)


def softmax_splat(
    source_image: np.ndarray, flow: FlowField, importance: np.ndarray | None = None
) -> np.ndarray:
    """Forward warp the source image with softmax weighted bilinear splatting.

    Every valid source pixel contributes to the four target cells around its displaced position
    with weight ``exp(importance) * bilinear``; each cell is the weighted mean of its contributions.
    Cells without contribution keep the source value.

    Parameters
    ----------
    source_image
        Image of shape [C, H, W]
    flow
        Source-to-target flow
    importance, optional
        Per-pixel importance of shape [H, W], constant (average splatting) if None

    Returns
    -------
        Warped image of shape [C, H, W]
    """
    _require_direction(flow, FlowDirection.SOURCE_TO_TARGET)
    image = np.asarray(source_image, dtype=np.float64)
    channels, height, width = image.shape
    if flow.shape != (height, width):
        raise ValueError(f"Flow {flow.shape} does not match image {height}x{width}")
    importance = np.zeros((height, width)) if importance is None else np.asarray(importance, dtype=np.float64)
    if importance.shape != (height, width):
        raise ValueError(f"Importance {importance.shape} does not match image {height}x{width}")

    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    valid = flow.valid
    tx, ty = (x + flow.displacement[0])[valid], (y + flow.displacement[1])[valid]
    values = image[:, valid]
    # Shift by the maximum for a stable exponent, the ratio is unaffected
    weight = np.exp(importance[valid] - importance[valid].max()) if valid.any() else np.zeros(0)
    x0, y0 = np.floor(tx), np.floor(ty)
    fx, fy = tx - x0, ty - y0

    numerator = np.zeros((channels, height * width))
    denominator = np.zeros(height * width)
    for ox, oy, bilinear in (
        (0, 0, (1 - fx) * (1 - fy)),
        (1, 0, fx * (1 - fy)),
        (0, 1, (1 - fx) * fy),
        (1, 1, fx * fy),
    ):
        cx, cy = (x0 + ox).astype(np.int64), (y0 + oy).astype(np.int64)
        keep = (bilinear > 0) & (cx >= 0) & (cx < width) & (cy >= 0) & (cy < height)
        cells = cy[keep] * width + cx[keep]
        w = weight[keep] * bilinear[keep]
        np.add.at(denominator, cells, w)
        for c in range(channels):
            np.add.at(numerator[c], cells, w * values[c, keep])

    out = image.reshape(channels, -1).copy()
    filled = denominator > 0
    out[:, filled] = numerator[:, filled] / denominator[filled]
    return out.reshape(channels, height, width).astype(np.float32)
