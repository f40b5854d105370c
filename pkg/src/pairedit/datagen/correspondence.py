"""Token correspondences between target and source from pixel tracks."""
from collections.abc import Iterable

import numpy as np

from pairedit.interfaces.sample_pair import NO_SOURCE, Correspondence, TrackSet


def token_centers(stride: int, height_tokens: int, width_tokens: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixel coordinates (x, y) of the token centers in row-major token order."""
    rows, cols = np.divmod(np.arange(height_tokens * width_tokens), width_tokens)
    return cols * stride + stride // 2, rows * stride + stride // 2


def correspondence_at_stride(tracks: TrackSet, stride: int) -> Correspondence:
    """Correspondence of the token grid with the given pixel stride.

    Target token i is matched to the source token containing the rounded track of its center
    pixel. Tokens whose center track is invisible or lands outside the token grid are invisible.
    """
    if stride < 1:
        raise ValueError(f"Token stride must be positive, got {stride}")
    height, width = tracks.shape
    height_tokens, width_tokens = height // stride, width // stride
    cx, cy = token_centers(stride, height_tokens, width_tokens)
    mx, my = tracks.matched[0, cy, cx], tracks.matched[1, cy, cx]
    col = np.floor(mx + 0.5).astype(np.int64) // stride
    row = np.floor(my + 0.5).astype(np.int64) // stride
    visible = tracks.visible[cy, cx] & (col >= 0) & (col < width_tokens) & (row >= 0) & (row < height_tokens)
    source_index = np.where(visible, row * width_tokens + col, NO_SOURCE)
    return Correspondence(source_index, visible, height_tokens, width_tokens)


def build_correspondence(tracks: TrackSet, strides: Iterable[int]) -> dict[int, Correspondence]:
    """Correspondences for every token stride, keyed by stride."""
    return {int(stride): correspondence_at_stride(tracks, int(stride)) for stride in sorted(set(strides))}
