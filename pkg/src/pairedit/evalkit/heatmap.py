"""Export of matching attention rows as grayscale heatmaps."""
import os

import numpy as np

from pairedit.attention.attention import AttentionRecord
from pairedit.numerics.tensor import as_tensor
from pairedit.utilities.netpbm import write_pnm


def attention_row(record: AttentionRecord, query_token: int) -> np.ndarray:
    """Attention of one target token over the source token grid, shape [h, w].

    Raises
    ------
    ValueError
        Query token out of range.
    """
    if not 0 <= query_token < record.num_tokens:
        raise ValueError(f"Query token {query_token} outside of [0, {record.num_tokens})")
    row = as_tensor(record.a_match).data[query_token]
    return np.asarray(row, dtype=np.float64).reshape(record.height_tokens, record.width_tokens)


def heatmap_raster(record: AttentionRecord, query_token: int, image_size: tuple[int, int]) -> np.ndarray:
    """Min-max normalized attention row upsampled to the image size, uint8 [H, W].

    A row with all-equal weights maps to 0 everywhere.

    Raises
    ------
    ValueError
        Query token out of range or image size not a multiple of the token grid.
    """
    row = attention_row(record, query_token)
    height, width = image_size
    if height % record.height_tokens or width % record.width_tokens:
        raise ValueError(f"Image size {height}x{width} is not a multiple of the {row.shape} token grid")
    low, high = row.min(), row.max()
    normalized = (row - low) / (high - low) if high > low else np.zeros_like(row)
    levels = np.round(normalized * 255.0).astype(np.uint8)
    return np.repeat(np.repeat(levels, height // record.height_tokens, axis=0), width // record.width_tokens, axis=1)


def export_attention_heatmap(
    record: AttentionRecord,
    query_token: int,
    image_size: tuple[int, int],
    path: str | os.PathLike | None = None,
) -> np.ndarray:
    """Render the heatmap of a query token and optionally write it as PGM.

    Returns
    -------
        Heatmap raster, uint8 [H, W]
    """
    raster = heatmap_raster(record, query_token, image_size)
    if path is not None:
        write_pnm(path, raster)
    return raster
