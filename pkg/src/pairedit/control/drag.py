"""Drag point injection by copying source tokens onto target token cells."""
import numpy as np

from pairedit.attention.attention import TokenGrid
from pairedit.interfaces.sample_pair import DragPointSet
from pairedit.numerics import functional as F


def drag_cells(
    points: DragPointSet, stride: int, height_tokens: int, width_tokens: int
) -> tuple[np.ndarray, np.ndarray]:
    """Map drag pairs to (source token, target token) indices of a grid with the given pixel stride.

    Pairs are taken in canonical (sorted) order.

    Raises
    ------
    ValueError
        A pixel maps to a cell outside of the token grid.
    """
    src_cells, tgt_cells = [], []
    for (sx, sy), (tx, ty) in points.canonical():
        for x, y in ((sx, sy), (tx, ty)):
            if x // stride >= width_tokens or y // stride >= height_tokens:
                raise ValueError(f"Drag point ({x}, {y}) outside of the {height_tokens}x{width_tokens} token grid")
        src_cells.append((sy // stride) * width_tokens + sx // stride)
        tgt_cells.append((ty // stride) * width_tokens + tx // stride)
    return np.asarray(src_cells, dtype=np.int64), np.asarray(tgt_cells, dtype=np.int64)


def drag_token_inject(
    pair: tuple[TokenGrid, TokenGrid], points: DragPointSet, stride: int
) -> tuple[TokenGrid, TokenGrid]:
    """Add the source-frame token at each source cell to the target-frame token at its target cell.

    Tokens are copied from the same block output that is modified. Several pairs hitting one
    target cell are summed. The source grid object is returned unchanged.

    Parameters
    ----------
    pair
        (source, target) token grids at the output of an attention block
    points
        Drag pairs in pixel coordinates
    stride
        Pixel stride of one token of this grid

    Returns
    -------
        (source, target) token grids
    """
    source, target = pair
    if len(points) == 0:
        return pair
    src_cells, tgt_cells = drag_cells(points, stride, target.height_tokens, target.width_tokens)
    copied = F.scatter_add_rows(F.gather_rows(source.tokens, src_cells), tgt_cells, target.num_tokens)
    return source, target.with_tokens(F.add(target.tokens, copied))
