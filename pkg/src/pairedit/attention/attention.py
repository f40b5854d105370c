"""Spatial, temporal, cross-frame and matching attention on token grids.

All variants use the row-vector convention ``z @ W`` and scaled dot-product scores with
the per-head dimension in the square-root denominator.
"""
from dataclasses import dataclass

import numpy as np

from pairedit.numerics import functional as F
from pairedit.numerics.modules import Module
from pairedit.numerics.tensor import DEFAULT_DTYPE, Param, ShapeError, Tensor


@dataclass
class TokenGrid:
    """Tokens of one frame on a ``height_tokens x width_tokens`` grid.

    Token i sits at cell ``(i // width_tokens, i % width_tokens)``.
    """

    height_tokens: int
    width_tokens: int
    tokens: Tensor
    """Token features, shape [N, d]."""

    def __post_init__(self) -> None:
        """Check the token count.

        Raises
        ------
        ShapeError
            Tokens are not [height_tokens * width_tokens, d].
        """
        if self.tokens.ndim != 2 or self.tokens.shape[0] != self.height_tokens * self.width_tokens:
            raise ShapeError(
                "TokenGrid", f"tokens {self.tokens.shape} do not fit a {self.height_tokens}x{self.width_tokens} grid"
            )

    @property
    def num_tokens(self) -> int:
        """Number of tokens N."""
        return self.height_tokens * self.width_tokens

    @property
    def dim(self) -> int:
        """Token dimension d."""
        return self.tokens.shape[1]

    def cell(self, index: int) -> tuple[int, int]:
        """Return the (row, column) of a token index."""
        return divmod(index, self.width_tokens)

    def with_tokens(self, tokens: Tensor) -> "TokenGrid":
        """Return a grid of the same dims carrying other tokens."""
        return TokenGrid(self.height_tokens, self.width_tokens, tokens)


class AttentionWeights(Module):
    """Query, key, value and output projections, each [d, d]."""

    def __init__(self, dim: int, head_count: int, rng: np.random.Generator | None = None):
        """Construct randomly initialized projections.

        Parameters
        ----------
        dim
            Token dimension d
        head_count
            Number of heads, must divide d
        rng, optional
            Random generator of the initialization, by default seeded with 0

        Raises
        ------
        ValueError
            Head count does not divide the dimension.
        """
        if head_count < 1 or dim % head_count:
            raise ValueError(f"Head count {head_count} does not divide dimension {dim}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.head_count = head_count
        scale = 1.0 / np.sqrt(dim)
        self.w_q = Param((rng.standard_normal((dim, dim)) * scale).astype(DEFAULT_DTYPE))
        self.w_k = Param((rng.standard_normal((dim, dim)) * scale).astype(DEFAULT_DTYPE))
        self.w_v = Param((rng.standard_normal((dim, dim)) * scale).astype(DEFAULT_DTYPE))
        self.w_out = Param((rng.standard_normal((dim, dim)) * scale).astype(DEFAULT_DTYPE))

    @classmethod
    def from_arrays(
        cls, w_q: np.ndarray, w_k: np.ndarray, w_v: np.ndarray, w_out: np.ndarray, head_count: int = 1
    ) -> "AttentionWeights":
        """Construct weights from explicit projection matrices."""
        dim = np.asarray(w_q).shape[0]
        weights = cls(dim, head_count)
        for param, values in zip((weights.w_q, weights.w_k, weights.w_v, weights.w_out), (w_q, w_k, w_v, w_out)):
            values = np.asarray(values)
            if values.shape != (dim, dim):
                raise ShapeError("AttentionWeights", f"projection shape {values.shape} differs from {(dim, dim)}")
            param.data = np.array(values, dtype=values.dtype if values.dtype == np.float64 else DEFAULT_DTYPE)
            param.zero_grad()
        return weights

    @property
    def dim(self) -> int:
        """Token dimension d."""
        return self.w_q.shape[0]


@dataclass
class AttentionRecord:
    """Head-averaged matching attention map of one attention site."""

    layer_id: str
    a_match: Tensor
    """Attention of target queries over source keys, shape [N, N]."""

    height_tokens: int
    width_tokens: int

    @property
    def num_tokens(self) -> int:
        """Number of tokens N."""
        return self.height_tokens * self.width_tokens


def _split_heads(x: Tensor, heads: int) -> Tensor:
    batch, n, dim = x.shape
    x = F.reshape(x, (batch, n, heads, dim // heads))
    x = F.transpose(x, (0, 2, 1, 3))
    return F.reshape(x, (batch * heads, n, dim // heads))


def _project(x: Tensor, w: Param) -> Tensor:
    batch, n, dim = x.shape
    return F.reshape(F.matmul(F.reshape(x, (batch * n, dim)), w), (batch, n, w.shape[1]))


def multihead_attention(queries: Tensor, context: Tensor, w: AttentionWeights) -> tuple[Tensor, Tensor]:
    """Batched multi-head scaled dot-product attention.

    Parameters
    ----------
    queries
        Query tokens, shape [B, Nq, d]
    context
        Key and value tokens, shape [B, Nk, d]
    w
        Projections

    Returns
    -------
        Output of shape [B, Nq, d] and attention weights of shape [B, heads, Nq, Nk]

    Raises
    ------
    ShapeError
        Inconsistent batch or token dimension.
    """
    if queries.ndim != 3 or context.ndim != 3:
        raise ShapeError("attention", f"expected [B, N, d] tokens, got {queries.shape} and {context.shape}")
    if queries.shape[0] != context.shape[0] or queries.shape[2] != w.dim or context.shape[2] != w.dim:
        raise ShapeError("attention", f"queries {queries.shape} and context {context.shape} do not fit d={w.dim}")
    batch, n_q, dim = queries.shape
    n_k = context.shape[1]
    heads = w.head_count
    d_head = dim // heads

    q = _split_heads(_project(queries, w.w_q), heads)
    k = _split_heads(_project(context, w.w_k), heads)
    v = _split_heads(_project(context, w.w_v), heads)

    scores = F.scale(F.matmul(q, F.transpose(k, (0, 2, 1))), 1.0 / np.sqrt(d_head))
    weights = F.softmax(scores, axis=-1)
    out = F.matmul(weights, v)
    out = F.transpose(F.reshape(out, (batch, heads, n_q, d_head)), (0, 2, 1, 3))
    out = F.reshape(out, (batch, n_q, dim))
    return _project(out, w.w_out), F.reshape(weights, (batch, heads, n_q, n_k))


def _require_same_grid(op: str, a: TokenGrid, b: TokenGrid) -> None:
    if (a.height_tokens, a.width_tokens, a.dim) != (b.height_tokens, b.width_tokens, b.dim):
        raise ShapeError(
            op,
            f"grids differ: {a.height_tokens}x{a.width_tokens}x{a.dim} vs {b.height_tokens}x{b.width_tokens}x{b.dim}",
        )


def _batched(grid: TokenGrid) -> Tensor:
    return F.reshape(grid.tokens, (1, grid.num_tokens, grid.dim))


def spatial_attention(frame: TokenGrid, w: AttentionWeights) -> TokenGrid:
    """Self-attention among the tokens of one frame."""
    out, _ = multihead_attention(_batched(frame), _batched(frame), w)
    return frame.with_tokens(F.reshape(out, frame.tokens.shape))


def temporal_attention(two_frames: tuple[TokenGrid, TokenGrid], w: AttentionWeights) -> tuple[TokenGrid, TokenGrid]:
    """Attention across the two-frame axis, independently per token location."""
    first, second = two_frames
    _require_same_grid("temporal_attention", first, second)
    # [N, 2, d]: every location is a batch entry with a sequence of two frames
    stacked = F.stack([first.tokens, second.tokens], axis=1)
    out, _ = multihead_attention(stacked, stacked, w)
    return (
        first.with_tokens(F.index(out, (slice(None), 0))),
        second.with_tokens(F.index(out, (slice(None), 1))),
    )


def cross_frame_attention(target: TokenGrid, source: TokenGrid, w: AttentionWeights) -> TokenGrid:
    """Target queries attend over the concatenated ``[source; target]`` tokens (2N keys)."""
    _require_same_grid("cross_frame_attention", target, source)
    keys = F.concat([source.tokens, target.tokens], axis=0)
    out, _ = multihead_attention(_batched(target), F.reshape(keys, (1, 2 * target.num_tokens, target.dim)), w)
    return target.with_tokens(F.reshape(out, target.tokens.shape))


def matching_attention(
    target: TokenGrid, source: TokenGrid, w: AttentionWeights, layer_id: str = ""
) -> tuple[TokenGrid, AttentionRecord]:
    """Target queries attend over source keys and values only.

    Returns
    -------
        Output tokens on the target grid and the record of the head-averaged attention map
    """
    _require_same_grid("matching_attention", target, source)
    out, weights = multihead_attention(_batched(target), _batched(source), w)
    a_match = F.mean_axis(F.index(weights, 0), axis=0)
    record = AttentionRecord(layer_id, a_match, target.height_tokens, target.width_tokens)
    return target.with_tokens(F.reshape(out, target.tokens.shape)), record


def fuse_outputs(o_spatial_pair: tuple[TokenGrid, TokenGrid], o_match: TokenGrid) -> tuple[TokenGrid, TokenGrid]:
    """Add the frame-interaction output to the target frame only, zero padding the source frame.

    The source grid object is returned unchanged.
    """
    source, target = o_spatial_pair
    _require_same_grid("fuse_outputs", target, o_match)
    _require_same_grid("fuse_outputs", source, target)
    return source, target.with_tokens(F.add(target.tokens, o_match.tokens))


def init_matching_from_spatial(spatial_w: AttentionWeights) -> AttentionWeights:
    """Return value-equal copies of spatial attention weights with independent storage."""
    return AttentionWeights.from_arrays(
        spatial_w.w_q.data.copy(),
        spatial_w.w_k.data.copy(),
        spatial_w.w_v.data.copy(),
        spatial_w.w_out.data.copy(),
        head_count=spatial_w.head_count,
    )
