"""Attention variants of the two-frame denoiser."""
from pairedit.attention.attention import (
    AttentionRecord,
    AttentionWeights,
    TokenGrid,
    cross_frame_attention,
    fuse_outputs,
    init_matching_from_spatial,
    matching_attention,
    multihead_attention,
    spatial_attention,
    temporal_attention,
)

__all__ = [
    "AttentionRecord",
    "AttentionWeights",
    "TokenGrid",
    "cross_frame_attention",
    "fuse_outputs",
    "init_matching_from_spatial",
    "matching_attention",
    "multihead_attention",
    "spatial_attention",
    "temporal_attention",
]
