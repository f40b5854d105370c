"""Two-frame U-Net denoiser with attention sites."""
import logging

import numpy as np

from pairedit.attention.attention import (
    AttentionRecord,
    AttentionWeights,
    TokenGrid,
    cross_frame_attention,
    fuse_outputs,
    init_matching_from_spatial,
    matching_attention,
    multihead_attention,
    temporal_attention,
)
from pairedit.backbone.embedder import ImageEmbedding
from pairedit.backbone.latent import LatentPair
from pairedit.control.drag import drag_token_inject
from pairedit.control.encoder import ControlFeatures, inject_target_only
from pairedit.interfaces.enums import AttentionMode
from pairedit.interfaces.parameters import BackboneConfig
from pairedit.interfaces.sample_pair import DragPointSet
from pairedit.numerics import functional as F
from pairedit.numerics.modules import Conv2d, GroupNorm, LayerNorm, Linear, Module
from pairedit.numerics.tensor import ShapeError, Tensor

log = logging.getLogger("UNet")


def timestep_embedding(t: float, dim: int, dtype: np.dtype | type = np.float32) -> np.ndarray:
    """Sinusoidal embedding of a noise step, shape [dim]."""
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / half)
    args = float(t) * freqs
    return np.concatenate([np.sin(args), np.cos(args)]).astype(dtype)


class ResBlock(Module):
    """Residual block with noise-level conditioning."""

    def __init__(self, in_channels: int, out_channels: int, temb_dim: int, groups: int, rng: np.random.Generator):
        self.norm_in = GroupNorm(groups, in_channels)
        self.conv_in = Conv2d(in_channels, out_channels, rng)
        self.temb = Linear(temb_dim, out_channels, rng)
        self.norm_out = GroupNorm(groups, out_channels)
        self.conv_out = Conv2d(out_channels, out_channels, rng)
        self.skip = Conv2d(in_channels, out_channels, rng, kernel_size=1) if in_channels != out_channels else None

    def __call__(self, x: Tensor, temb: Tensor) -> Tensor:
        """Apply the block, ``temb`` has shape [1, temb_dim]."""
        h = self.conv_in(F.silu(self.norm_in(x)))
        h = F.add_bias(h, F.reshape(self.temb(F.silu(temb)), (h.shape[1],)), axis=1)
        h = self.conv_out(F.silu(self.norm_out(h)))
        skip = self.skip(x) if self.skip is not None else x
        return F.add(skip, h)


class AttentionSite(Module):
    """Spatial attention, frame interaction, cross-attention to the source embedding and a feed-forward layer.

    The frame-interaction branch starts as a copy of the spatial weights in every mode and only
    contributes to the target frame.
    """

    def __init__(
        self,
        layer_id: str,
        channels: int,
        config: BackboneConfig,
        stride: int,
        rng: np.random.Generator,
    ):
        self.layer_id = layer_id
        self.mode = config.attention_mode
        self.stride = stride
        self.norm_spatial = LayerNorm(channels)
        self.spatial = AttentionWeights(channels, config.head_count, rng)
        self.interaction = init_matching_from_spatial(self.spatial)
        self.context = Linear(config.embed_dim, channels, rng)
        self.norm_cross = LayerNorm(channels)
        self.cross = AttentionWeights(channels, config.head_count, rng)
        self.norm_ff = LayerNorm(channels)
        self.ff_in = Linear(channels, 2 * channels, rng)
        self.ff_out = Linear(2 * channels, channels, rng)

    def _interaction(self, source: TokenGrid, target: TokenGrid) -> tuple[TokenGrid, AttentionRecord | None]:
        if self.mode is AttentionMode.MATCHING:
            return matching_attention(target, source, self.interaction, layer_id=self.layer_id)
        if self.mode is AttentionMode.CROSSFRAME:
            return cross_frame_attention(target, source, self.interaction), None
        _, temporal_target = temporal_attention((source, target), self.interaction)
        return temporal_target, None

    def __call__(
        self, x: Tensor, embedding: ImageEmbedding, drag_points: DragPointSet | None = None
    ) -> tuple[Tensor, AttentionRecord | None]:
        """Apply the site to [2, C, h, w] features of both frames."""
        frames, channels, height, width = x.shape
        n = height * width
        tokens = F.transpose(F.reshape(x, (frames, channels, n)), (0, 2, 1))

        normed = self.norm_spatial(tokens)
        o_spatial, _ = multihead_attention(normed, normed, self.spatial)
        o_frame, record = self._interaction(
            TokenGrid(height, width, F.index(normed, 0)), TokenGrid(height, width, F.index(normed, 1))
        )
        o_source, o_target = fuse_outputs(
            (
                TokenGrid(height, width, F.index(o_spatial, 0)),
                TokenGrid(height, width, F.index(o_spatial, 1)),
            ),
            o_frame,
        )
        tokens = F.add(tokens, F.stack([o_source.tokens, o_target.tokens], axis=0))

        context = self.context(embedding.tokens)
        context = F.stack([context, context], axis=0)
        o_cross, _ = multihead_attention(self.norm_cross(tokens), context, self.cross)
        tokens = F.add(tokens, o_cross)
        tokens = F.add(tokens, self.ff_out(F.silu(self.ff_in(self.norm_ff(tokens)))))

        if drag_points is not None and len(drag_points):
            source, target = drag_token_inject(
                (TokenGrid(height, width, F.index(tokens, 0)), TokenGrid(height, width, F.index(tokens, 1))),
                drag_points,
                self.stride,
            )
            tokens = F.stack([source.tokens, target.tokens], axis=0)

        out = F.reshape(F.transpose(tokens, (0, 2, 1)), (frames, channels, height, width))
        return out, record


class Denoiser(Module):
    """U-Net over per-frame features predicting the noise of both frames."""

    def __init__(self, config: BackboneConfig, rng: np.random.Generator):
        """Construct the network.

        Parameters
        ----------
        config
            Architecture
        rng
            Random generator of the initialization
        """
        self.config = config
        levels = len(config.channel_multipliers)
        base = config.base_channels
        temb_dim = 4 * base
        groups = config.group_count
        self.temb_in = Linear(base, temb_dim, rng)
        self.temb_out = Linear(temb_dim, temb_dim, rng)
        self.stem = Conv2d(2 * config.latent_channels, base, rng)

        self.down_blocks: list[ResBlock] = []
        self.down_sites: dict[str, AttentionSite] = {}
        self.downsamplers: list[Conv2d] = []
        in_channels = base
        for level in range(levels):
            channels = config.level_channels(level)
            self.down_blocks.append(ResBlock(in_channels, channels, temb_dim, groups, rng))
            if level in config.attention_levels:
                self.down_sites[str(level)] = AttentionSite(
                    f"down{level}", channels, config, config.token_stride(level), rng
                )
            if level < levels - 1:
                self.downsamplers.append(Conv2d(channels, channels, rng, stride=2))
            in_channels = channels

        self.mid = ResBlock(in_channels, in_channels, temb_dim, groups, rng)

        self.upsamplers: list[Conv2d] = []
        self.up_blocks: list[ResBlock] = []
        self.up_sites: dict[str, AttentionSite] = {}
        for level in reversed(range(levels)):
            channels = config.level_channels(level)
            if level < levels - 1:
                self.upsamplers.append(Conv2d(config.level_channels(level + 1), channels, rng))
            self.up_blocks.append(ResBlock(2 * channels, channels, temb_dim, groups, rng))
            if level in config.attention_levels:
                stride = config.token_stride(level)
                self.up_sites[str(level)] = AttentionSite(f"up{level}", channels, config, stride, rng)

        self.norm_out = GroupNorm(groups, base * config.channel_multipliers[0])
        self.conv_out = Conv2d(config.level_channels(0), config.latent_channels, rng)
        log.debug("Denoiser with %d levels, %s attention at levels %s", levels, config.attention_mode.value,
                  config.attention_levels)

    def __call__(
        self,
        noisy: Tensor,
        t: float,
        source_latent: Tensor,
        embedding: ImageEmbedding,
        control: ControlFeatures | None = None,
        drag_points: DragPointSet | None = None,
    ) -> tuple[Tensor, list[AttentionRecord]]:
        """Predict the noise of both frames.

        Parameters
        ----------
        noisy
            Noisy latents of source and target, shape [2, C_lat, h, w]
        t
            Noise step
        source_latent
            Clean source latent, shape [C_lat, h, w], concatenated to both frames
        embedding
            Source image embedding for cross-attention
        control, optional
            Control features, injected into the target frame only
        drag_points, optional
            Drag pairs, injected at the output of every attention site

        Returns
        -------
            Predicted noise of shape [2, C_lat, h, w] and the matching attention records

        Raises
        ------
        ShapeError
            Inputs inconsistent with the configuration.
        ValueError
            Negative noise step or drag points outside of the image.
        """
        config = self.config
        latent_shape = (config.latent_channels, config.image_height // config.patch_factor,
                        config.image_width // config.patch_factor)
        if noisy.shape != (2, *latent_shape) or source_latent.shape != latent_shape:
            raise ShapeError("denoise", f"expected [2, *{latent_shape}] and {latent_shape}, got "
                             f"{noisy.shape} and {source_latent.shape}")
        if t < 0:
            raise ValueError(f"Noise step must not be negative, got {t}")
        if drag_points is not None and (drag_points.height, drag_points.width) != (config.image_height,
                                                                                   config.image_width):
            raise ValueError("Drag points refer to another image size")
        dtype = self.stem.weight.dtype

        temb = Tensor(timestep_embedding(t, config.base_channels, dtype)[None])
        temb = self.temb_out(F.silu(self.temb_in(temb)))

        source_pair = F.stack([source_latent, source_latent], axis=0)
        h = self.stem(F.concat([noisy, source_pair], axis=1))

        records: list[AttentionRecord] = []
        skips: list[Tensor] = []
        for level, block in enumerate(self.down_blocks):
            h = block(h, temb)
            site = self.down_sites.get(str(level))
            if site is not None:
                if control is not None:
                    if level not in control.features:
                        raise ShapeError("denoise", f"no control features for level {level}")
                    h = inject_target_only(h, control.features[level], control.scales[level])
                h, record = site(h, embedding, drag_points)
                if record is not None:
                    records.append(record)
            skips.append(h)
            if level < len(self.downsamplers):
                h = self.downsamplers[level](h)

        h = self.mid(h, temb)

        levels = len(self.down_blocks)
        for k, block in enumerate(self.up_blocks):
            level = levels - 1 - k
            if level < levels - 1:
                h = self.upsamplers[k - 1](F.upsample_nearest(h, 2))
            h = block(F.concat([h, skips[level]], axis=1), temb)
            site = self.up_sites.get(str(level))
            if site is not None:
                h, record = site(h, embedding, drag_points)
                if record is not None:
                    records.append(record)

        return self.conv_out(F.silu(self.norm_out(h))), records

    def denoise(
        self,
        noisy_latents: LatentPair,
        t: float,
        source_latent: Tensor,
        embedding: ImageEmbedding,
        control: ControlFeatures | None = None,
        drag_points: DragPointSet | None = None,
    ) -> tuple[LatentPair, list[AttentionRecord]]:
        """Predict the noise of a latent pair, see ``__call__``."""
        eps, records = self(noisy_latents.stacked(), t, source_latent, embedding, control, drag_points)
        return LatentPair.from_stacked(eps, noisy_latents.patch_factor), records
