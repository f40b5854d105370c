"""Sparse control encoder for raster editing signals and target-only injection."""
from dataclasses import dataclass

import numpy as np

from pairedit.backbone.latent import patchify
from pairedit.interfaces.parameters import BackboneConfig
from pairedit.numerics import functional as F
from pairedit.numerics.modules import Conv2d, Module
from pairedit.numerics.tensor import DEFAULT_DTYPE, Param, ShapeError, Tensor


@dataclass
class ControlFeatures:
    """Per-level control feature maps with their learnable injection scales."""

    features: dict[int, Tensor]
    """Feature map per attention level, shape [1, C_l, h_l, w_l]."""

    scales: dict[int, Param]
    """Injection scale per attention level, shape [1]."""


class ControlBlock(Module):
    """Residual block with optional stride-2 downsampling at its input."""

    def __init__(self, in_channels: int, out_channels: int, downsample: bool, rng: np.random.Generator):
        self.conv_in = Conv2d(in_channels, out_channels, rng, stride=2 if downsample else 1)
        self.conv_a = Conv2d(out_channels, out_channels, rng)
        self.conv_b = Conv2d(out_channels, out_channels, rng)

    def __call__(self, x: Tensor) -> Tensor:
        """Apply the block."""
        h = self.conv_in(x)
        return F.add(h, self.conv_b(F.silu(self.conv_a(F.silu(h)))))


class ControlEncoder(Module):
    """Encoder turning a [C_s, H, W] raster into one feature map per attention level.

    The stem works on the patchified raster, so level l features have the resolution of
    backbone level l. Injection scales start at zero, which makes a fresh encoder a no-op.
    """

    def __init__(self, signal_channels: int, config: BackboneConfig, rng: np.random.Generator):
        """Construct the encoder.

        Parameters
        ----------
        signal_channels
            Raster channels, 1 for sketches and 3 for coarse edits
        config
            Backbone configuration the features are matched to
        rng
            Random generator of the initialization
        """
        self.signal_channels = signal_channels
        self.patch_factor = config.patch_factor
        self.image_size = (config.image_height, config.image_width)
        self.levels = sorted(config.attention_levels)
        last = max(self.levels, default=0)
        self.stem = Conv2d(signal_channels * config.patch_factor**2, config.base_channels, rng)
        self.blocks = [
            ControlBlock(
                config.level_channels(level - 1) if level else config.base_channels,
                config.level_channels(level),
                downsample=level > 0,
                rng=rng,
            )
            for level in range(last + 1)
        ]
        self.projections = {
            str(level): Conv2d(config.level_channels(level), config.level_channels(level), rng, kernel_size=1)
            for level in self.levels
        }
        self.scales = {str(level): Param(np.zeros(1, dtype=DEFAULT_DTYPE)) for level in self.levels}

    def encode_signal(self, raster: np.ndarray | Tensor) -> ControlFeatures:
        """Encode a raster into per-level features.

        Raises
        ------
        ShapeError
            Raster channels or spatial dims differ from the configuration.
        """
        x = raster if isinstance(raster, Tensor) else Tensor(np.asarray(raster, dtype=np.float32))
        if x.ndim != 3 or x.shape[0] != self.signal_channels or x.shape[1:] != self.image_size:
            raise ShapeError(
                "encode_signal",
                f"expected raster [{self.signal_channels}, {self.image_size[0]}, {self.image_size[1]}], got {x.shape}",
            )
        dtype = self.stem.weight.dtype
        if x.dtype != dtype and not x.requires_grad:
            x = Tensor(x.data.astype(dtype))
        latent = patchify(x, self.patch_factor)
        h = F.silu(self.stem(F.reshape(latent, (1, *latent.shape))))
        features: dict[int, Tensor] = {}
        for level, block in enumerate(self.blocks):
            h = block(h)
            if level in self.levels:
                features[level] = self.projections[str(level)](h)
        return ControlFeatures(features, {level: self.scales[str(level)] for level in self.levels})


def inject_target_only(features: Tensor, control: Tensor, scale: Tensor) -> Tensor:
    """Add ``scale * control`` to the target frame of [2, C, h, w] features.

    The source frame slice is passed through unchanged.

    Raises
    ------
    ShapeError
        Control resolution or channels differ from the features.
    """
    if features.ndim != 4 or features.shape[0] != 2:
        raise ShapeError("inject_target_only", f"expected [2, C, h, w] features, got {features.shape}")
    if control.ndim == 3:
        control = F.reshape(control, (1, *control.shape))
    if control.shape != (1, *features.shape[1:]):
        raise ShapeError("inject_target_only", f"control {control.shape} does not match features {features.shape}")
    source = F.index(features, slice(0, 1))
    target = F.add(F.index(features, slice(1, 2)), F.scale_by(control, scale))
    return F.concat([source, target], axis=0)
