"""Parameter dataclasses of data generation, model, training and sampling."""
import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any

from pairedit.interfaces.enums import AttentionMode


class _DictMixin:
    def dict(self, use_strings: bool = False) -> dict[str, Any]:
        """Return the parameters as dictionary.

        Parameters
        ----------
        use_strings, optional
            boolean flag indicating if values of dictionary should be represented as strings, by default False

        Returns
        -------
            Parameter dictionary with enum members replaced by their values
        """
        values = {k: (v.value if isinstance(v, Enum) else v) for k, v in asdict(self).items()}  # type: ignore
        if use_strings:
            return {k: str(v) for k, v in values.items()}
        return values

    def __repr__(self) -> str:
        """Representation of the parameters as string."""
        return f"{type(self).__name__}({json.dumps(self.dict())})"


@dataclass(repr=False)
class DataParameter(_DictMixin):
    """Parameters of the synthetic pair generation.

    The desk-scale defaults replace the real-video corpus (about 20,000 training and
    200 evaluation pairs at 576x1024) by rendered scenes at 64x64.
    """

    image_height: int = 64
    """Image height in pixels."""

    image_width: int = 64
    """Image width in pixels."""

    num_pairs: int = 500
    """Number of training pairs."""

    num_eval_pairs: int = 50
    """Number of evaluation pairs."""

    frame_count: int = 16
    """Number of rendered frames per scene."""

    max_objects: int = 2
    """Maximum number of moving objects per scene."""

    max_speed: float = 1.5
    """Maximum object speed in pixels per frame."""

    min_interval: int = 5
    """Minimum frame gap between source and target (strict)."""

    tau_lo: float = 2.0
    """Lower bound of the mean moving-pixel flow magnitude in pixels."""

    tau_hi: float | None = None
    """Upper bound of the mean moving-pixel flow magnitude in pixels, image width / 4 if None."""

    sketch_threshold: float = 0.5
    """Sobel magnitude threshold relative to the maximum of the field."""

    min_drag_points: int = 1
    """Minimum number of drag point pairs per sample."""

    max_drag_points: int = 4
    """Maximum number of drag point pairs per sample."""

    pair_attempts: int = 20
    """Number of frame pairs tried per scene before a new scene is drawn."""

    scene_attempts: int = 50
    """Number of scenes tried per sample before generation fails."""

    def __post_init__(self) -> None:
        """Validate the parameters."""
        if self.image_height < 8 or self.image_width < 8:
            raise ValueError(f"Invalid image size {self.image_height}x{self.image_width}")
        if self.frame_count <= self.min_interval + 1:
            raise ValueError("Frame count must exceed the minimum interval")
        if not 1 <= self.min_drag_points <= self.max_drag_points:
            raise ValueError("Invalid drag point range")

    @property
    def flow_upper_bound(self) -> float:
        """Effective upper flow magnitude bound."""
        return self.image_width / 4 if self.tau_hi is None else self.tau_hi


@dataclass(repr=False)
class BackboneConfig(_DictMixin):
    """Architecture of the two-frame denoiser.

    Defaults are sized for CPU training in minutes.
    """

    base_channels: int = 32
    """Channels of the first U-Net level."""

    channel_multipliers: list[int] = field(default_factory=lambda: [1, 2, 4])
    """Channel multiplier per level; level l works at 1 / 2**l of the latent resolution."""

    attention_levels: list[int] = field(default_factory=lambda: [1, 2])
    """Levels which carry an attention site."""

    head_count: int = 4
    """Number of attention heads."""

    attention_mode: AttentionMode = AttentionMode.MATCHING
    """Frame-interaction attention."""

    patch_factor: int = 4
    """Space-to-depth factor of the latent stand-in."""

    embed_dim: int = 64
    """Width of the source image embedding tokens."""

    image_height: int = 64
    """Image height in pixels."""

    image_width: int = 64
    """Image width in pixels."""

    group_count: int = 8
    """Number of groups in group normalization."""

    def __post_init__(self) -> None:
        """Validate the architecture.

        Raises
        ------
        ValueError
            Inconsistent configuration.
        """
        self.attention_mode = AttentionMode(self.attention_mode)
        levels = len(self.channel_multipliers)
        if levels < 1:
            raise ValueError("At least one level required")
        if not set(self.attention_levels) <= set(range(levels)):
            raise ValueError(f"Attention levels {self.attention_levels} not within {levels} levels")
        if self.head_count < 1:
            raise ValueError("Head count must be positive")
        coarsest = self.patch_factor * 2 ** (levels - 1)
        if self.image_height % coarsest or self.image_width % coarsest:
            raise ValueError(f"Image size must be divisible by {coarsest}")
        for mult in self.channel_multipliers:
            channels = self.base_channels * mult
            if channels % self.head_count or channels % self.group_count:
                raise ValueError(f"{channels} channels not divisible by heads and groups")

    @property
    def latent_channels(self) -> int:
        """Channels of one patchified RGB frame."""
        return 3 * self.patch_factor**2

    def level_channels(self, level: int) -> int:
        """Feature channels of a level."""
        return self.base_channels * self.channel_multipliers[level]

    def token_stride(self, level: int) -> int:
        """Pixel stride of one token at a level."""
        return self.patch_factor * 2**level

    def level_grid(self, level: int) -> tuple[int, int]:
        """Token grid (height, width) of a level."""
        stride = self.token_stride(level)
        return self.image_height // stride, self.image_width // stride


@dataclass(repr=False)
class TrainParameter(_DictMixin):
    """Optimization parameters."""

    steps: int = 3000
    """Number of optimizer steps (20,000 at full scale)."""

    learning_rate: float = 5e-4
    """AdamW learning rate (1e-5 at full scale with pretrained weights)."""

    weight_decay: float = 1e-2
    """Decoupled weight decay."""

    batch_size: int = 1
    """Number of pairs whose gradients are accumulated per step."""

    lambda_match: float = 1.0
    """Weight of the matching loss."""

    reconstruct_source: bool = True
    """Include the source frame in the diffusion loss."""

    seed: int = 0
    """Seed of initialization, pair order, timesteps and noise."""

    def __post_init__(self) -> None:
        """Validate the parameters."""
        if self.steps < 1 or self.batch_size < 1 or self.learning_rate <= 0 or self.lambda_match < 0:
            raise ValueError("Invalid training parameters")


@dataclass(repr=False)
class SampleParameter(_DictMixin):
    """Sampling and evaluation parameters."""

    steps: int = 25
    """Euler steps."""

    seed: int = 0
    """Seed of the initial noise."""

    eval_timestep: int = 200
    """Noise step at which attention records are taken for matching accuracy."""

    def __post_init__(self) -> None:
        """Validate the parameters."""
        if self.steps < 1:
            raise ValueError("At least one sampling step required")


@dataclass
class Config:
    """Complete configuration of one run."""

    data: DataParameter = field(default_factory=DataParameter)
    model: BackboneConfig = field(default_factory=BackboneConfig)
    train: TrainParameter = field(default_factory=TrainParameter)
    sample: SampleParameter = field(default_factory=SampleParameter)

    def dict(self) -> dict[str, dict[str, Any]]:
        """Return the configuration as nested dictionary."""
        return {
            "data": self.data.dict(),
            "model": self.model.dict(),
            "train": self.train.dict(),
            "sample": self.sample.dict(),
        }
