"""Definition of enums."""
from enum import Enum


class AttentionMode(str, Enum):
    """Frame-interaction attention used at every attention site of the denoiser."""

    TEMPORAL = "temporal"
    CROSSFRAME = "crossframe"
    MATCHING = "matching"


class SignalType(str, Enum):
    """Kind of editing signal a model is trained for."""

    SKETCH = "sketch"
    DRAG = "drag"
    COARSE = "coarse"

    @property
    def is_raster(self) -> bool:
        """True if the signal is an image consumed by the control encoder."""
        return self is not SignalType.DRAG

    @property
    def channels(self) -> int:
        """Number of raster channels, zero for drag points."""
        return {SignalType.SKETCH: 1, SignalType.COARSE: 3, SignalType.DRAG: 0}[self]

    @property
    def file_suffix(self) -> str:
        """File suffix of the on-disk signal representation."""
        return {SignalType.SKETCH: ".pgm", SignalType.COARSE: ".ppm", SignalType.DRAG: ".txt"}[self]


class FlowDirection(str, Enum):
    """Direction of a displacement field."""

    TARGET_TO_SOURCE = "target_to_source"
    SOURCE_TO_TARGET = "source_to_target"


class ShapeKind(str, Enum):
    """Shapes of synthetic scene objects."""

    RECT = "rect"
    DISK = "disk"
    TRIANGLE = "triangle"
