"""Interface classes of training samples, editing signals, motion fields and correspondences."""
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from pairedit.interfaces.enums import FlowDirection, SignalType

NO_SOURCE = -1
"""Source index of a target token without visible counterpart."""

Pixel = tuple[int, int]


@dataclass(frozen=True)
class DragPointSet:
    """Drag point pairs in pixel coordinates ``(x, y)``, x along the width.

    Raises
    ------
    ValueError
        A coordinate lies outside the image.
    """

    pairs: tuple[tuple[Pixel, Pixel], ...]
    """Pairs of (source pixel, target pixel)."""

    height: int
    """Image height in pixels."""

    width: int
    """Image width in pixels."""

    def __post_init__(self) -> None:
        """Check bounds and normalize the pair container."""
        pairs = tuple((tuple(map(int, src)), tuple(map(int, tgt))) for src, tgt in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        for src, tgt in pairs:
            for x, y in (src, tgt):
                if not (0 <= x < self.width and 0 <= y < self.height):
                    raise ValueError(f"Drag point ({x}, {y}) outside of {self.width}x{self.height} image")

    def __len__(self) -> int:
        """Number of pairs."""
        return len(self.pairs)

    def __iter__(self) -> Iterator[tuple[Pixel, Pixel]]:
        """Iterate over pairs."""
        return iter(self.pairs)

    def canonical(self) -> "DragPointSet":
        """Return the set with pairs in sorted order."""
        return DragPointSet(tuple(sorted(self.pairs)), self.height, self.width)


@dataclass
class EditSignal:
    """Editing signal, either a sketch raster, a coarse-edit image or a drag point set."""

    kind: SignalType
    raster: np.ndarray | None = None
    points: DragPointSet | None = None

    def __post_init__(self) -> None:
        """Check that the payload matches the signal kind.

        Raises
        ------
        ValueError
            Payload missing or with invalid shape or range.
        """
        self.kind = SignalType(self.kind)
        if self.kind is SignalType.DRAG:
            if self.points is None or self.raster is not None:
                raise ValueError("Drag signal requires a point set and no raster")
            return
        if self.raster is None or self.points is not None:
            raise ValueError(f"{self.kind.value} signal requires a raster and no points")
        raster = np.asarray(self.raster, dtype=np.float32)
        if raster.ndim != 3 or raster.shape[0] != self.kind.channels:
            raise ValueError(f"{self.kind.value} raster must be [{self.kind.channels}, H, W], got {raster.shape}")
        if raster.min() < 0 or raster.max() > 1:
            raise ValueError("Raster values must lie in [0, 1]")
        self.raster = raster

    @classmethod
    def sketch(cls, raster: np.ndarray) -> "EditSignal":
        """Construct a sketch signal from a [1, H, W] raster."""
        return cls(SignalType.SKETCH, raster=raster)

    @classmethod
    def coarse(cls, image: np.ndarray) -> "EditSignal":
        """Construct a coarse-edit signal from a [3, H, W] image."""
        return cls(SignalType.COARSE, raster=image)

    @classmethod
    def drag(cls, points: DragPointSet) -> "EditSignal":
        """Construct a drag signal."""
        return cls(SignalType.DRAG, points=points)

    @property
    def image_size(self) -> tuple[int, int]:
        """Image (height, width) the signal refers to."""
        if self.points is not None:
            return self.points.height, self.points.width
        assert self.raster is not None  # noqa: S101
        return self.raster.shape[1], self.raster.shape[2]


@dataclass
class FlowField:
    """Per-pixel displacement ``(dx, dy)`` with validity mask.

    Invalid pixels carry zero displacement, enforced on construction.
    """

    displacement: np.ndarray
    """Displacement in pixels, shape [2, H, W] with dx first."""

    direction: FlowDirection
    """Direction of the displacement."""

    valid: np.ndarray
    """Validity mask, shape [H, W]."""

    def __post_init__(self) -> None:
        """Normalize arrays and zero invalid displacements."""
        self.direction = FlowDirection(self.direction)
        self.valid = np.asarray(self.valid, dtype=bool)
        displacement = np.array(self.displacement, dtype=np.float64)
        if displacement.shape != (2, *self.valid.shape):
            raise ValueError(f"Displacement shape {displacement.shape} does not match mask {self.valid.shape}")
        displacement[:, ~self.valid] = 0.0
        self.displacement = displacement

    @property
    def shape(self) -> tuple[int, int]:
        """Image (height, width)."""
        return self.valid.shape  # type: ignore

    @property
    def magnitude(self) -> np.ndarray:
        """Per-pixel displacement length, shape [H, W]."""
        return np.hypot(self.displacement[0], self.displacement[1])


@dataclass
class TrackSet:
    """Tracks of every query-frame pixel into the other frame."""

    matched: np.ndarray
    """Matched position ``(x, y)`` in the other frame per query pixel, shape [2, H, W]."""

    visible: np.ndarray
    """Visibility flag per query pixel, shape [H, W]."""

    def __post_init__(self) -> None:
        """Check that visible tracks land inside the image.

        Raises
        ------
        ValueError
            A visible track lies outside the image.
        """
        self.visible = np.asarray(self.visible, dtype=bool)
        self.matched = np.asarray(self.matched, dtype=np.float64)
        height, width = self.visible.shape
        x, y = self.matched[0][self.visible], self.matched[1][self.visible]
        if x.size and (x.min() < 0 or x.max() > width - 1 or y.min() < 0 or y.max() > height - 1):
            raise ValueError("Visible track outside of image bounds")

    @property
    def shape(self) -> tuple[int, int]:
        """Image (height, width)."""
        return self.visible.shape  # type: ignore

    def at(self, x: int, y: int) -> tuple[float, float, bool]:
        """Return matched position and visibility of query pixel ``(x, y)``."""
        return float(self.matched[0, y, x]), float(self.matched[1, y, x]), bool(self.visible[y, x])


@dataclass
class Correspondence:
    """Sparse row form of the binary correspondence matrix C and the visibility vector m.

    Row i of C holds a single one at column ``source_index[i]`` if ``visible[i]``, otherwise it is zero.
    """

    source_index: np.ndarray
    """Source token per target token, ``NO_SOURCE`` for invisible rows, shape [N]."""

    visible: np.ndarray
    """Row visibility m, shape [N]."""

    height_tokens: int
    """Token grid height."""

    width_tokens: int
    """Token grid width."""

    def __post_init__(self) -> None:
        """Validate the correspondence invariants.

        Raises
        ------
        ValueError
            Inconsistent sizes, out-of-range source token or visible row without source.
        """
        self.source_index = np.asarray(self.source_index, dtype=np.int64)
        self.visible = np.asarray(self.visible, dtype=bool)
        n = self.height_tokens * self.width_tokens
        if self.source_index.shape != (n,) or self.visible.shape != (n,):
            raise ValueError(f"Correspondence of {self.height_tokens}x{self.width_tokens} grid needs {n} rows")
        if np.any(self.source_index[~self.visible] != NO_SOURCE):
            raise ValueError("Invisible rows must not reference a source token")
        visible_sources = self.source_index[self.visible]
        if visible_sources.size and (visible_sources.min() < 0 or visible_sources.max() >= n):
            raise ValueError("Visible rows must reference a source token within the grid")

    @property
    def num_tokens(self) -> int:
        """Number of tokens N."""
        return self.height_tokens * self.width_tokens

    @property
    def grid(self) -> tuple[int, int]:
        """Token grid (height, width)."""
        return self.height_tokens, self.width_tokens

    @property
    def matrix(self) -> np.ndarray:
        """Dense C of shape [N, N]."""
        n = self.num_tokens
        out = np.zeros((n, n), dtype=np.float64)
        rows = np.flatnonzero(self.visible)
        out[rows, self.source_index[rows]] = 1.0
        return out

    @property
    def mask(self) -> np.ndarray:
        """Row visibility m as float vector of shape [N]."""
        return self.visible.astype(np.float64)

    @classmethod
    def from_matrix(
        cls, matrix: np.ndarray, mask: np.ndarray, height_tokens: int, width_tokens: int
    ) -> "Correspondence":
        """Construct from dense C and m, checking the matrix invariants.

        Raises
        ------
        ValueError
            Non-binary entries, more than one nonzero per row or nonzero invisible rows.
        """
        matrix = np.asarray(matrix)
        mask = np.asarray(mask).astype(bool)
        if not np.isin(matrix, (0, 1)).all():
            raise ValueError("C must be binary")
        if np.any(matrix.sum(axis=1) > 1):
            raise ValueError("Each row of C has at most one nonzero entry")
        if np.any(matrix[~mask].sum(axis=1) > 0):
            raise ValueError("Rows with m = 0 must be zero")
        index = np.where(matrix.sum(axis=1) > 0, matrix.argmax(axis=1), NO_SOURCE)
        return cls(index, mask & (index != NO_SOURCE), height_tokens, width_tokens)


@dataclass
class SamplePair:
    """One training tuple: images, editing signal and per-resolution correspondences.

    Correspondences are keyed by the token stride in pixels.
    Flows and tracks are present for freshly generated pairs and None for pairs loaded from disk.
    """

    source: np.ndarray
    """Source image, shape [3, H, W], values in [0, 1]."""

    target: np.ndarray
    """Target image, shape [3, H, W], values in [0, 1]."""

    signal: EditSignal
    correspondences: dict[int, Correspondence]
    flow_t2s: FlowField | None = None
    flow_s2t: FlowField | None = None
    tracks: TrackSet | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Validate image dims and signal size.

        Raises
        ------
        ValueError
            Images or signal with mismatching dims.
        """
        self.source = np.asarray(self.source, dtype=np.float32)
        self.target = np.asarray(self.target, dtype=np.float32)
        if self.source.ndim != 3 or self.source.shape[0] != 3 or self.source.shape != self.target.shape:
            raise ValueError(f"Source {self.source.shape} and target {self.target.shape} must be [3, H, W] alike")
        if self.signal.image_size != self.image_size:
            raise ValueError(f"Signal size {self.signal.image_size} differs from image size {self.image_size}")
        for stride, corr in self.correspondences.items():
            if corr.grid != (self.image_size[0] // stride, self.image_size[1] // stride):
                raise ValueError(f"Correspondence grid {corr.grid} does not match stride {stride}")

    @property
    def image_size(self) -> tuple[int, int]:
        """Image (height, width)."""
        return self.source.shape[1], self.source.shape[2]


def correspondence_for_grid(
    correspondences: Mapping[int, Correspondence], height_tokens: int, width_tokens: int
) -> Correspondence:
    """Look up the correspondence of a token grid.

    Raises
    ------
    ValueError
        No correspondence at this resolution.
    """
    for corr in correspondences.values():
        if corr.grid == (height_tokens, width_tokens):
            return corr
    raise ValueError(f"No correspondence for a {height_tokens}x{width_tokens} token grid")
