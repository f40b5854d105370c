"""Synthetic moving-object scenes with a static camera."""
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from pairedit.interfaces.enums import ShapeKind
from pairedit.interfaces.parameters import DataParameter

_MIN_DETERMINANT = 1e-6


@dataclass
class Texture:
    """Smooth random texture in canonical coordinates.

    A coarse random field is sampled bilinearly, so pixels with identical canonical coordinates
    receive identical colors in every frame.
    """

    color: np.ndarray
    """Base RGB color, shape [3]."""

    pattern: np.ndarray
    """Color offsets on the coarse grid, shape [3, n, n]."""

    cell: float
    """Edge length of a coarse grid cell in pixels."""

    def __post_init__(self) -> None:
        """Normalize arrays."""
        self.color = np.asarray(self.color, dtype=np.float64).reshape(3)
        self.pattern = np.asarray(self.pattern, dtype=np.float64)
        if self.pattern.ndim != 3 or self.pattern.shape[0] != 3 or self.cell <= 0:
            raise ValueError("Texture pattern must have shape [3, n, n] and a positive cell size")

    def sample(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Return colors at canonical coordinates, shape [3, *u.shape], clipped to [0, 1]."""
        rows = self.pattern.shape[1] / 2 + v / self.cell
        cols = self.pattern.shape[2] / 2 + u / self.cell
        offsets = np.stack([
            ndimage.map_coordinates(channel, [rows, cols], order=1, mode="grid-wrap") for channel in self.pattern
        ])
        return np.clip(self.color.reshape(3, *([1] * u.ndim)) + offsets, 0.0, 1.0)

    @classmethod
    def uniform(cls, color: tuple[float, float, float]) -> "Texture":
        """Texture of a single color."""
        return cls(np.asarray(color), np.zeros((3, 2, 2)), 1.0)

    @classmethod
    def random(cls, rng: np.random.Generator, cell: float, size: int = 16, contrast: float = 0.25) -> "Texture":
        """Draw a random texture."""
        color = rng.uniform(0.2, 0.8, size=3)
        pattern = rng.uniform(-contrast, contrast, size=(3, size, size))
        return cls(color, pattern, cell)


def affine_trajectory(
    center: tuple[float, float],
    velocity: tuple[float, float] = (0.0, 0.0),
    angular_velocity: float = 0.0,
    scale_rate: float = 1.0,
    frame_count: int = 1,
) -> np.ndarray:
    """Per-frame affine maps from canonical object coordinates to pixel coordinates.

    Frame k rotates by ``k * angular_velocity``, scales by ``scale_rate ** k`` and translates the
    object center to ``center + k * velocity``.

    Returns
    -------
        Array of shape [frame_count, 2, 3], rows map ``(u, v, 1)`` to x and y
    """
    frames = np.arange(frame_count, dtype=np.float64)
    angle = frames * angular_velocity
    scale = float(scale_rate) ** frames
    trajectory = np.zeros((frame_count, 2, 3))
    trajectory[:, 0, 0] = scale * np.cos(angle)
    trajectory[:, 0, 1] = -scale * np.sin(angle)
    trajectory[:, 1, 0] = scale * np.sin(angle)
    trajectory[:, 1, 1] = scale * np.cos(angle)
    trajectory[:, 0, 2] = center[0] + frames * velocity[0]
    trajectory[:, 1, 2] = center[1] + frames * velocity[1]
    return trajectory


@dataclass
class SceneObject:
    """Textured object moving along a per-frame affine trajectory.

    Raises
    ------
    ValueError
        Non-positive size or a degenerate transform in some frame.
    """

    shape: ShapeKind
    size: tuple[float, float]
    """Half extent (width, height) in canonical coordinates."""

    texture: Texture
    trajectory: np.ndarray
    """Canonical-to-pixel affine map per frame, shape [frame_count, 2, 3]."""

    def __post_init__(self) -> None:
        """Validate the object."""
        self.shape = ShapeKind(self.shape)
        self.trajectory = np.asarray(self.trajectory, dtype=np.float64)
        if self.trajectory.ndim != 3 or self.trajectory.shape[1:] != (2, 3):
            raise ValueError(f"Trajectory must have shape [frames, 2, 3], got {self.trajectory.shape}")
        if min(self.size) <= 0:
            raise ValueError(f"Object size must be positive, got {self.size}")
        determinants = np.linalg.det(self.trajectory[:, :, :2])
        if np.any(np.abs(determinants) < _MIN_DETERMINANT):
            frame = int(np.argmin(np.abs(determinants)))
            raise ValueError(f"Degenerate object transform in frame {frame}")

    @property
    def frame_count(self) -> int:
        """Number of frames the trajectory covers."""
        return self.trajectory.shape[0]

    def to_pixels(self, frame: int, u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Map canonical coordinates to pixel coordinates in a frame."""
        m = self.trajectory[frame]
        return m[0, 0] * u + m[0, 1] * v + m[0, 2], m[1, 0] * u + m[1, 1] * v + m[1, 2]

    def to_canonical(self, frame: int, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Map pixel coordinates of a frame to canonical coordinates."""
        m = self.trajectory[frame]
        inverse = np.linalg.inv(m[:, :2])
        dx, dy = x - m[0, 2], y - m[1, 2]
        return inverse[0, 0] * dx + inverse[0, 1] * dy, inverse[1, 0] * dx + inverse[1, 1] * dy

    def contains(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Coverage of canonical coordinates by the object shape."""
        a, b = self.size
        match self.shape:
            case ShapeKind.RECT:
                return (np.abs(u) <= a) & (np.abs(v) <= b)
            case ShapeKind.DISK:
                return (u / a) ** 2 + (v / b) ** 2 <= 1.0
            case ShapeKind.TRIANGLE:
                # Apex at (0, -b), base from (-a, b) to (a, b)
                return (v <= b) & (np.abs(u) * 2 * b <= a * (v + b))
        raise ValueError(f"Unknown shape {self.shape}")


@dataclass
class SyntheticScene:
    """Static textured background with objects drawn back to front.

    Raises
    ------
    ValueError
        Invalid canvas or object trajectories of the wrong length.
    """

    height: int
    width: int
    background: Texture
    objects: list[SceneObject] = field(default_factory=list)
    frame_count: int = 16
    seed: int | None = None
    """Seed the scene was drawn with, None for hand-built scenes."""

    def __post_init__(self) -> None:
        """Validate the scene."""
        if self.height < 1 or self.width < 1 or self.frame_count < 1:
            raise ValueError(f"Invalid scene of {self.width}x{self.height} pixels and {self.frame_count} frames")
        for k, obj in enumerate(self.objects):
            if obj.frame_count != self.frame_count:
                raise ValueError(f"Object {k} has {obj.frame_count} trajectory frames, scene has {self.frame_count}")


def random_scene(rng: np.random.Generator, params: DataParameter, seed: int | None = None) -> SyntheticScene:
    """Draw a scene of one to ``max_objects`` moving objects.

    Objects start inside the canvas and move with constant velocity, slow rotation and slow
    isotropic scaling.
    """
    height, width = params.image_height, params.image_width
    extent = min(height, width)
    background = Texture.random(rng, cell=extent / 8, size=16, contrast=0.15)
    objects = []
    for _ in range(int(rng.integers(1, params.max_objects + 1))):
        size = tuple(rng.uniform(0.08, 0.18, size=2) * extent)
        center = (rng.uniform(0.25, 0.75) * width, rng.uniform(0.25, 0.75) * height)
        speed = rng.uniform(0.3, params.max_speed)
        heading = rng.uniform(0, 2 * np.pi)
        trajectory = affine_trajectory(
            center,
            velocity=(speed * np.cos(heading), speed * np.sin(heading)),
            angular_velocity=rng.uniform(-0.02, 0.02),
            scale_rate=rng.uniform(0.99, 1.01),
            frame_count=params.frame_count,
        )
        objects.append(SceneObject(
            shape=ShapeKind(rng.choice([kind.value for kind in ShapeKind])),
            size=(float(size[0]), float(size[1])),
            texture=Texture.random(rng, cell=3.0),
            trajectory=trajectory,
        ))
    return SyntheticScene(height, width, background, objects, params.frame_count, seed)
