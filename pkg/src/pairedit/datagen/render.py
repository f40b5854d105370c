"""Rendering of synthetic scenes with analytic flow and tracks.

Pixel ``(x, y)`` is the pixel center in column x and row y; all displacements are in pixels.
"""
from dataclasses import dataclass

import numpy as np

from pairedit.datagen.scene import SyntheticScene
from pairedit.interfaces.enums import FlowDirection
from pairedit.interfaces.sample_pair import FlowField, TrackSet
from pairedit.utilities.netpbm import quantize

BACKGROUND = -1
"""Object id of background pixels."""


@dataclass
class RenderedScene:
    """Frames of a scene together with the id of the surface visible at every pixel."""

    scene: SyntheticScene
    frames: np.ndarray
    """RGB frames on the 8 bit grid, shape [K, 3, H, W]."""

    ids: np.ndarray
    """Index of the visible object per pixel or ``BACKGROUND``, shape [K, H, W]."""

    @property
    def frame_count(self) -> int:
        """Number of frames."""
        return self.frames.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        """Image (height, width)."""
        return self.frames.shape[2], self.frames.shape[3]

    def _check_frame(self, frame: int) -> None:
        if not 0 <= frame < self.frame_count:
            raise ValueError(f"Frame {frame} outside of [0, {self.frame_count})")

    def _matched_positions(self, query: int, other: int) -> tuple[np.ndarray, np.ndarray]:
        # Position in frame `other` of the surface point seen at every pixel of frame `query`
        height, width = self.shape
        y, x = np.mgrid[0:height, 0:width].astype(np.float64)
        mx, my = x.copy(), y.copy()
        ids = self.ids[query]
        for k, obj in enumerate(self.scene.objects):
            covered = ids == k
            if not covered.any():
                continue
            u, v = obj.to_canonical(query, x[covered], y[covered])
            mx[covered], my[covered] = obj.to_pixels(other, u, v)
        return mx, my

    def _in_canvas(self, mx: np.ndarray, my: np.ndarray) -> np.ndarray:
        height, width = self.shape
        return (mx >= 0) & (mx <= width - 1) & (my >= 0) & (my <= height - 1)

    def flow(self, source: int, target: int, direction: FlowDirection) -> FlowField:
        """Analytic flow between two frames.

        ``TARGET_TO_SOURCE`` displaces every target pixel to the source position of its surface
        point, ``SOURCE_TO_TARGET`` the reverse. Pixels whose displaced position leaves the canvas
        are invalid.
        """
        self._check_frame(source)
        self._check_frame(target)
        direction = FlowDirection(direction)
        query, other = (target, source) if direction is FlowDirection.TARGET_TO_SOURCE else (source, target)
        mx, my = self._matched_positions(query, other)
        height, width = self.shape
        y, x = np.mgrid[0:height, 0:width].astype(np.float64)
        return FlowField(np.stack([mx - x, my - y]), direction, self._in_canvas(mx, my))

    def tracks(self, source: int, target: int) -> TrackSet:
        """Tracks of every target pixel into the source frame.

        A track is visible if it lands inside the canvas and the same surface is visible at the
        nearest source pixel, i.e. it is not covered by a nearer object in the source frame.
        """
        self._check_frame(source)
        self._check_frame(target)
        mx, my = self._matched_positions(target, source)
        visible = self._in_canvas(mx, my)
        height, width = self.shape
        col = np.clip(np.floor(mx + 0.5).astype(np.int64), 0, width - 1)
        row = np.clip(np.floor(my + 0.5).astype(np.int64), 0, height - 1)
        visible &= self.ids[source][row, col] == self.ids[target]
        return TrackSet(np.stack([mx, my]), visible)


def render_scene(scene: SyntheticScene) -> RenderedScene:
    """Render all frames of a scene.

    Objects have hard edges and are drawn in list order, later objects in front.
    """
    height, width = scene.height, scene.width
    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    background = scene.background.sample(x, y)

    frames = np.empty((scene.frame_count, 3, height, width), dtype=np.float32)
    ids = np.full((scene.frame_count, height, width), BACKGROUND, dtype=np.int64)
    for frame in range(scene.frame_count):
        image = background.copy()
        for k, obj in enumerate(scene.objects):
            u, v = obj.to_canonical(frame, x, y)
            covered = obj.contains(u, v)
            if not covered.any():
                continue
            image[:, covered] = obj.texture.sample(u[covered], v[covered])
            ids[frame][covered] = k
        frames[frame] = quantize(image)
    return RenderedScene(scene, frames, ids)
