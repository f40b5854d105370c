"""Binary PGM/PPM images and the text drag point file."""
import os
import re

import numpy as np

from pairedit.interfaces.sample_pair import DragPointSet
from pairedit.utilities.atomic import atomic_write

_HEADER_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


class DragFileError(ValueError):
    """Malformed or out-of-bounds line in a drag point file."""

    def __init__(self, path: str, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


def to_bytes(image: np.ndarray) -> np.ndarray:
    """Quantize values in [0, 1] to uint8, integer input is passed through."""
    if np.issubdtype(image.dtype, np.integer):
        return image.astype(np.uint8)
    return np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)


def from_bytes(pixels: np.ndarray) -> np.ndarray:
    """Map uint8 samples to float32 values k / 255."""
    return pixels.astype(np.float32) / np.float32(255.0)


def quantize(image: np.ndarray) -> np.ndarray:
    """Round values in [0, 1] to the 8 bit grid, so writing and reading back is lossless."""
    return from_bytes(to_bytes(image))


def write_pnm(path: str | os.PathLike, image: np.ndarray) -> None:
    """Write an image as binary PGM (P5) or PPM (P6).

    Parameters
    ----------
    path
        Destination file, written atomically
    image
        [H, W] or [1, H, W] grayscale, [3, H, W] RGB; floats in [0, 1] or uint8

    Raises
    ------
    ValueError
        Unsupported shape.
    """
    image = np.asarray(image)
    if image.ndim == 2:
        image = image[None]
    if image.ndim != 3 or image.shape[0] not in (1, 3):
        raise ValueError(f"Cannot write image of shape {image.shape}")
    channels, height, width = image.shape
    magic = b"P5" if channels == 1 else b"P6"
    payload = np.ascontiguousarray(to_bytes(image).transpose(1, 2, 0)).tobytes()
    with atomic_write(path) as file:
        file.write(magic + f"\n{width} {height}\n255\n".encode("ascii") + payload)


def read_pnm(path: str | os.PathLike) -> np.ndarray:
    """Read a binary PGM or PPM image.

    Returns
    -------
        Float32 image of shape [C, H, W] with values in [0, 1]

    Raises
    ------
    ValueError
        Not a binary PGM/PPM with 8 bit samples, or truncated.
    """
    with open(path, "rb") as file:
        data = file.read()
    tokens: list[bytes] = []
    offset = 0
    while len(tokens) < 4:
        match = _HEADER_TOKEN.match(data, offset)
        if match is None:
            raise ValueError(f"{path}: truncated header")
        tokens.append(match.group(1))
        offset = match.end()
    magic, width, height, max_value = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic not in (b"P5", b"P6") or max_value != 255:
        raise ValueError(f"{path}: only 8 bit binary PGM/PPM supported")
    channels = 1 if magic == b"P5" else 3
    # a single whitespace byte separates header and raster
    payload = data[offset + 1 : offset + 1 + width * height * channels]
    if len(payload) != width * height * channels:
        raise ValueError(f"{path}: truncated raster")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels).transpose(2, 0, 1)
    return from_bytes(pixels)


def read_drag_points(path: str | os.PathLike, height: int, width: int) -> DragPointSet:
    """Read a drag point file with one ``sx sy tx ty`` line per pair and ``#`` comments.

    Raises
    ------
    DragFileError
        Line with wrong field count, non-integer or out-of-bounds coordinate.
    """
    pairs = []
    with open(path, encoding="utf-8") as file:
        for number, raw in enumerate(file, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 4:
                raise DragFileError(str(path), number, f"expected 4 integers, got {len(fields)} fields")
            try:
                sx, sy, tx, ty = (int(f) for f in fields)
            except ValueError as exc:
                raise DragFileError(str(path), number, "coordinates must be integers") from exc
            for x, y in ((sx, sy), (tx, ty)):
                if not (0 <= x < width and 0 <= y < height):
                    raise DragFileError(str(path), number, f"point ({x}, {y}) outside of {width}x{height} image")
            pairs.append(((sx, sy), (tx, ty)))
    return DragPointSet(tuple(pairs), height, width)


def write_drag_points(path: str | os.PathLike, points: DragPointSet) -> None:
    """Write a drag point file."""
    lines = [f"# sx sy tx ty, image {points.width}x{points.height}"]
    lines += [f"{sx} {sy} {tx} {ty}" for (sx, sy), (tx, ty) in points]
    with atomic_write(path, "w") as file:
        file.write("\n".join(lines) + "\n")
