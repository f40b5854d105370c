"""Test PGM/PPM images and drag point files."""
import numpy as np
import pytest

from pairedit.interfaces.sample_pair import DragPointSet
from pairedit.utilities.netpbm import DragFileError, quantize, read_drag_points, read_pnm, write_drag_points, write_pnm


@pytest.mark.parametrize("channels, magic", [(1, b"P5"), (3, b"P6")])
def test_pnm_roundtrip(channels, magic, random_image, tmp_path):
    """Quantized images are read back exactly."""
    image = quantize(random_image(channels, 5, 7))
    path = tmp_path / "image.pnm"
    write_pnm(path, image)
    assert path.read_bytes().startswith(magic + b"\n7 5\n255\n")
    np.testing.assert_array_equal(read_pnm(path), image)


def test_pnm_header_comments(tmp_path):
    """Header comments are skipped."""
    path = tmp_path / "image.pgm"
    path.write_bytes(b"P5\n# comment\n2 1\n255\n" + bytes([0, 255]))
    np.testing.assert_array_equal(read_pnm(path), [[[0.0, 1.0]]])


@pytest.mark.parametrize("content, match", [
    (b"P2\n2 1\n255\n0 255", "binary"),
    (b"P5\n2 1\n65535\n" + bytes(4), "8 bit"),
    (b"P5\n2 2\n255\n" + bytes(3), "truncated raster"),
    (b"P5\n2", "truncated header"),
])
def test_pnm_errors(content, match, tmp_path):
    """Unsupported and truncated files are rejected."""
    path = tmp_path / "image.pgm"
    path.write_bytes(content)
    with pytest.raises(ValueError, match=match):
        read_pnm(path)


def test_write_invalid_shape(tmp_path):
    """Only gray and RGB images are written."""
    with pytest.raises(ValueError, match="shape"):
        write_pnm(tmp_path / "image.pgm", np.zeros((2, 4, 4)))


def test_drag_points_roundtrip(tmp_path):
    """Drag files store one ``sx sy tx ty`` line per pair."""
    points = DragPointSet((((1, 2), (3, 4)), ((0, 0), (7, 5))), 6, 8)
    path = tmp_path / "signal.txt"
    write_drag_points(path, points)
    assert path.read_text().splitlines()[1:] == ["1 2 3 4", "0 0 7 5"]
    assert read_drag_points(path, 6, 8) == points


@pytest.mark.parametrize("line, match", [
    ("1 2 3", "expected 4 integers"),
    ("1 2 3 x", "integers"),
    ("1 2 8 4", "outside"),
    ("-1 2 3 4", "outside"),
])
def test_drag_file_errors(line, match, tmp_path):
    """Malformed lines name their line number."""
    path = tmp_path / "signal.txt"
    path.write_text(f"# header\n\n{line}\n")
    with pytest.raises(DragFileError, match=match) as info:
        read_drag_points(path, 6, 8)
    assert info.value.line == 3
