"""Test token correspondences built from pixel tracks."""
import numpy as np
import pytest

from pairedit.datagen.correspondence import build_correspondence, correspondence_at_stride, token_centers
from pairedit.interfaces.sample_pair import NO_SOURCE


def test_token_centers():
    """Centers lie in the middle of each token cell, row-major."""
    x, y = token_centers(4, 2, 2)
    np.testing.assert_array_equal(x, [2, 6, 2, 6])
    np.testing.assert_array_equal(y, [2, 2, 6, 6])


def test_translation_by_one_stride(translated_rect_scene):
    """Object tokens match the source token one column to the left."""
    rendered = translated_rect_scene(velocity=(4.0, 0.0), frame_count=2)
    corr = correspondence_at_stride(rendered.tracks(0, 1), 4)
    assert corr.grid == (8, 8)
    x, y = token_centers(4, 8, 8)
    on_object = rendered.ids[1][y, x] == 0
    assert on_object.any()
    rows, cols = np.divmod(np.flatnonzero(on_object), 8)
    np.testing.assert_array_equal(corr.source_index[on_object], rows * 8 + cols - 1)
    assert corr.visible[on_object].all()


def test_brute_force(translated_rect_scene):
    """The dense matrix agrees with a per-token lookup of the tracks."""
    rendered = translated_rect_scene(velocity=(1.0, 0.5), size=16)
    tracks = rendered.tracks(0, 5)
    for stride in (2, 4):
        corr = correspondence_at_stride(tracks, stride)
        n_rows, n_cols = 16 // stride, 16 // stride
        expected = np.zeros((n_rows * n_cols, n_rows * n_cols))
        for i in range(n_rows * n_cols):
            r, c = divmod(i, n_cols)
            mx, my, visible = tracks.at(c * stride + stride // 2, r * stride + stride // 2)
            row, col = int(np.floor(my + 0.5)) // stride, int(np.floor(mx + 0.5)) // stride
            if visible and 0 <= row < n_rows and 0 <= col < n_cols:
                expected[i, row * n_cols + col] = 1.0
        np.testing.assert_array_equal(corr.matrix, expected)
        np.testing.assert_array_equal(corr.mask, expected.sum(axis=1))
        assert np.all(corr.source_index[~corr.visible] == NO_SOURCE)


def test_build_correspondence(translated_rect_scene):
    """One correspondence per distinct stride."""
    tracks = translated_rect_scene(size=16).tracks(0, 3)
    correspondences = build_correspondence(tracks, [4, 2, 4])
    assert list(correspondences) == [2, 4]
    assert correspondences[2].grid == (8, 8)
    with pytest.raises(ValueError, match="positive"):
        correspondence_at_stride(tracks, 0)
