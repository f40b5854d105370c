"""Synthetic scenes, pair selection, editing signals and correspondences."""
