"""Utilities init file."""
