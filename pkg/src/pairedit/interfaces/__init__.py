"""Interfaces init file."""
