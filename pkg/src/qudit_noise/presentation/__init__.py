"""Presentation layer: the qudit-noise command line."""
