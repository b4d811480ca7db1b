"""Tests for the qudit-noise package."""
