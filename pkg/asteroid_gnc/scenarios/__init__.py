"""Bundled scenario presets."""
