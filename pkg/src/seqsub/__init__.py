"""Sequence selection under monotone submodular-type objectives."""

__version__ = "0.1.0"
