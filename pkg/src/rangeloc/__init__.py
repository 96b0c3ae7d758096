"""Condition- and viewpoint-invariant image-to-range place recognition."""

__version__ = "0.1.0"
